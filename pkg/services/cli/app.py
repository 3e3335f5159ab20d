"""``pathocl`` command line: one subcommand per pipeline stage plus the end-to-end ``evaluate``."""
from __future__ import annotations

import argparse
import json
import sys
from importlib import metadata
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from common.config import RunConfig, Settings, StageOptions, apply_overrides
from common.errors import DataError, PathOclError, UsageError
from common.logging_setup import audit_stage, get_stage_logger
from common.models import EmbedderKind, Metric, Technique
from common.schemas import SpecInput
from services.evalharness.pipeline import craft_bundles, load_inputs, open_backend, rank_spec, run_pipeline
from services.evalharness.report import render_report
from services.llm.client import RunLog, config_from_settings, generate_many, load_run_log
from services.llm.costs import cost_report
from services.llm.replay import compile_replay_seed, load_seed
from services.model.loader import dump_model, load_model, size_category
from services.nlp.preprocess import extract_uml_elements, load_specs, preprocess
from services.oclcheck.checker import validate
from services.pathgen.graph import build_graph, default_max_len, dump_paths, enumerate_simple_paths
from services.prompt.builder import TEMPLATE_VERSION, prompt_record
from services.rank.embedders import build_embedder

logger = get_stage_logger("cli")


def _version() -> str:
    try:
        package = metadata.version("pathocl")
    except metadata.PackageNotFoundError:
        package = "0.1.0"
    return f"pathocl {package} (prompt templates {TEMPLATE_VERSION})"


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with the usage code instead of argparse's 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


# -- argument groups ------------------------------------------------------------


def _add_config(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file of Settings/RunConfig values (flags win over it)")
    parser.add_argument("--out", help="write the result here instead of stdout")


def _add_model(parser: argparse.ArgumentParser, help_text: str = "UML model JSON") -> None:
    parser.add_argument("--model", dest="model_files", action="append", help=help_text)


def _add_specs(parser: argparse.ArgumentParser, allow_text: bool = True) -> None:
    parser.add_argument("--specs", dest="specs_files", action="append", help="JSON-lines specification file")
    if allow_text:
        parser.add_argument("--spec", dest="spec_text", help="a single specification given inline")


def _add_ranking(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--metric", choices=[metric.value for metric in Metric])
    parser.add_argument("--k", type=int, help="number of top-ranked paths")
    parser.add_argument("--embedder", choices=[kind.value for kind in EmbedderKind])
    parser.add_argument("--max-len", dest="max_len", type=int, help="longest path, in classes")


def _add_generation(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--technique", choices=[technique.value for technique in Technique])
    parser.add_argument("--backend", choices=["live", "replay"])
    parser.add_argument("--replay-fixture", dest="replay_fixture", help="hash-keyed replay fixture (JSON)")
    parser.add_argument("--replay-seed", dest="replay_seed", help="replay seed (JSON-lines), compiled on the fly")
    parser.add_argument("--record-to", dest="record_to", help="live backend: also save completions as a replay fixture")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pathocl", description="Path-based OCL generation and evaluation pipeline.")
    parser.add_argument("--version", action="version", version=_version())
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ingest = commands.add_parser("ingest", help="validate a UML model and print its canonical JSON")
    _add_model(ingest)
    _add_config(ingest)

    extract = commands.add_parser("extract", help="UML element sets of specifications")
    _add_specs(extract)
    _add_config(extract)

    paths = commands.add_parser("paths", help="enumerate simple paths of a model's class graph")
    _add_model(paths)
    paths.add_argument("--max-len", dest="max_len", type=int)
    _add_config(paths)

    rank = commands.add_parser("rank", help="top-k paths per specification")
    _add_model(rank)
    _add_specs(rank)
    _add_ranking(rank)
    _add_config(rank)

    prompt = commands.add_parser("prompt", help="craft prompts for the top-k paths")
    _add_model(prompt)
    _add_specs(prompt)
    _add_ranking(prompt)
    prompt.add_argument("--technique", choices=[technique.value for technique in Technique])
    _add_config(prompt)

    generate = commands.add_parser("generate", help="generate OCL constraints (JSON-lines run log)")
    _add_model(generate)
    _add_specs(generate, allow_text=False)
    _add_ranking(generate)
    _add_generation(generate)
    _add_config(generate)

    check = commands.add_parser("validate", help="parse and type-check OCL constraints")
    _add_model(check)
    check.add_argument("--constraint", help="constraint text, or @file to read it from a file")
    check.add_argument("--completions", help="validate every completion of a run log instead")
    _add_config(check)

    evaluate = commands.add_parser("evaluate", help="run the whole pipeline and report Validity/Correctness@K")
    _add_model(evaluate, "UML model JSON; repeat together with --specs to cover several models")
    _add_specs(evaluate, allow_text=False)
    _add_ranking(evaluate)
    _add_generation(evaluate)
    evaluate.add_argument("--verdicts", help="human correctness verdicts (JSON-lines)")
    evaluate.add_argument("--baseline-run", dest="baseline_run", help="output directory of a run to compare against")
    evaluate.add_argument("--output-dir", dest="output_dir", help="where stage artifacts and the report go")
    evaluate.add_argument("--strict-verdicts", dest="strict_verdicts", action="store_true", default=None)
    _add_config(evaluate)

    cost = commands.add_parser("cost", help="cost summary of a run log")
    cost.add_argument("--completions", required=True)
    _add_config(cost)

    compile_ = commands.add_parser("replay-compile", help="turn a replay seed into a hash-keyed fixture")
    _add_model(compile_)
    _add_specs(compile_, allow_text=False)
    compile_.add_argument("--seed", required=True)
    _add_config(compile_)
    return parser


# -- configuration ----------------------------------------------------------------


def _load_config_file(path: Optional[str]) -> dict[str, Any]:
    if not path:
        return {}
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc.strerror or exc}", location=path) from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc.msg}", location=f"{path}:{exc.lineno}") from exc
    if not isinstance(document, dict):
        raise UsageError("config file must be a JSON object", location=path)
    return document


def _configure(args: argparse.Namespace) -> tuple[Settings, dict[str, Any]]:
    """Apply config-file settings above the environment; return the settings and run-level values."""

    document = _load_config_file(args.config)
    setting_keys = set(Settings.model_fields)
    try:
        settings = apply_overrides({key: value for key, value in document.items() if key in setting_keys})
    except ValidationError as exc:
        raise UsageError(f"invalid setting in config file: {exc.errors()[0]['msg']}", location=args.config) from exc
    run_values = {key: value for key, value in document.items() if key in RunConfig.model_fields}
    for key in RunConfig.model_fields:
        value = getattr(args, key, None)
        if value is not None:
            run_values[key] = value
    return settings, run_values


def _validated(schema: type[StageOptions], values: dict[str, Any], **defaults: Any) -> Any:
    merged = {**defaults, **values}
    try:
        return schema(**merged)
    except ValidationError as exc:
        error = exc.errors()[0]
        where = ".".join(str(part) for part in error["loc"])
        raise UsageError(f"{where + ': ' if where else ''}{error['msg'].removeprefix('Value error, ')}") from exc


def _run_config(values: dict[str, Any], **defaults: Any) -> RunConfig:
    return _validated(RunConfig, values, **defaults)


def _stage_options(values: dict[str, Any], settings: Settings) -> StageOptions:
    return _validated(StageOptions, values, embedder=settings.embedder)


def _single_model(values: dict[str, Any]) -> str:
    files = values.get("model_files") or []
    if len(files) != 1:
        raise UsageError("exactly one --model is required")
    return files[0]


def _specs(args: argparse.Namespace, values: dict[str, Any]) -> list[SpecInput]:
    if getattr(args, "spec_text", None):
        return [SpecInput(id="spec", text=args.spec_text)]
    files = values.get("specs_files") or []
    if len(files) != 1:
        raise UsageError("pass one --specs file or an inline --spec")
    return load_specs(files[0])


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _jsonl(rows: Sequence[dict]) -> str:
    return "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows)


# -- subcommands ----------------------------------------------------------------------


def _cmd_ingest(args: argparse.Namespace, settings: Settings, values: dict[str, Any]) -> int:
    model = load_model(_single_model(values))
    logger.info("ingested %s: %d classes (%s)", model.name, len(model.classes), size_category(model).value)
    _emit(dump_model(model), args.out)
    return 0


def _cmd_extract(args: argparse.Namespace, settings: Settings, values: dict[str, Any]) -> int:
    rows = [
        {"spec_id": spec.id, "elements": sorted(extract_uml_elements(preprocess(spec.text)))}
        for spec in _specs(args, values)
    ]
    _emit(_jsonl(rows), args.out)
    return 0


def _paths_for(model_file: str, options: StageOptions, settings: Settings):
    model = load_model(model_file)
    graph = build_graph(model)
    max_len = options.max_len if options.max_len is not None else default_max_len(graph)
    return model, enumerate_simple_paths(graph, max_len, settings.path_cap)


def _cmd_paths(args: argparse.Namespace, settings: Settings, values: dict[str, Any]) -> int:
    _, paths = _paths_for(_single_model(values), _stage_options(values, settings), settings)
    _emit(dump_paths(paths), args.out)
    return 0


def _ranked(args: argparse.Namespace, settings: Settings, values: dict[str, Any]):
    options = _stage_options(values, settings)
    model, paths = _paths_for(_single_model(values), options, settings)
    metric = Metric(options.metric)
    embedder = None
    if metric is Metric.COSINE:
        embedder = build_embedder(settings, EmbedderKind(options.embedder))
    for spec in _specs(args, values):
        _, ranked = rank_spec(model, paths, spec, metric, options.k, embedder)
        yield model, spec, ranked


def _cmd_rank(args: argparse.Namespace, settings: Settings, values: dict[str, Any]) -> int:
    rows = [
        {"spec_id": spec.id, "rank": item.rank, "path": list(item.path), "score": item.score, "metric": item.metric.value}
        for _, spec, ranked in _ranked(args, settings, values)
        for item in ranked
    ]
    _emit(_jsonl(rows), args.out)
    return 0


def _cmd_prompt(args: argparse.Namespace, settings: Settings, values: dict[str, Any]) -> int:
    technique = Technique(_stage_options(values, settings).technique)
    rows = [
        prompt_record(spec.id, rank, bundle)
        for model, spec, ranked in _ranked(args, settings, values)
        for rank, bundle in craft_bundles(model, spec, ranked, technique)
    ]
    _emit(_jsonl(rows), args.out)
    return 0


def _cmd_generate(args: argparse.Namespace, settings: Settings, values: dict[str, Any]) -> int:
    run = _run_config(values)
    inputs = load_inputs(run)
    backend, recorder = open_backend(run, settings, inputs)
    technique = Technique(run.technique)
    embedder = build_embedder(settings, EmbedderKind(run.embedder)) if run.metric == Metric.COSINE.value else None
    jobs = []
    for model, specs in inputs:
        graph = build_graph(model)
        max_len = run.max_len if run.max_len is not None else default_max_len(graph)
        paths = enumerate_simple_paths(graph, max_len, settings.path_cap)
        for spec in specs:
            _, ranked = rank_spec(model, paths, spec, Metric(run.metric), run.k, embedder)
            jobs += [(bundle, spec.id, rank) for rank, bundle in craft_bundles(model, spec, ranked, technique)]
    out = args.out or str(Path(run.output_dir) / "completions.jsonl")
    with audit_stage(logger, "generate", prompts=len(jobs), backend=backend.kind.value):
        generate_many(jobs, config_from_settings(settings), backend, settings.max_in_flight, RunLog(out))
    if recorder is not None and run.record_to:
        recorder.save(run.record_to)
    logger.info("wrote %d completions to %s", len(jobs), out)
    return 0


def _read_constraint(value: str) -> str:
    if not value.startswith("@"):
        return value
    try:
        return Path(value[1:]).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read constraint file: {exc.strerror or exc}", location=value[1:]) from exc


def _cmd_validate(args: argparse.Namespace, settings: Settings, values: dict[str, Any]) -> int:
    model = load_model(_single_model(values))
    if args.completions:
        rows = [
            {"spec_id": completion.spec_id, "rank": completion.rank, **validate(completion.text, model).to_json()}
            for completion in load_run_log(args.completions)
        ]
        _emit(_jsonl(rows), args.out)
        return 0
    if args.constraint is None:
        raise UsageError("pass --constraint or --completions")
    verdict = validate(_read_constraint(args.constraint), model)
    _emit(json.dumps(verdict.to_json()) + "\n", args.out)
    return 0


def _cmd_evaluate(args: argparse.Namespace, settings: Settings, values: dict[str, Any]) -> int:
    report = run_pipeline(_run_config(values), settings)
    _emit(render_report(report), args.out)
    return 0


def _cmd_cost(args: argparse.Namespace, settings: Settings, values: dict[str, Any]) -> int:
    summary = cost_report(load_run_log(args.completions))
    _emit(json.dumps(summary.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", args.out)
    return 0


def _cmd_replay_compile(args: argparse.Namespace, settings: Settings, values: dict[str, Any]) -> int:
    model = load_model(_single_model(values))
    store = compile_replay_seed(model, _specs(args, values), load_seed(args.seed))
    _emit(store.to_json(), args.out)
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "extract": _cmd_extract,
    "paths": _cmd_paths,
    "rank": _cmd_rank,
    "prompt": _cmd_prompt,
    "generate": _cmd_generate,
    "validate": _cmd_validate,
    "evaluate": _cmd_evaluate,
    "cost": _cmd_cost,
    "replay-compile": _cmd_replay_compile,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns 0, or the exit code of the error that stopped it."""

    try:
        args = build_parser().parse_args(argv)
        settings, values = _configure(args)
        return _COMMANDS[args.command](args, settings, values)
    except PathOclError as exc:
        print(f"pathocl: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
