"""End-to-end run: elements, paths, ranking, prompts, generation, validation, report."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Sequence

from common.config import RunConfig, Settings, get_settings
from common.errors import DataError
from common.logging_setup import audit_stage, get_stage_logger
from common.models import EmbedderKind, Metric, Technique
from common.schemas import PromptBundle, RankedPath, SimplePath, SpecInput, UmlModel
from services.llm.client import Backend, LiveBackend, ReplayBackend, RunLog, config_from_settings, generate_many
from services.llm.replay import ReplayStore, compile_replay_seed, load_seed
from services.model.loader import load_model, size_category
from services.nlp.preprocess import UmlElementSet, extract_uml_elements, load_specs, preprocess
from services.oclcheck.checker import validate
from services.pathgen.graph import build_graph, default_max_len, dump_paths, enumerate_simple_paths
from services.prompt.builder import craft_augmentation_prompt, craft_prompt, prompt_record
from services.rank.embedders import Embedder, build_embedder
from services.rank.similarity import rank_paths

from .metrics import PromptSample
from .report import (
    DEFAULT_KS,
    EvalReport,
    ValidationRecord,
    build_report,
    build_spec_records,
    dump_validation_log,
    dump_verdicts,
    load_validation_log,
    load_verdicts,
    records_from_validation_log,
    render_report,
)

logger = get_stage_logger("evalharness")


def _jsonl(rows: Sequence[dict]) -> str:
    return "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows)


def ks_up_to(k: int) -> list[int]:
    return sorted({value for value in DEFAULT_KS if value <= k} | {k})


def load_inputs(run: RunConfig) -> list[tuple[UmlModel, list[SpecInput]]]:
    """Load every (model, specs) pair; specification ids must be unique across the run."""

    inputs = []
    seen: dict[str, str] = {}
    for model_file, specs_file in zip(run.model_files, run.specs_files):
        model = load_model(model_file)
        specs = load_specs(specs_file)
        for spec in specs:
            if spec.id in seen:
                raise DataError(f"specification id {spec.id!r} also appears in {seen[spec.id]}", location=specs_file)
            seen[spec.id] = specs_file
        inputs.append((model, specs))
    return inputs


def open_backend(
    run: RunConfig, settings: Settings, inputs: Sequence[tuple[UmlModel, list[SpecInput]]]
) -> tuple[Backend, Optional[ReplayStore]]:
    """Return the generation backend and, in record mode, the store it records into."""

    if run.backend == "live":
        recorder = ReplayStore() if run.record_to else None
        return LiveBackend(settings, recorder=recorder), recorder

    fixture = run.replay_fixture or (None if run.replay_seed else settings.replay_fixture_path)
    if fixture:
        return ReplayBackend(ReplayStore.load(fixture)), None
    seed = load_seed(run.replay_seed)
    merged = ReplayStore()
    for model, specs in inputs:
        ids = {spec.id for spec in specs}
        merged.update(compile_replay_seed(model, specs, [line for line in seed if line.spec_id in ids]))
    return ReplayBackend(merged), None


def rank_spec(
    model: UmlModel,
    paths: Sequence[SimplePath],
    spec: SpecInput,
    metric: Metric,
    k: int,
    embedder: Optional[Embedder] = None,
) -> tuple[UmlElementSet, list[RankedPath]]:
    elements = extract_uml_elements(preprocess(spec.text))
    return elements, rank_paths(model, paths, elements, metric, k, embedder)


def craft_bundles(
    model: UmlModel, spec: SpecInput, ranked: Sequence[RankedPath], technique: Technique
) -> list[tuple[int, PromptBundle]]:
    if technique is Technique.UML_AUGMENTATION:
        return [(1, craft_augmentation_prompt(model, spec.text))]
    return [(ranked_path.rank, craft_prompt(model, ranked_path.path, spec.text)) for ranked_path in ranked]


def run_pipeline(run: RunConfig, settings: Optional[Settings] = None) -> EvalReport:
    """Run every stage and write its artifact under ``run.output_dir``.

    Artifacts are byte-identical across runs with the replay backend and the bundled embedder.
    """

    settings = settings or get_settings()
    out = Path(run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metric = Metric(run.metric)
    technique = Technique(run.technique)
    cfg = config_from_settings(settings)

    with audit_stage(logger, "load", models=len(run.model_files)):
        inputs = load_inputs(run)
    backend, recorder = open_backend(run, settings, inputs)
    embedder = build_embedder(settings, EmbedderKind(run.embedder)) if metric is Metric.COSINE else None

    element_rows: list[dict] = []
    ranking_rows: list[dict] = []
    prompt_rows: list[dict] = []
    samples: list[PromptSample] = []
    jobs: list[tuple[PromptBundle, str, int]] = []
    owner: dict[str, tuple[UmlModel, SpecInput]] = {}

    for model, specs in inputs:
        size = size_category(model)
        with audit_stage(logger, "paths", model=model.name):
            graph = build_graph(model)
            max_len = run.max_len if run.max_len is not None else default_max_len(graph)
            paths = enumerate_simple_paths(graph, max_len, settings.path_cap)
        (out / f"paths.{model.name}.jsonl").write_text(dump_paths(paths), encoding="utf-8")

        with audit_stage(logger, "rank", model=model.name, specs=len(specs)):
            for spec in specs:
                owner[spec.id] = (model, spec)
                elements, ranked = rank_spec(model, paths, spec, metric, run.k, embedder)
                element_rows.append({"spec_id": spec.id, "elements": sorted(elements)})
                ranking_rows += [
                    {"spec_id": spec.id, "rank": item.rank, "path": list(item.path), "score": item.score, "metric": metric.value}
                    for item in ranked
                ]
                for rank, bundle in craft_bundles(model, spec, ranked, technique):
                    jobs.append((bundle, spec.id, rank))
                    prompt_rows.append(prompt_record(spec.id, rank, bundle))
                # every spec is sized under both techniques, whichever one generates
                top1 = craft_prompt(model, ranked[0].path, spec.text)
                whole = craft_augmentation_prompt(model, spec.text)
                samples += [
                    PromptSample(model_name=model.name, size=size, technique=Technique.PATHOCL, approx_tokens=top1.approx_tokens),
                    PromptSample(
                        model_name=model.name,
                        size=size,
                        technique=Technique.UML_AUGMENTATION,
                        approx_tokens=whole.approx_tokens,
                    ),
                ]

    (out / "elements.jsonl").write_text(_jsonl(element_rows), encoding="utf-8")
    (out / "rankings.jsonl").write_text(_jsonl(ranking_rows), encoding="utf-8")
    (out / "prompts.jsonl").write_text(_jsonl(prompt_rows), encoding="utf-8")

    with audit_stage(logger, "generate", prompts=len(jobs), backend=backend.kind.value):
        completions = generate_many(jobs, cfg, backend, settings.max_in_flight, RunLog(out / "completions.jsonl"))
    if recorder is not None and run.record_to:
        recorder.save(run.record_to)

    with audit_stage(logger, "validate", constraints=len(completions)):
        validations = [
            ValidationRecord(
                spec_id=completion.spec_id,
                model_name=owner[completion.spec_id][0].name,
                rank=completion.rank,
                technique=completion.technique,
                text=completion.text,
                verdict=validate(completion.text, owner[completion.spec_id][0]),
            )
            for completion in completions
        ]
    (out / "validation.jsonl").write_text(dump_validation_log(validations), encoding="utf-8")

    correctness = load_verdicts(run.verdicts) if run.verdicts else []
    (out / "correctness.jsonl").write_text(dump_verdicts(correctness), encoding="utf-8")
    spec_pairs = [(model.name, spec) for model, specs in inputs for spec in specs]
    records = build_spec_records(spec_pairs, validations, correctness)

    baseline = None
    if run.baseline_run:
        baseline_dir = Path(run.baseline_run)
        baseline_verdicts = baseline_dir / "correctness.jsonl"
        baseline = records_from_validation_log(
            load_validation_log(baseline_dir / "validation.jsonl"),
            load_verdicts(baseline_verdicts) if baseline_verdicts.exists() else [],
        )

    with audit_stage(logger, "evaluate", specs=len(records)):
        report = build_report(
            records,
            completions,
            samples,
            ks=ks_up_to(run.k) if technique is Technique.PATHOCL else [1],
            technique=technique,
            metric=metric.value if technique is Technique.PATHOCL else None,
            baseline=baseline,
            strict=run.strict_verdicts,
        )
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(render_report(report), encoding="utf-8")
    return report
