"""Joining validation results with human verdicts, and the evaluation report."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError

from common.errors import DataError
from common.models import Correctness, ErrorCategory, SizeCategory, Technique
from common.schemas import CheckVerdict, Completion, CorrectnessVerdict, SpecInput
from services.llm.costs import CostSummary, cost_report
from services.prompt.builder import TEMPLATE_VERSION

from .metrics import (
    McNemarResult,
    Measure,
    PromptSample,
    RankVerdict,
    ScoreMode,
    SpecRecord,
    error_breakdown,
    mcnemar,
    paired_outcomes,
    score_correctness_at_k,
    score_validity_at_k,
    size_scaling,
)

DEFAULT_KS = (1, 3, 5, 10)


class ValidationRecord(BaseModel):
    """One line of ``validation.jsonl``: a generated constraint and its verdict."""

    spec_id: str
    model_name: str
    rank: int = Field(..., ge=1)
    technique: Technique
    text: str
    verdict: CheckVerdict


def load_verdicts(path: str | Path) -> list[CorrectnessVerdict]:
    """Read human correctness judgments; one (spec_id, rank) may appear only once."""

    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read verdict file: {exc.strerror or exc}", location=str(path)) from exc
    verdicts: list[CorrectnessVerdict] = []
    seen: set[tuple[str, int]] = set()
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            verdict = CorrectnessVerdict.model_validate_json(line)
        except ValidationError as exc:
            raise DataError(str(exc.errors()[0]["msg"]), location=f"{path}:{number}") from exc
        key = (verdict.spec_id, verdict.rank)
        if key in seen:
            raise DataError(f"duplicate verdict for {verdict.spec_id!r} rank {verdict.rank}", location=f"{path}:{number}")
        seen.add(key)
        verdicts.append(verdict)
    return verdicts


def dump_verdicts(verdicts: Iterable[CorrectnessVerdict]) -> str:
    return "".join(json.dumps(verdict.model_dump(mode="json")) + "\n" for verdict in verdicts)


def load_validation_log(path: str | Path) -> list[ValidationRecord]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read validation log: {exc.strerror or exc}", location=str(path)) from exc
    records: list[ValidationRecord] = []
    for number, line in enumerate(lines, start=1):
        if line.strip():
            try:
                records.append(ValidationRecord.model_validate_json(line))
            except ValidationError as exc:
                raise DataError(str(exc.errors()[0]["msg"]), location=f"{path}:{number}") from exc
    return records


def dump_validation_log(records: Iterable[ValidationRecord]) -> str:
    return "".join(json.dumps(record.model_dump(mode="json"), ensure_ascii=False) + "\n" for record in records)


def build_spec_records(
    specs: Sequence[tuple[str, SpecInput]],
    validations: Sequence[ValidationRecord],
    correctness: Iterable[CorrectnessVerdict] = (),
) -> list[SpecRecord]:
    """One record per (model name, spec); verdicts sorted by rank.

    A ``correct`` judgment on an invalid constraint is rejected.
    """

    judged = {(verdict.spec_id, verdict.rank): verdict.verdict for verdict in correctness}
    by_spec: dict[str, list[ValidationRecord]] = {}
    for validation in validations:
        by_spec.setdefault(validation.spec_id, []).append(validation)

    records: list[SpecRecord] = []
    for model_name, spec in specs:
        ranked = sorted(by_spec.get(spec.id, []), key=lambda item: item.rank)
        verdicts = []
        for validation in ranked:
            judgment = judged.get((spec.id, validation.rank), Correctness.UNJUDGED)
            if judgment is Correctness.CORRECT and not validation.verdict.valid:
                raise DataError(
                    f"{spec.id!r} rank {validation.rank} is judged correct but its constraint is invalid",
                    location=model_name,
                )
            verdicts.append(RankVerdict(rank=validation.rank, verdict=validation.verdict, correctness=judgment))
        technique = ranked[0].technique if ranked else Technique.PATHOCL
        records.append(
            SpecRecord(id=spec.id, model_name=model_name, text=spec.text, technique=technique, verdicts=tuple(verdicts))
        )
    return records


def records_from_validation_log(
    validations: Sequence[ValidationRecord], correctness: Iterable[CorrectnessVerdict] = ()
) -> list[SpecRecord]:
    """Rebuild records from a previous run's log alone (texts are not needed for scoring)."""

    specs: dict[str, tuple[str, SpecInput]] = {}
    for validation in validations:
        specs.setdefault(validation.spec_id, (validation.model_name, SpecInput(id=validation.spec_id, text="")))
    return build_spec_records(list(specs.values()), validations, correctness)


class Comparison(BaseModel):
    baseline_technique: Technique
    k: int
    validity: McNemarResult
    correctness: McNemarResult


class EvalReport(BaseModel):
    template_version: str = TEMPLATE_VERSION
    technique: Technique
    metric: Optional[str] = None
    specs: int
    constraints: int
    validity_at_k: dict[int, float]
    correctness_at_k: dict[int, float]
    validity_per_constraint_at_k: dict[int, float]
    correctness_per_constraint_at_k: dict[int, float]
    error_breakdown: dict[ErrorCategory, float]
    cost_summary: CostSummary
    size_scaling: dict[SizeCategory, dict[Technique, float]]
    comparison: Optional[Comparison] = None

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def build_report(
    records: Sequence[SpecRecord],
    completions: Sequence[Completion],
    samples: Sequence[PromptSample],
    ks: Sequence[int] = DEFAULT_KS,
    technique: Technique = Technique.PATHOCL,
    metric: Optional[str] = None,
    baseline: Optional[Sequence[SpecRecord]] = None,
    strict: bool = False,
) -> EvalReport:
    ks = sorted(set(ks))
    comparison = None
    if baseline is not None:
        k = ks[-1]
        comparison = Comparison(
            baseline_technique=baseline[0].technique if baseline else Technique.UML_AUGMENTATION,
            k=k,
            validity=mcnemar(paired_outcomes(records, baseline, k, Measure.VALIDITY)),
            correctness=mcnemar(paired_outcomes(records, baseline, k, Measure.CORRECTNESS)),
        )
    return EvalReport(
        technique=technique,
        metric=metric,
        specs=len(records),
        constraints=sum(len(record.verdicts) for record in records),
        validity_at_k={k: score_validity_at_k(records, k) for k in ks},
        correctness_at_k={k: score_correctness_at_k(records, k, strict=strict) for k in ks},
        validity_per_constraint_at_k={k: score_validity_at_k(records, k, ScoreMode.CONSTRAINT) for k in ks},
        correctness_per_constraint_at_k={k: score_correctness_at_k(records, k, ScoreMode.CONSTRAINT, strict) for k in ks},
        error_breakdown=error_breakdown(records),
        cost_summary=cost_report(completions),
        size_scaling=size_scaling(samples),
        comparison=comparison,
    )


def render_report(report: EvalReport) -> str:
    """Plain-text tables for the terminal."""

    label = report.technique.value + (f" ({report.metric})" if report.metric else "")
    lines = [
        f"PathOCL evaluation | {label} | {report.specs} specs, {report.constraints} constraints",
        f"templates: {report.template_version}",
        "",
        f"{'k':>4} {'Validity@k':>12} {'Correctness@k':>15} {'valid/constr.':>15} {'correct/constr.':>17}",
    ]
    for k in sorted(report.validity_at_k):
        lines.append(
            f"{k:>4} {report.validity_at_k[k]:>11.1f}% {report.correctness_at_k[k]:>14.1f}% "
            f"{report.validity_per_constraint_at_k[k]:>14.1f}% {report.correctness_per_constraint_at_k[k]:>16.1f}%"
        )

    lines += ["", "Syntax errors among invalid constraints:"]
    if report.error_breakdown:
        for category, share in report.error_breakdown.items():
            lines.append(f"  {category.value:<24} {share:>6.1f}%")
    else:
        lines.append("  none")

    costs = report.cost_summary
    lines += [
        "",
        f"Cost: ${costs.total_cost_usd:.4f} over {costs.count} completions, "
        f"mean prompt {costs.mean_input_tokens:.1f} tokens",
    ]
    for k, cost in costs.cumulative_by_k.items():
        lines.append(f"  top-{k:<3} cumulative ${cost:.4f}")

    lines += ["", "Mean prompt tokens by model size:"]
    for size, cells in report.size_scaling.items():
        row = ", ".join(f"{technique.value} {tokens:.1f}" for technique, tokens in cells.items())
        lines.append(f"  {size.value:<7} {row}")

    if report.comparison is not None:
        comparison = report.comparison
        lines += ["", f"McNemar vs {comparison.baseline_technique.value} at k={comparison.k}:"]
        for name, result in (("validity", comparison.validity), ("correctness", comparison.correctness)):
            lines.append(f"  {name:<12} chi2={result.chi_squared:.2f} p={result.p_value:.4f} table={list(map(list, result.table))}")
    return "\n".join(lines) + "\n"
