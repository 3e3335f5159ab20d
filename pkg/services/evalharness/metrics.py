"""Validity/Correctness@K, McNemar's test, syntax-error breakdown and prompt-size scaling."""
from __future__ import annotations

import math
from collections import defaultdict
from enum import Enum
from typing import Iterable, Optional, Sequence

from pydantic import BaseModel, Field, model_validator
from scipy.special import erfc

from common.errors import DataError, UsageError
from common.logging_setup import get_stage_logger
from common.models import Correctness, ErrorCategory, SizeCategory, Technique
from common.schemas import CheckVerdict

logger = get_stage_logger("evalharness")


class ScoreMode(str, Enum):
    SPEC = "spec"
    CONSTRAINT = "constraint"


class Measure(str, Enum):
    VALIDITY = "validity"
    CORRECTNESS = "correctness"


class RankVerdict(BaseModel):
    rank: int = Field(..., ge=1)
    verdict: CheckVerdict
    correctness: Correctness = Correctness.UNJUDGED

    @model_validator(mode="after")
    def _correct_implies_valid(self) -> "RankVerdict":
        if self.correctness is Correctness.CORRECT and not self.verdict.valid:
            raise ValueError(f"rank {self.rank} is judged correct but the constraint is invalid")
        return self


class SpecRecord(BaseModel):
    id: str
    model_name: str
    text: str = ""
    technique: Technique = Technique.PATHOCL
    verdicts: tuple[RankVerdict, ...] = ()

    def up_to(self, k: int) -> list[RankVerdict]:
        return [verdict for verdict in self.verdicts if verdict.rank <= k]


class PairedOutcome(BaseModel):
    spec_id: str
    technique_a: bool
    technique_b: bool


class McNemarResult(BaseModel):
    chi_squared: float
    p_value: float
    table: tuple[tuple[int, int], tuple[int, int]] = Field(
        ..., description="rows: A succeeds / fails; columns: B succeeds / fails"
    )


class PromptSample(BaseModel):
    model_name: str
    size: SizeCategory
    technique: Technique
    approx_tokens: int


def _check_k(k: int) -> None:
    if k < 1:
        raise UsageError(f"k must be at least 1, got {k}")


def _require_verdicts(records: Sequence[SpecRecord]) -> None:
    for record in records:
        if not record.verdicts:
            raise DataError(f"specification {record.id!r} has no generated constraint", location=record.model_name)


def _percentage(hits: int, total: int) -> float:
    return 100.0 * hits / total if total else 0.0


def _is_correct(verdict: RankVerdict, strict: bool, spec_id: str) -> bool:
    if verdict.correctness is Correctness.UNJUDGED:
        if strict:
            raise DataError(f"rank {verdict.rank} of {spec_id!r} has no correctness verdict")
        if verdict.verdict.valid:
            logger.warning("rank %d of %r is unjudged; counted as incorrect", verdict.rank, spec_id)
        return False
    return verdict.correctness is Correctness.CORRECT


def score_validity_at_k(records: Sequence[SpecRecord], k: int, mode: ScoreMode = ScoreMode.SPEC) -> float:
    """Percentage of specifications with any valid constraint in ranks 1..k.

    In constraint mode the ratio is taken over every constraint ranked k or better instead.
    """

    _check_k(k)
    _require_verdicts(records)
    if mode is ScoreMode.CONSTRAINT:
        pool = [verdict for record in records for verdict in record.up_to(k)]
        return _percentage(sum(verdict.verdict.valid for verdict in pool), len(pool))
    hits = sum(any(verdict.verdict.valid for verdict in record.up_to(k)) for record in records)
    return _percentage(hits, len(records))


def score_correctness_at_k(
    records: Sequence[SpecRecord], k: int, mode: ScoreMode = ScoreMode.SPEC, strict: bool = False
) -> float:
    """Like :func:`score_validity_at_k`, counting human-judged correct constraints.

    Unjudged valid constraints count as incorrect with a warning, or abort when ``strict``.
    """

    _check_k(k)
    _require_verdicts(records)
    if mode is ScoreMode.CONSTRAINT:
        pool = [(record.id, verdict) for record in records for verdict in record.up_to(k)]
        return _percentage(sum(_is_correct(verdict, strict, spec_id) for spec_id, verdict in pool), len(pool))
    hits = 0
    for record in records:
        # evaluate every rank so strict mode sees each unjudged verdict
        flags = [_is_correct(verdict, strict, record.id) for verdict in record.up_to(k)]
        hits += any(flags)
    return _percentage(hits, len(records))


def chi2_pvalue(chi_squared: float) -> float:
    """Upper tail of the chi-squared distribution with one degree of freedom."""

    return float(erfc(math.sqrt(max(chi_squared, 0.0) / 2.0)))


def mcnemar(outcomes: Iterable[PairedOutcome]) -> McNemarResult:
    both = a_only = b_only = neither = 0
    for outcome in outcomes:
        if outcome.technique_a and outcome.technique_b:
            both += 1
        elif outcome.technique_a:
            a_only += 1
        elif outcome.technique_b:
            b_only += 1
        else:
            neither += 1
    discordant = a_only + b_only
    chi_squared = (a_only - b_only) ** 2 / discordant if discordant else 0.0
    return McNemarResult(
        chi_squared=chi_squared,
        p_value=chi2_pvalue(chi_squared) if discordant else 1.0,
        table=((both, a_only), (b_only, neither)),
    )


def _succeeds(record: SpecRecord, k: int, measure: Measure) -> bool:
    if measure is Measure.VALIDITY:
        return any(verdict.verdict.valid for verdict in record.up_to(k))
    return any(_is_correct(verdict, False, record.id) for verdict in record.up_to(k))


def paired_outcomes(
    records_a: Sequence[SpecRecord], records_b: Sequence[SpecRecord], k: int, measure: Measure
) -> list[PairedOutcome]:
    """Pair per-specification success of two techniques; only specifications present in both count."""

    _check_k(k)
    by_id_b = {record.id: record for record in records_b}
    shared = [record for record in records_a if record.id in by_id_b]
    dropped = len(records_a) + len(records_b) - 2 * len(shared)
    if dropped:
        logger.warning("%d specification(s) appear in only one run and are left out of the pairing", dropped)
    return [
        PairedOutcome(
            spec_id=record.id,
            technique_a=_succeeds(record, k, measure),
            technique_b=_succeeds(by_id_b[record.id], k, measure),
        )
        for record in sorted(shared, key=lambda item: item.id)
    ]


def error_breakdown(records: Sequence[SpecRecord], k: Optional[int] = None) -> dict[ErrorCategory, float]:
    """Share of each error category among invalid constraints; empty when none is invalid."""

    counts: dict[ErrorCategory, int] = defaultdict(int)
    for record in records:
        for verdict in record.up_to(k) if k is not None else record.verdicts:
            if not verdict.verdict.valid:
                counts[verdict.verdict.error.category] += 1
    total = sum(counts.values())
    if not total:
        return {}
    return {category: _percentage(counts[category], total) for category in ErrorCategory}


def size_scaling(samples: Iterable[PromptSample]) -> dict[SizeCategory, dict[Technique, float]]:
    """Mean prompt tokens per (model size category, technique); unpopulated cells are omitted."""

    grouped: dict[SizeCategory, dict[Technique, list[int]]] = defaultdict(lambda: defaultdict(list))
    for sample in samples:
        grouped[sample.size][sample.technique].append(sample.approx_tokens)
    return {
        size: {technique: sum(tokens) / len(tokens) for technique, tokens in sorted(cells.items())}
        for size, cells in sorted(grouped.items(), key=lambda item: list(SizeCategory).index(item[0]))
    }
