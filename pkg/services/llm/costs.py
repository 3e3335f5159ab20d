"""Inference cost accounting over a run's completions (input tokens only)."""
from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable

from pydantic import BaseModel, Field

from common.schemas import Completion


class RankCost(BaseModel):
    count: int = 0
    cost_usd: float = 0.0
    mean_input_tokens: float = 0.0


class CostSummary(BaseModel):
    total_cost_usd: float = 0.0
    count: int = 0
    mean_input_tokens: float = 0.0
    per_rank: dict[int, RankCost] = Field(default_factory=dict)
    cumulative_by_k: dict[int, float] = Field(
        default_factory=dict, description="Cost of every completion ranked k or better"
    )


def cost_report(completions: Iterable[Completion]) -> CostSummary:
    completions = list(completions)
    if not completions:
        return CostSummary()

    by_rank: dict[int, list[Completion]] = defaultdict(list)
    for completion in completions:
        # whole-model baseline prompts carry no rank; they count as rank 1
        by_rank[completion.rank or 1].append(completion)

    per_rank = {
        rank: RankCost(
            count=len(members),
            cost_usd=math.fsum(member.cost_usd for member in members),
            mean_input_tokens=sum(member.input_tokens for member in members) / len(members),
        )
        for rank, members in sorted(by_rank.items())
    }
    cumulative: dict[int, float] = {}
    running: list[float] = []
    for rank, members in sorted(by_rank.items()):
        running.extend(member.cost_usd for member in members)
        cumulative[rank] = math.fsum(running)

    return CostSummary(
        total_cost_usd=math.fsum(completion.cost_usd for completion in completions),
        count=len(completions),
        mean_input_tokens=sum(completion.input_tokens for completion in completions) / len(completions),
        per_rank=per_rank,
        cumulative_by_k=cumulative,
    )
