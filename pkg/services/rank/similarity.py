"""Path property sets, set similarity metrics and top-k ranking."""
from __future__ import annotations

from dataclasses import dataclass
from typing import AbstractSet, Iterable, Optional, Sequence

import numpy as np

from common.errors import DataError, UsageError
from common.logging_setup import get_stage_logger
from common.models import Metric
from common.schemas import RankedPath, SimplePath, UmlModel
from services.model.loader import class_of, navigations_of
from services.nlp.preprocess import normalize_name
from services.pathgen.graph import path_sort_key

from .embedders import Embedder, HashingEmbedder, PrecomputedEmbedder

logger = get_stage_logger("rank")

# tie-breaks compare scores rounded to this many digits
_SCORE_DIGITS = 12


@dataclass(frozen=True)
class PathPropertySet:
    path: SimplePath
    properties: frozenset[str]


def property_set(model: UmlModel, path: SimplePath) -> PathPropertySet:
    """Class names, attributes and operations of every path class, plus the
    target-end roles of each hop, all normalized."""

    if not path:
        raise DataError("a simple path has at least one class")
    names: set[str] = set()
    for class_name in path:
        uml_class = class_of(model, class_name)
        if uml_class is None:
            raise DataError(f"unknown class {class_name!r} in path {list(path)}", location=model.name)
        names.add(class_name)
        names.update(attribute.name for attribute in uml_class.attributes)
        names.update(operation.name for operation in uml_class.operations)
    for source, target in zip(path, path[1:]):
        roles = [navigation.role for navigation in navigations_of(model, source) if navigation.target == target]
        if not roles:
            raise DataError(f"no navigable association from {source!r} to {target!r}", location=model.name)
        names.update(roles)
    return PathPropertySet(path=tuple(path), properties=frozenset(normalize_name(name) for name in names))


def jaccard(elements: AbstractSet[str], properties: AbstractSet[str]) -> float:
    union = elements | properties
    if not union:
        return 0.0
    return len(elements & properties) / len(union)


def _row_normalize(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return matrix / norms


def cosine_score(elements: AbstractSet[str], properties: AbstractSet[str], embedder: Embedder) -> float:
    """Mean cosine similarity over every (element, property) pair."""

    if not elements or not properties:
        logger.warning("cosine score over an empty set is 0 (|E|=%d, |P|=%d)", len(elements), len(properties))
        return 0.0
    left = _row_normalize(np.asarray(embedder.embed_many(sorted(elements)), dtype=np.float64))
    right = _row_normalize(np.asarray(embedder.embed_many(sorted(properties)), dtype=np.float64))
    similarities = np.clip(left @ right.T, -1.0, 1.0)
    return float(similarities.mean())


def score_path(
    property_set_: PathPropertySet,
    elements: AbstractSet[str],
    metric: Metric,
    embedder: Optional[Embedder] = None,
) -> float:
    if metric is Metric.JACCARD:
        raw = jaccard(elements, property_set_.properties)
    else:
        raw = cosine_score(elements, property_set_.properties, embedder or HashingEmbedder())
    return round(raw, _SCORE_DIGITS)


def rank_paths(
    model: UmlModel,
    paths: Iterable[SimplePath],
    elements: AbstractSet[str],
    metric: Metric,
    k: int,
    embedder: Optional[Embedder] = None,
) -> list[RankedPath]:
    """Score every path and return the top ``k``; ties fall back to path order."""

    if k < 1:
        raise UsageError(f"k must be at least 1, got {k}")
    candidates = [property_set(model, path) for path in dict.fromkeys(tuple(path) for path in paths)]
    if not candidates:
        raise DataError("no paths to rank", location=model.name)

    if metric is Metric.COSINE:
        embedder = _warm(embedder or HashingEmbedder(), elements, candidates)

    scored = [(score_path(candidate, elements, metric, embedder), candidate.path) for candidate in candidates]
    scored.sort(key=lambda item: (-item[0], path_sort_key(item[1])))
    return [
        RankedPath(path=path, score=score, metric=metric, rank=rank)
        for rank, (score, path) in enumerate(scored[:k], start=1)
    ]


def _warm(embedder: Embedder, elements: AbstractSet[str], candidates: Sequence[PathPropertySet]) -> Embedder:
    """Embed every distinct term once for the whole ranking pass."""

    terms = sorted(set(elements).union(*(candidate.properties for candidate in candidates)))
    if not terms:
        return embedder
    vectors = embedder.embed_many(terms)
    return PrecomputedEmbedder(embedder.name, dict(zip(terms, vectors)))
