"""Directed UML graph construction and simple-path enumeration."""
from __future__ import annotations

import json
from typing import Iterable, Optional

import networkx as nx

from common.errors import DataError
from common.logging_setup import get_stage_logger
from common.schemas import SimplePath, UmlModel

logger = get_stage_logger("pathgen")

UNBOUNDED_NODE_LIMIT = 8
BOUNDED_DEFAULT_MAX_LEN = 5


class UmlGraph:
    """Class-level navigation graph over a networkx digraph."""

    def __init__(self, digraph: nx.DiGraph) -> None:
        self._graph = digraph

    @property
    def digraph(self) -> nx.DiGraph:
        return self._graph

    def __len__(self) -> int:
        return self._graph.number_of_nodes()


def build_graph(model: UmlModel) -> UmlGraph:
    """One node per class; an edge a->b for every navigable end on b's side."""

    digraph = nx.DiGraph()
    digraph.add_nodes_from(model.class_names())
    for association in model.associations:
        for index, end in enumerate(association.ends):
            if end.navigable:
                digraph.add_edge(association.ends[1 - index].class_name, end.class_name)
    return UmlGraph(digraph)


def path_sort_key(path: SimplePath) -> tuple[int, str]:
    return len(path), ",".join(path)


def default_max_len(graph: UmlGraph) -> Optional[int]:
    """None (unbounded) for small graphs, a fixed bound otherwise."""

    return None if len(graph) <= UNBOUNDED_NODE_LIMIT else BOUNDED_DEFAULT_MAX_LEN


def enumerate_simple_paths(
    graph: UmlGraph,
    max_len: Optional[int] = None,
    cap: int = 100_000,
) -> list[SimplePath]:
    """Every simple path of 2..max_len classes plus every singleton, sorted.

    ``max_len`` counts classes; None means unbounded.
    """
    if len(graph) == 0:
        raise DataError("cannot enumerate paths of an empty graph")
    if max_len is not None and max_len < 1:
        raise DataError(f"max path length must be positive, got {max_len}")

    digraph = graph.digraph
    cutoff = None if max_len is None else max_len - 1
    found: set[SimplePath] = {(node,) for node in digraph.nodes}
    if cutoff != 0:
        nodes = sorted(digraph.nodes)
        for source in nodes:
            for target in nodes:
                if source == target:
                    continue
                for path in nx.all_simple_paths(digraph, source, target, cutoff=cutoff):
                    found.add(tuple(path))
                    if len(found) > cap:
                        raise DataError(
                            f"simple-path count exceeds the cap of {cap}; lower --max-len or raise path_cap"
                        )
    paths = sorted(found, key=path_sort_key)
    logger.info("enumerated %d simple paths over %d classes (max_len=%s)", len(paths), len(graph), max_len)
    return paths


def dump_paths(paths: Iterable[SimplePath]) -> str:
    return "".join(json.dumps({"path": list(path)}) + "\n" for path in paths)
