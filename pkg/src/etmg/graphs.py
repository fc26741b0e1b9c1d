"""Directed graph container and node-edge incidence matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GraphError(ValueError):
    """Raised for malformed or disconnected graphs."""


@dataclass(frozen=True)
class DirectedGraph:
    """Graph with integer node ids ``0..node_count-1`` and ordered edges.

    Edge ``j`` is the tuple ``(source, sink)``. Parallel edges are allowed,
    self-loops are not. Connectivity (ignoring orientation) is checked on
    construction unless ``check_connected=False``.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    check_connected: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        edges = tuple((int(s), int(t)) for s, t in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.node_count < 1:
            raise GraphError("graph needs at least one node")
        for j, (s, t) in enumerate(edges):
            if not (0 <= s < self.node_count and 0 <= t < self.node_count):
                raise GraphError(f"edge {j} ({s}->{t}) references a node outside [0, {self.node_count})")
            if s == t:
                raise GraphError(f"edge {j} is a self-loop at node {s}")
        if self.check_connected:
            components = self.components()
            if len(components) > 1:
                isolated = components[1:]
                raise GraphError(f"graph is disconnected; components not reachable from node 0: {isolated}")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def components(self) -> list[list[int]]:
        """Connected components (orientation ignored), the one holding node 0 first."""
        parent = list(range(self.node_count))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for s, t in self.edges:
            rs, rt = find(s), find(t)
            if rs != rt:
                parent[max(rs, rt)] = min(rs, rt)
        groups: dict[int, list[int]] = {}
        for i in range(self.node_count):
            groups.setdefault(find(i), []).append(i)
        return sorted(groups.values(), key=lambda g: g[0])

    def in_out_edges(self, node: int) -> tuple[list[int], list[int]]:
        """Return ``(incoming, outgoing)`` edge ids of ``node``."""
        if not 0 <= node < self.node_count:
            raise GraphError(f"node {node} out of range [0, {self.node_count})")
        incoming = [j for j, (_, t) in enumerate(self.edges) if t == node]
        outgoing = [j for j, (s, _) in enumerate(self.edges) if s == node]
        return incoming, outgoing


def build_incidence(graph: DirectedGraph) -> np.ndarray:
    """Node-edge incidence matrix: +1 where the node is the sink, -1 where it is the source."""
    F = np.zeros((graph.node_count, graph.edge_count))
    for j, (s, t) in enumerate(graph.edges):
        F[s, j] = -1.0
        F[t, j] = 1.0
    return F


def split_incidence(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split an incidence matrix into its nonnegative sink and source parts."""
    F = np.asarray(F, dtype=float)
    absF = np.abs(F)
    return 0.5 * (F + absF), 0.5 * (absF - F)


def in_out_edge_sets(graph: DirectedGraph, node: int) -> tuple[list[int], list[int]]:
    return graph.in_out_edges(node)
