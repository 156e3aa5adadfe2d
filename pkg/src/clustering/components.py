from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.clustering.graph import AdjacencyGraph, ThresholdFn, build_threshold_graph
from src.geometry.points import PointsLike


@dataclass(frozen=True)
class ComponentLabeling:
    labels: np.ndarray
    component_count: int

    def members(self, component: int) -> np.ndarray:
        return np.flatnonzero(self.labels == component)


class DisjointSet:
    # roots are always the smallest index of their set
    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.parent)

    def union_edges(self, u: np.ndarray, v: np.ndarray) -> None:
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        while len(u):
            self.compress()
            ru, rv = self.parent[u], self.parent[v]
            pending = ru != rv
            if not pending.any():
                return
            u, v, ru, rv = u[pending], v[pending], ru[pending], rv[pending]
            np.minimum.at(self.parent, np.maximum(ru, rv), np.minimum(ru, rv))

    def compress(self) -> None:
        parent = self.parent
        while True:
            grand = parent[parent]
            if np.array_equal(grand, parent):
                break
            parent = grand
        self.parent = parent

    def find_all(self) -> np.ndarray:
        self.compress()
        return self.parent


def connected_components(graph: AdjacencyGraph) -> ComponentLabeling:
    ds = DisjointSet(graph.node_count)
    if graph.edge_count:
        ds.union_edges(graph.edges[:, 0], graph.edges[:, 1])
    roots = ds.find_all()
    # roots are component minima, so sorting them gives first-appearance order
    _, labels = np.unique(roots, return_inverse=True)
    labels = labels.astype(np.int64).reshape(-1)
    count = int(labels.max()) + 1 if len(labels) else 0
    return ComponentLabeling(labels=labels, component_count=count)


def clusterize(points: PointsLike, k: int, threshold_fn: ThresholdFn) -> ComponentLabeling:
    return connected_components(build_threshold_graph(points, k, threshold_fn))
