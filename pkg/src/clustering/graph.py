from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from src.errors import ContractViolation
from src.geometry.kdtree import build_kdtree
from src.geometry.points import PointsLike, as_points

# Evaluated on arrays of node indices (u, v); returns the admissible distance per pair.
ThresholdFn = Callable[[np.ndarray, np.ndarray], Union[float, np.ndarray]]


@dataclass(frozen=True)
class AdjacencyGraph:
    node_count: int
    edges: np.ndarray  # (E, 2) int64, u < v, sorted, unique

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def constant_threshold(t: float) -> ThresholdFn:
    if not t >= 0:
        raise ContractViolation(f"threshold must be non-negative, got {t}")
    return lambda u, v: t


def directed_knn_edges(points: PointsLike, k: int, threshold_fn: ThresholdFn):
    """Directed kNN half-edges (u -> v) that survive the threshold, before symmetrization."""
    pts = as_points(points)
    n = len(pts)
    if n < 2:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty

    tree = build_kdtree(pts)
    nbr, dist = tree.knn_all(k)
    u = np.repeat(np.arange(n, dtype=np.int64), nbr.shape[1])
    v = nbr.ravel()
    limit = np.broadcast_to(np.asarray(threshold_fn(u, v), dtype=np.float64), u.shape)
    if (limit < 0).any():
        raise ContractViolation("threshold_fn returned a negative distance")
    keep = dist.ravel() <= limit
    return u[keep], v[keep]


def build_threshold_graph(points: PointsLike, k: int, threshold_fn: ThresholdFn) -> AdjacencyGraph:
    pts = as_points(points)
    n = len(pts)
    u, v = directed_knn_edges(pts, k, threshold_fn)
    if len(u) == 0:
        return AdjacencyGraph(node_count=n, edges=np.empty((0, 2), dtype=np.int64))

    # undirected storage adds the missing half-edges and merges the duplicated ones
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    keys = np.unique(lo * n + hi)
    edges = np.stack([keys // n, keys % n], axis=1)
    return AdjacencyGraph(node_count=n, edges=edges)
