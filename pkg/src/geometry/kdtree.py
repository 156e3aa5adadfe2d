from __future__ import annotations

from typing import List, Tuple

import numpy as np
from scipy.spatial import cKDTree

from src.errors import ContractViolation
from src.geometry.points import PointsLike, as_points, distances

# relative slack under which the k-th distance counts as tied with the look-ahead candidate
_TIE_SLACK = 1e-12


class KdTree2:
    """Immutable 2-D tree over BEV points.

    Neighbor lists are sorted by (distance, original index), so ties resolve the
    same way whatever order the underlying tree visits them in.
    """

    def __init__(self, points: PointsLike):
        self.points = as_points(points).copy()
        self.points.setflags(write=False)
        self._tree = cKDTree(self.points) if len(self.points) else None

    def __len__(self) -> int:
        return len(self.points)

    def knn(self, query_index: int, k: int) -> List[Tuple[int, float]]:
        n = len(self)
        if isinstance(query_index, bool) or not 0 <= int(query_index) < n:
            raise ContractViolation(f"query index {query_index} out of range for {n} points")
        _check_k(k)
        row = np.array([int(query_index)], dtype=np.int64)
        idx, dist = self._select(self.points[row], row, min(k, n - 1))
        return [(int(i), float(d)) for i, d in zip(idx[0], dist[0])]

    def knn_all(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """Neighbors of every point: (N, min(k, N-1)) index and distance arrays, self excluded."""
        _check_k(k)
        n = len(self)
        kk = max(min(k, n - 1), 0)
        if kk == 0:
            return np.empty((n, 0), dtype=np.int64), np.empty((n, 0), dtype=np.float64)
        rows = np.arange(n, dtype=np.int64)
        return self._select(self.points, rows, kk)

    def query(self, point: PointsLike, k: int) -> List[Tuple[int, float]]:
        _check_k(k)
        xy = as_points(np.reshape(np.asarray(point, dtype=np.float64), (1, 2)))
        kk = min(k, len(self))
        if kk == 0:
            return []
        idx, dist = self._select(xy, np.array([-1], dtype=np.int64), kk)
        return [(int(i), float(d)) for i, d in zip(idx[0], dist[0])]

    def _select(self, query_xy: np.ndarray, exclude: np.ndarray, kk: int) -> Tuple[np.ndarray, np.ndarray]:
        n = len(self)
        # one extra slot for the excluded point, one as look-ahead for tie detection
        m = min(kk + 2, n)
        _, cand = self._tree.query(query_xy, k=m)
        cand = np.asarray(cand, dtype=np.int64).reshape(len(query_xy), m)

        idx, dist, furthest = _order(self.points, query_xy, exclude, cand, kk)
        if m == n:
            return idx, dist

        kth = dist[:, kk - 1]
        unsafe = np.flatnonzero(kth >= furthest - _TIE_SLACK * np.maximum(furthest, 1.0))
        for r in unsafe:
            radius = kth[r] * (1.0 + 1e-9) + 1e-12
            ball = np.asarray(self._tree.query_ball_point(query_xy[r], radius), dtype=np.int64)
            b_idx, b_dist, _ = _order(self.points, query_xy[r : r + 1], exclude[r : r + 1], ball[None, :], kk)
            idx[r], dist[r] = b_idx[0], b_dist[0]
        return idx, dist


def _order(
    points: np.ndarray, query_xy: np.ndarray, exclude: np.ndarray, cand: np.ndarray, kk: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = distances(points[cand], query_xy[:, None, :])
    d = np.where(cand == exclude[:, None], np.inf, d)
    order = np.lexsort((cand, d), axis=-1)
    cand = np.take_along_axis(cand, order, axis=1)
    d = np.take_along_axis(d, order, axis=1)
    furthest = np.where(np.isfinite(d), d, -np.inf).max(axis=1)
    return cand[:, :kk].copy(), d[:, :kk].copy(), furthest


def _check_k(k: int) -> None:
    if isinstance(k, bool) or int(k) < 1:
        raise ContractViolation(f"k must be >= 1, got {k}")


def build_kdtree(points: PointsLike) -> KdTree2:
    return KdTree2(points)


def knn(tree: KdTree2, query_index: int, k: int) -> List[Tuple[int, float]]:
    return tree.knn(query_index, k)
