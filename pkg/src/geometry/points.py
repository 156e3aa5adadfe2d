from __future__ import annotations

from typing import NamedTuple, Sequence, Union

import numpy as np

from src.errors import InvalidInputError


class Point2(NamedTuple):
    x: float
    y: float


PointsLike = Union[np.ndarray, Sequence[Point2], Sequence[Sequence[float]]]


def as_points(points: PointsLike) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInputError(f"expected an (N, 2) array of BEV points, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        bad = int(np.flatnonzero(~np.isfinite(arr).all(axis=1))[0])
        raise InvalidInputError(f"non-finite coordinate at point {bad}")
    return arr


def bev_range(points: np.ndarray) -> np.ndarray:
    return np.hypot(points[:, 0], points[:, 1])


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a - b
    return np.sqrt((diff * diff).sum(axis=-1))
