from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.errors import ContractViolation
from src.geometry.points import PointsLike, as_points

CROSS_EPS = 1e-12

POINT = "point"
SEGMENT = "segment"
POLYGON = "polygon"


@dataclass(frozen=True)
class ConvexHull2:
    vertices: np.ndarray
    indices: np.ndarray
    kind: str

    @property
    def degenerate(self) -> bool:
        return self.kind != POLYGON

    @property
    def edges(self) -> np.ndarray:
        h = len(self.vertices)
        if self.kind == POINT:
            return np.empty((0, 2), dtype=np.int64)
        if self.kind == SEGMENT:
            return np.array([[0, 1]], dtype=np.int64)
        start = np.arange(h, dtype=np.int64)
        return np.stack([start, (start + 1) % h], axis=1)

    def contains(self, points: PointsLike, tol: float = 1e-9) -> np.ndarray:
        pts = as_points(points)
        if self.kind == POINT:
            return np.hypot(*(pts - self.vertices[0]).T) <= tol
        if self.kind == SEGMENT:
            return _segment_distance(pts, self.vertices[0], self.vertices[1]) <= tol

        a = self.vertices
        b = np.roll(a, -1, axis=0)
        edge = b - a
        rel = pts[:, None, :] - a[None, :, :]
        signed = (edge[None, :, 0] * rel[..., 1] - edge[None, :, 1] * rel[..., 0]) / np.hypot(edge[:, 0], edge[:, 1])
        return (signed >= -tol).all(axis=1)


def convex_hull(points: PointsLike) -> ConvexHull2:
    """Monotone-chain hull, counter-clockwise, collinear boundary points dropped."""
    pts = as_points(points)
    if len(pts) == 0:
        raise ContractViolation("convex hull of an empty point set")

    # coincident BEV points (vertical stacks) collapse before the chain walk
    uniq, first = np.unique(pts, axis=0, return_index=True)
    if len(uniq) == 1:
        return ConvexHull2(vertices=uniq.copy(), indices=first.astype(np.int64), kind=POINT)

    coords = [(float(x), float(y)) for x, y in uniq]
    lower = _half_chain(coords, range(len(coords)))
    upper = _half_chain(coords, range(len(coords) - 1, -1, -1))
    chain = lower[:-1] + upper[:-1]

    if len(chain) < 3:
        ends = np.array([0, len(uniq) - 1])
        return ConvexHull2(vertices=uniq[ends].copy(), indices=first[ends].astype(np.int64), kind=SEGMENT)

    order = np.asarray(chain, dtype=np.int64)
    return ConvexHull2(vertices=uniq[order].copy(), indices=first[order].astype(np.int64), kind=POLYGON)


def _half_chain(coords, order) -> list:
    chain: list = []
    for i in order:
        px, py = coords[i]
        while len(chain) >= 2:
            ox, oy = coords[chain[-2]]
            ax, ay = coords[chain[-1]]
            if (ax - ox) * (py - oy) - (ay - oy) * (px - ox) > CROSS_EPS:
                break
            chain.pop()
        chain.append(i)
    return chain


def _segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0) if denom > 0 else np.zeros(len(pts))
    closest = a + t[:, None] * ab
    return np.hypot(*(pts - closest).T)
