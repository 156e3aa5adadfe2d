from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.errors import ContractViolation
from src.geometry.hull import POINT, SEGMENT, convex_hull
from src.geometry.points import Point2, PointsLike, as_points, rotation


@dataclass(frozen=True)
class OrientedBox2D:
    center: Point2
    half_length: float
    half_width: float
    yaw: float

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    @property
    def width(self) -> float:
        return 2.0 * self.half_width

    @property
    def area(self) -> float:
        return self.length * self.width

    @property
    def sides(self) -> Tuple[float, float]:
        return self.length, self.width

    def corners(self) -> np.ndarray:
        local = np.array(
            [
                [self.half_length, self.half_width],
                [-self.half_length, self.half_width],
                [-self.half_length, -self.half_width],
                [self.half_length, -self.half_width],
            ]
        )
        return local @ rotation(self.yaw).T + np.asarray(self.center)

    def contains(self, points: PointsLike, tol: float = 1e-9) -> np.ndarray:
        pts = as_points(points)
        local = (pts - np.asarray(self.center)) @ rotation(self.yaw)
        return (np.abs(local[:, 0]) <= self.half_length + tol) & (np.abs(local[:, 1]) <= self.half_width + tol)


def canonical_box(cx: float, cy: float, half_x: float, half_y: float, theta: float) -> OrientedBox2D:
    """Build a box with half_length >= half_width and yaw folded into [0, pi)."""
    if half_y > half_x:
        half_x, half_y = half_y, half_x
        theta += math.pi / 2
    yaw = math.fmod(theta, math.pi)
    if yaw < 0:
        yaw += math.pi
    if yaw >= math.pi:
        yaw = 0.0
    return OrientedBox2D(center=Point2(float(cx), float(cy)), half_length=float(half_x), half_width=float(half_y), yaw=yaw)


def fit_min_area_box(points: PointsLike) -> OrientedBox2D:
    pts = as_points(points)
    if len(pts) == 0:
        raise ContractViolation("cannot fit a box to an empty point set")

    hull = convex_hull(pts)
    if hull.kind == POINT:
        x, y = hull.vertices[0]
        return canonical_box(x, y, 0.0, 0.0, 0.0)
    if hull.kind == SEGMENT:
        a, b = hull.vertices
        mid = (a + b) / 2.0
        return canonical_box(mid[0], mid[1], float(np.hypot(*(b - a))) / 2.0, 0.0, math.atan2(b[1] - a[1], b[0] - a[0]))

    verts = hull.vertices
    edge = np.roll(verts, -1, axis=0) - verts
    thetas = np.arctan2(edge[:, 1], edge[:, 0])

    # rotate by -theta so each hull edge lies along x; the AABB of the hull bounds the cloud
    c, s = np.cos(thetas), np.sin(thetas)
    rx = c[:, None] * verts[None, :, 0] + s[:, None] * verts[None, :, 1]
    ry = -s[:, None] * verts[None, :, 0] + c[:, None] * verts[None, :, 1]
    x_min, x_max = rx.min(axis=1), rx.max(axis=1)
    y_min, y_max = ry.min(axis=1), ry.max(axis=1)
    areas = (x_max - x_min) * (y_max - y_min)

    i = int(np.argmin(areas))
    local_center = np.array([(x_min[i] + x_max[i]) / 2.0, (y_min[i] + y_max[i]) / 2.0])
    center = rotation(float(thetas[i])) @ local_center
    return canonical_box(
        center[0],
        center[1],
        (x_max[i] - x_min[i]) / 2.0,
        (y_max[i] - y_min[i]) / 2.0,
        float(thetas[i]),
    )
