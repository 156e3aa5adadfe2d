from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.clustering.components import clusterize
from src.clustering.graph import constant_threshold
from src.config_loader import ClassConfig
from src.errors import ContractViolation
from src.geometry.box_fitting import fit_min_area_box
from src.geometry.points import PointsLike, as_points

logger = logging.getLogger(__name__)

FIT_TOL = 1e-9


@dataclass(frozen=True)
class SplitParams:
    reference_box: Tuple[float, float]
    margin: float = 0.30
    epsilon: float = 1e-3
    k: int = 32
    max_depth: int = 64

    def __post_init__(self) -> None:
        length, width = sorted((float(s) for s in self.reference_box), reverse=True)
        if not width > 0:
            raise ContractViolation(f"reference box sides must be positive, got {self.reference_box}")
        if self.margin < 0:
            raise ContractViolation(f"margin must be >= 0, got {self.margin}")
        if not self.epsilon > 0:
            raise ContractViolation(f"epsilon must be > 0, got {self.epsilon}")
        object.__setattr__(self, "reference_box", (length, width))

    @classmethod
    def for_class(cls, config: ClassConfig, class_id: int) -> "SplitParams":
        return cls(reference_box=config.reference_box(class_id), margin=config.margin, epsilon=config.epsilon, k=config.k)

    @property
    def limits(self) -> Tuple[float, float]:
        length, width = self.reference_box
        return length * (1.0 + self.margin), width * (1.0 + self.margin)


def fits_in_reference(points: PointsLike, params: SplitParams) -> bool:
    pts = as_points(points)
    if len(pts) == 0:
        raise ContractViolation("fit test on an empty cluster")

    max_length, max_width = params.limits
    # any enclosing box has both sides below the AABB diagonal
    span = pts.max(axis=0) - pts.min(axis=0)
    if math.hypot(span[0], span[1]) <= max_width + FIT_TOL:
        return True

    length, width = fit_min_area_box(pts).sides
    return length <= max_length + FIT_TOL and width <= max_width + FIT_TOL


def split_cluster(points: PointsLike, params: SplitParams, t: float) -> List[np.ndarray]:
    """Split a cluster until every part fits the margin-enlarged reference box.

    Returns sorted index arrays into ``points`` that partition it, ordered by
    their smallest index.
    """
    pts = as_points(points)
    if len(pts) == 0:
        raise ContractViolation("cannot split an empty cluster")
    if not t > 0:
        raise ContractViolation(f"split threshold must be positive, got {t}")

    parts = _split(pts, np.arange(len(pts), dtype=np.int64), params, float(t), depth=0)
    parts.sort(key=lambda part: int(part[0]))
    return parts


def _split(points: np.ndarray, index: np.ndarray, params: SplitParams, t: float, depth: int) -> List[np.ndarray]:
    sub = points[index]
    if fits_in_reference(sub, params):
        return [index]
    if depth >= params.max_depth:
        logger.debug("split depth limit reached with %d points left unsplit", len(index))
        return [index]

    t = t / 2.0
    dt = t
    while True:
        dt = dt / 2.0
        comps = clusterize(sub, params.k, constant_threshold(t))
        count = comps.component_count
        if count == 2:
            break
        if dt < params.epsilon:
            if count == 1:
                logger.debug("unsplittable cluster of %d points at t=%.6f (epsilon floor)", len(index), t)
                return [index]
            logger.debug("epsilon floor reached with %d components at t=%.6f", count, t)
            break
        if count == 1:
            t -= dt
        else:
            t += dt

    out: List[np.ndarray] = []
    for c in range(count):
        out.extend(_split(points, index[comps.labels == c], params, t, depth + 1))
    return out
