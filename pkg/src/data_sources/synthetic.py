"""Seeded synthetic scenes: class-labeled object footprints on a ring-pattern ground."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.clustering.pipeline import InstanceLabeling, PointCloud
from src.config_loader import ClassConfig
from src.errors import ContractViolation
from src.geometry.box_fitting import OrientedBox2D, canonical_box
from src.geometry.points import rotation

logger = logging.getLogger(__name__)

GROUND_Z = -1.7
RING_COUNT = 64
PLACEMENT_TRIES = 500

# object counts for the first eight thing classes of a driving scene, most common first
BENCH_OBJECT_COUNTS = (25, 4, 2, 2, 2, 8, 3, 1)
BENCH_POINTS = 120_000


@dataclass(frozen=True)
class SceneParams:
    objects_per_class: Mapping[int, int]
    stuff_points: int = 2000
    min_range: float = 4.0
    max_range: float = 45.0
    spacing: float = 0.12
    reference_range: float = 10.0
    falloff: bool = True
    size_range: Tuple[float, float] = (0.6, 0.95)
    clearance: float = 0.5
    height: float = 1.5

    def __post_init__(self) -> None:
        if any(n < 0 for n in self.objects_per_class.values()):
            raise ContractViolation("object counts must be >= 0")
        if self.stuff_points < 0:
            raise ContractViolation(f"stuff_points must be >= 0, got {self.stuff_points}")
        if not 0 < self.min_range < self.max_range:
            raise ContractViolation(f"need 0 < min_range < max_range, got {self.min_range}, {self.max_range}")
        if not self.spacing > 0:
            raise ContractViolation(f"spacing must be > 0, got {self.spacing}")
        lo, hi = self.size_range
        if not 0 < lo <= hi:
            raise ContractViolation(f"bad size range {self.size_range}")
        if self.clearance < 0:
            raise ContractViolation(f"clearance must be >= 0, got {self.clearance}")


@dataclass
class SyntheticScene:
    cloud: PointCloud
    gt: InstanceLabeling
    boxes: List[OrientedBox2D] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.cloud)


def spacing_at(params: SceneParams, distance: float, threshold: float) -> float:
    """Point spacing of an object at ``distance``; grows with range when falloff is on."""
    spacing = params.spacing
    if params.falloff:
        spacing *= max(1.0, distance / params.reference_range)
    # keeps each footprint connected under its class threshold
    return min(spacing, 0.25 * threshold)


def footprint_points(
    rng: np.random.Generator, center: np.ndarray, length: float, width: float, yaw: float, spacing: float, height: float
) -> np.ndarray:
    """Jittered grid over a length x width rectangle; every point stays inside it."""
    nx = max(1, math.ceil(length / spacing))
    ny = max(1, math.ceil(width / spacing))
    cell = np.array([length / nx, width / ny])
    gx, gy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    local = (np.stack([gx.ravel(), gy.ravel()], axis=1) + 0.5) * cell - [length / 2, width / 2]
    local += rng.uniform(-0.1, 0.1, size=local.shape) * cell
    xy = local @ rotation(yaw).T + center
    z = rng.uniform(GROUND_Z, GROUND_Z + height, size=(len(xy), 1))
    return np.hstack([xy, z])


def ring_ground(rng: np.random.Generator, n: int, min_range: float, max_range: float) -> Tuple[np.ndarray, np.ndarray]:
    """``n`` points on concentric rings with equal counts, so density drops with range.

    Returns the points and the ring index of each.
    """
    if n == 0:
        return np.empty((0, 3)), np.empty(0, dtype=np.int64)
    radii = np.geomspace(min_range, max_range, RING_COUNT)
    chunks = np.array_split(np.arange(n), RING_COUNT)
    ring = np.concatenate([np.full(len(c), j) for j, c in enumerate(chunks)])
    per_ring = np.array([len(c) for c in chunks])[ring]
    offset = np.concatenate([np.arange(len(c)) for c in chunks])
    angle = 2 * np.pi * (offset + rng.uniform(0, 1, size=n)) / np.maximum(per_ring, 1)
    r = radii[ring] * (1 + rng.normal(0, 0.002, size=n))
    return np.stack([r * np.cos(angle), r * np.sin(angle), np.full(n, GROUND_Z)], axis=1), ring


def _place(
    rng: np.random.Generator, params: SceneParams, radius: float, gap: float, placed: List[Tuple[np.ndarray, float, float]]
) -> np.ndarray:
    for _ in range(PLACEMENT_TRIES):
        r = rng.uniform(params.min_range + radius, params.max_range - radius)
        phi = rng.uniform(0, 2 * np.pi)
        center = np.array([r * np.cos(phi), r * np.sin(phi)])
        if all(np.hypot(*(center - c)) > radius + rc + max(gap, gc) + params.clearance for c, rc, gc in placed):
            placed.append((center, radius, gap))
            return center
    raise ContractViolation(f"could not place an object of radius {radius:.2f} m; lower the object counts")


def generate_scene(config: ClassConfig, params: SceneParams, seed: int | np.random.Generator = 0) -> SyntheticScene:
    """Objects are fully separable: any two are farther apart than both class thresholds.

    Points are emitted class by class, object by object, so ground-truth IDs are
    class-major in first-appearance order. Stuff points follow.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    xyz: List[np.ndarray] = []
    semantic: List[np.ndarray] = []
    instance: List[np.ndarray] = []
    boxes: List[OrientedBox2D] = []
    placed: List[Tuple[np.ndarray, float, float]] = []
    next_id = 1

    for class_id in sorted(params.objects_per_class):
        ref_length, ref_width = config.reference_box(class_id)
        t_c = config.threshold(class_id)
        for _ in range(params.objects_per_class[class_id]):
            scale = rng.uniform(*params.size_range)
            length, width = ref_length * scale, ref_width * scale
            yaw = rng.uniform(0, np.pi)
            center = _place(rng, params, 0.5 * math.hypot(length, width), t_c, placed)
            pts = footprint_points(rng, center, length, width, yaw, spacing_at(params, float(np.hypot(*center)), t_c), params.height)
            xyz.append(pts)
            semantic.append(np.full(len(pts), class_id, dtype=np.int64))
            instance.append(np.full(len(pts), next_id, dtype=np.int64))
            boxes.append(canonical_box(center[0], center[1], length / 2, width / 2, yaw))
            next_id += 1

    ground, rings = ring_ground(rng, params.stuff_points, params.min_range, params.max_range)
    if len(ground):
        stuff = config.stuff_ids or list(config.ignore_labels[:1])
        xyz.append(ground)
        semantic.append(np.asarray(stuff, dtype=np.int64)[rings % len(stuff)])
        instance.append(np.zeros(len(ground), dtype=np.int64))

    if not xyz:
        empty = np.empty(0, dtype=np.int64)
        return SyntheticScene(PointCloud(np.empty((0, 3)), empty), InstanceLabeling(empty, empty), boxes)

    sem = np.concatenate(semantic)
    cloud = PointCloud(np.vstack(xyz), sem)
    logger.debug("synthetic scene: %d points, %d objects", len(cloud), len(boxes))
    return SyntheticScene(cloud, InstanceLabeling(sem, np.concatenate(instance)), boxes)


def separable_scene(
    config: ClassConfig, seed: int | np.random.Generator = 0, objects: int = 3, classes: Optional[Sequence[int]] = None, **kwargs
) -> SyntheticScene:
    class_ids = list(classes) if classes is not None else config.thing_ids
    return generate_scene(config, SceneParams(objects_per_class={c: objects for c in class_ids}, **kwargs), seed)


def merged_objects(
    rng: np.random.Generator,
    reference_box: Tuple[float, float],
    gaps: Sequence[float],
    spacing: float = 0.1,
    size_range: Tuple[float, float] = (0.6, 0.95),
) -> Tuple[np.ndarray, np.ndarray]:
    """BEV points of len(gaps)+1 blobs laid side by side with the given lateral gaps.

    Returns (points, object index per point). Each blob fits inside the reference box.
    """
    length, width = sorted(reference_box, reverse=True)
    pts: List[np.ndarray] = []
    owner: List[np.ndarray] = []
    y = 0.0
    for i in range(len(gaps) + 1):
        scale = rng.uniform(*size_range)
        blob_l, blob_w = length * scale, width * scale
        blob = footprint_points(rng, np.array([0.0, y + blob_w / 2]), blob_l, blob_w, 0.0, spacing, 1.0)[:, :2]
        pts.append(blob)
        owner.append(np.full(len(blob), i, dtype=np.int64))
        if i < len(gaps):
            y += blob_w + gaps[i]
    yaw = rng.uniform(0, np.pi)
    return np.vstack(pts) @ rotation(yaw).T, np.concatenate(owner)


def two_car_scene(
    config: ClassConfig, gap: float = 0.5, class_id: Optional[int] = None, seed: int = 0, side_by_side: bool = False
) -> SyntheticScene:
    """Two reference-sized cars parked ``gap`` meters apart, bumper to bumper unless ``side_by_side``."""
    if not gap > 0:
        raise ContractViolation(f"gap must be > 0, got {gap}")
    class_id = config.thing_ids[0] if class_id is None else class_id
    length, width = config.reference_box(class_id)
    rng = np.random.default_rng(seed)
    # sparse enough that the k nearest neighbors of edge points reach across the gap
    spacing = min(gap / 2, 0.25 * config.threshold(class_id))

    step = np.array([0.0, width + gap]) if side_by_side else np.array([length + gap, 0.0])
    centers = [np.array([10.0, 0.0]) + i * step for i in range(2)]
    xyz = [footprint_points(rng, c, length, width, 0.0, spacing, 1.5) for c in centers]
    n = len(xyz[0]) + len(xyz[1])
    instance = np.concatenate([np.full(len(xyz[0]), 1), np.full(len(xyz[1]), 2)]).astype(np.int64)
    semantic = np.full(n, class_id, dtype=np.int64)
    boxes = [canonical_box(c[0], c[1], length / 2, width / 2, 0.0) for c in centers]
    return SyntheticScene(PointCloud(np.vstack(xyz), semantic), InstanceLabeling(semantic, instance), boxes)


def bench_scene(config: ClassConfig, seed: int = 0, points: int = BENCH_POINTS) -> SyntheticScene:
    """``points``-point scene with up to eight thing classes in driving-scene proportions."""
    things = config.thing_ids[: len(BENCH_OBJECT_COUNTS)]
    counts: Dict[int, int] = dict(zip(things, BENCH_OBJECT_COUNTS))
    objects_only = generate_scene(config, SceneParams(objects_per_class=counts, stuff_points=0, max_range=60.0), seed)
    if len(objects_only) > points:
        raise ContractViolation(f"objects alone take {len(objects_only)} points, more than the requested {points}")
    # same seed replays the same objects, then the ground fills up to the requested point count
    params = SceneParams(objects_per_class=counts, stuff_points=points - len(objects_only), max_range=60.0)
    return generate_scene(config, params, seed)
