from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.clustering.components import clusterize
from src.clustering.graph import ThresholdFn
from src.clustering.splitting import SplitParams, split_cluster
from src.config_loader import ClassConfig
from src.errors import ContractViolation, InvalidInputError
from src.geometry.points import bev_range

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PointCloud:
    xyz: np.ndarray
    semantic: np.ndarray

    def __post_init__(self) -> None:
        xyz = np.asarray(self.xyz, dtype=np.float64)
        if xyz.size == 0:
            xyz = xyz.reshape(0, 3)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise InvalidInputError(f"expected (N, 3) coordinates, got shape {xyz.shape}")
        finite = np.isfinite(xyz).all(axis=1)
        if not finite.all():
            raise InvalidInputError(f"non-finite coordinate at point {int(np.flatnonzero(~finite)[0])}")
        semantic = np.asarray(self.semantic, dtype=np.int64).reshape(-1)
        if len(semantic) != len(xyz):
            raise ContractViolation(f"{len(xyz)} points but {len(semantic)} semantic labels")
        if (semantic < 0).any():
            raise InvalidInputError("semantic class IDs must be non-negative")
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "semantic", semantic)

    def __len__(self) -> int:
        return len(self.xyz)

    @property
    def bev(self) -> np.ndarray:
        return self.xyz[:, :2]


@dataclass(frozen=True)
class InstanceLabeling:
    semantic: np.ndarray
    instance: np.ndarray

    def __post_init__(self) -> None:
        semantic = np.asarray(self.semantic, dtype=np.int64).reshape(-1)
        instance = np.asarray(self.instance, dtype=np.int64).reshape(-1)
        if len(semantic) != len(instance):
            raise ContractViolation(f"{len(semantic)} semantic labels but {len(instance)} instance labels")
        object.__setattr__(self, "semantic", semantic)
        object.__setattr__(self, "instance", instance)

    def __len__(self) -> int:
        return len(self.semantic)

    @property
    def instance_count(self) -> int:
        return int(self.instance.max(initial=0))


def project_bev(cloud: PointCloud, class_id: int, config: Optional[ClassConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(x, y) of the points labeled ``class_id`` and their indices into the cloud, in cloud order."""
    if config is not None:
        config.require_class(class_id)
    indices = np.flatnonzero(cloud.semantic == class_id)
    return cloud.xyz[indices, :2].copy(), indices


def edge_threshold(config: ClassConfig, class_id: int, range_u, range_v):
    t_c = config.threshold(class_id)
    if config.threshold_mode == "constant":
        return t_c
    return config.range_coefficient * t_c * np.maximum(range_u, range_v)


def class_threshold_fn(config: ClassConfig, class_id: int, points: np.ndarray) -> ThresholdFn:
    if config.threshold_mode == "constant":
        t_c = config.threshold(class_id)
        return lambda u, v: t_c
    ranges = bev_range(points)
    return lambda u, v: edge_threshold(config, class_id, ranges[u], ranges[v])


def cluster_class(cloud: PointCloud, class_id: int, config: ClassConfig) -> np.ndarray:
    config.require_thing(class_id)
    points, _ = project_bev(cloud, class_id)
    if len(points) == 0:
        return np.empty(0, dtype=np.int64)
    comps = clusterize(points, config.k, class_threshold_fn(config, class_id, points))
    logger.debug("class %s: %d points -> %d components", config.name_of(class_id), len(points), comps.component_count)
    return comps.labels


def _split_components(points: np.ndarray, labels: np.ndarray, params: SplitParams, t: float) -> List[np.ndarray]:
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    parts: List[np.ndarray] = []
    for members in np.split(order, bounds):
        for sub in split_cluster(points[members], params, t):
            parts.append(members[sub])
    parts.sort(key=lambda part: int(part[0]))
    return parts


def cluster_scan(cloud: PointCloud, config: ClassConfig, enable_split: bool = True) -> InstanceLabeling:
    instance = np.zeros(len(cloud), dtype=np.int64)
    next_id = 1
    present = set(np.unique(cloud.semantic).tolist())

    for class_id in config.thing_ids:
        if class_id not in present:
            continue
        points, indices = project_bev(cloud, class_id)
        labels = cluster_class(cloud, class_id, config)
        count = int(labels.max()) + 1

        if not enable_split:
            instance[indices] = labels + next_id
            next_id += count
            continue

        parts = _split_components(points, labels, SplitParams.for_class(config, class_id), config.threshold(class_id))
        if len(parts) != count:
            logger.debug("class %s: box splitting %d -> %d clusters", config.name_of(class_id), count, len(parts))
        for part in parts:
            instance[indices[part]] = next_id
            next_id += 1

    unknown = present - set(config.class_ids) - set(config.ignore_labels)
    if unknown:
        logger.warning("semantic IDs %s are not in the class table and get no instances", sorted(unknown))
    return InstanceLabeling(semantic=cloud.semantic.copy(), instance=instance)


def intersect_instances(semantic: np.ndarray, agnostic: np.ndarray, config: ClassConfig) -> InstanceLabeling:
    """Panoptic labels from a class-agnostic instance mask: each (thing class, mask ID) pair is one instance."""
    semantic = np.asarray(semantic, dtype=np.int64).reshape(-1)
    agnostic = np.asarray(agnostic, dtype=np.int64).reshape(-1)
    if len(semantic) != len(agnostic):
        raise ContractViolation(f"{len(semantic)} semantic labels but {len(agnostic)} instance labels")

    instance = np.zeros(len(semantic), dtype=np.int64)
    things = np.flatnonzero(np.isin(semantic, config.thing_ids))
    if len(things):
        keys = np.stack([semantic[things], agnostic[things]], axis=1)
        uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        # class-major numbering, first appearance inside each class
        rank = np.lexsort((first, uniq[:, 0]))
        new_id = np.empty(len(uniq), dtype=np.int64)
        new_id[rank] = np.arange(1, len(uniq) + 1)
        instance[things] = new_id[inverse]
    return InstanceLabeling(semantic=semantic.copy(), instance=instance)
