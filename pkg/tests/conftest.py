from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pytest

from src.clustering.pipeline import InstanceLabeling
from src.config_loader import ClassConfig, ClassSpec, load_class_config

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "data"

CAR, PERSON, TRUCK, ROAD, BUILDING = 1, 2, 3, 4, 5


@pytest.fixture(autouse=True)
def _src_logs_reach_caplog():
    # the CLI detaches the package logger from the root logger
    logger = logging.getLogger("src")
    saved = logger.propagate
    logger.propagate = True
    yield
    logger.propagate = saved


@pytest.fixture(scope="session")
def kitti_config() -> ClassConfig:
    return load_class_config(DATA_DIR / "semantickitti.yaml")


@pytest.fixture(scope="session")
def nuscenes_config() -> ClassConfig:
    return load_class_config(DATA_DIR / "nuscenes.yaml")


@pytest.fixture(scope="session")
def small_config() -> ClassConfig:
    """Three thing classes and two stuff classes, no label remapping, min_points 1."""
    return ClassConfig(
        classes={
            CAR: ClassSpec(CAR, "car", "thing", 4.4, 1.8),
            PERSON: ClassSpec(PERSON, "person", "thing", 0.8, 0.8),
            TRUCK: ClassSpec(TRUCK, "truck", "thing", 10.0, 3.0),
            ROAD: ClassSpec(ROAD, "road", "stuff"),
            BUILDING: ClassSpec(BUILDING, "building", "stuff"),
        },
        dataset="small",
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def labeling(semantic, instance) -> InstanceLabeling:
    return InstanceLabeling(np.asarray(semantic), np.asarray(instance))


def grid_blob(origin, length, width, spacing) -> np.ndarray:
    """Regular BEV grid filling length x width from ``origin``."""
    xs = np.arange(0.0, length + 1e-9, spacing)
    ys = np.arange(0.0, width + 1e-9, spacing)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1) + np.asarray(origin, dtype=np.float64)


def same_partition(a: np.ndarray, b: np.ndarray) -> bool:
    """Two labelings describe the same partition, whatever the label values."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return False
    pairs = np.unique(np.stack([a, b], axis=1), axis=0)
    return len(pairs) == len(np.unique(a)) == len(np.unique(b))
