from __future__ import annotations

import time

import numpy as np
import pytest

from src.clustering.pipeline import PointCloud, cluster_scan
from src.data_sources.synthetic import (
    BENCH_POINTS,
    SceneParams,
    bench_scene,
    generate_scene,
    separable_scene,
    spacing_at,
    two_car_scene,
)
from src.errors import ContractViolation
from src.evaluation.matching import iou_per_class
from src.evaluation.oracle_modes import instance_oracle, semantic_oracle
from src.evaluation.panoptic import panoptic_quality
from src.geometry.kdtree import build_kdtree


def test_same_seed_same_scene(kitti_config):
    a = separable_scene(kitti_config, seed=4, objects=2)
    b = separable_scene(kitti_config, seed=4, objects=2)
    assert np.array_equal(a.cloud.xyz, b.cloud.xyz)
    assert np.array_equal(a.gt.instance, b.gt.instance)
    c = separable_scene(kitti_config, seed=5, objects=2)
    assert not np.array_equal(a.cloud.xyz[:10], c.cloud.xyz[:10])


def test_two_car_ground_truth(kitti_config):
    scene = two_car_scene(kitti_config, gap=0.5)
    assert np.unique(scene.gt.instance).tolist() == [1, 2]
    assert len(scene.boxes) == 2
    with pytest.raises(ContractViolation):
        two_car_scene(kitti_config, gap=0.0)


def test_gt_ids_are_class_major(kitti_config):
    scene = separable_scene(kitti_config, seed=1, objects=2)
    things = scene.gt.instance > 0
    first = [scene.gt.instance[scene.gt.semantic == c].min() for c in kitti_config.thing_ids]
    assert first == sorted(first)
    assert scene.gt.instance_count == 2 * len(kitti_config.thing_ids)
    assert (scene.gt.instance[~things] == 0).all()


def test_objects_stay_inside_their_boxes(kitti_config):
    scene = separable_scene(kitti_config, seed=2, objects=2)
    for i, box in enumerate(scene.boxes, start=1):
        assert box.contains(scene.cloud.bev[scene.gt.instance == i]).all()


def test_spacing_grows_with_range():
    params = SceneParams(objects_per_class={})
    assert spacing_at(params, 30.0, 1.8) > spacing_at(params, 5.0, 1.8) == params.spacing
    assert spacing_at(params, 400.0, 1.8) == pytest.approx(0.45)
    flat = SceneParams(objects_per_class={}, falloff=False)
    assert spacing_at(flat, 30.0, 1.8) == flat.spacing


def test_measured_density_falls_with_range(kitti_config):
    params = SceneParams(objects_per_class={1: 20}, stuff_points=0, max_range=45.0)
    scene = generate_scene(kitti_config, params, seed=8)
    near, far = [], []
    for i, box in enumerate(scene.boxes, start=1):
        pts = scene.cloud.bev[scene.gt.instance == i]
        _, dist = build_kdtree(pts).knn_all(1)
        r = float(np.hypot(*box.center))
        if r < 15:
            near.append(float(np.median(dist)))
        elif r > 25:
            far.append(float(np.median(dist)))
    assert near and far
    assert max(near) < min(far)


def test_ground_uses_stuff_classes(kitti_config):
    scene = generate_scene(kitti_config, SceneParams(objects_per_class={}, stuff_points=640), seed=0)
    assert len(scene) == 640
    assert set(scene.gt.semantic.tolist()) <= set(kitti_config.stuff_ids)
    assert (scene.gt.instance == 0).all()


def test_empty_scene(kitti_config):
    scene = generate_scene(kitti_config, SceneParams(objects_per_class={}, stuff_points=0))
    assert len(scene) == 0


def test_scene_params_validation():
    with pytest.raises(ContractViolation):
        SceneParams(objects_per_class={1: -1})
    with pytest.raises(ContractViolation):
        SceneParams(objects_per_class={}, min_range=50.0)
    with pytest.raises(ContractViolation):
        SceneParams(objects_per_class={}, size_range=(0.9, 0.5))


def test_bench_scene_size_and_classes(kitti_config):
    scene = bench_scene(kitti_config, seed=0)
    assert len(scene) == BENCH_POINTS
    present = set(np.unique(scene.gt.semantic).tolist())
    assert set(kitti_config.thing_ids) <= present


def test_semantic_oracle_recovers_separable_scene(kitti_config):
    scene = separable_scene(kitti_config, seed=3, objects=2)
    labeled = semantic_oracle(scene.cloud.xyz, scene.gt, kitti_config)
    assert labeled.instance.tolist() == scene.gt.instance.tolist()
    report = panoptic_quality(labeled, scene.gt, kitti_config)
    assert report.pq == pytest.approx(100.0)
    assert report.pq_th == pytest.approx(100.0)


def test_instance_oracle_keeps_semantics(kitti_config, rng):
    scene = separable_scene(kitti_config, seed=6, objects=2)
    pred_sem = scene.gt.semantic.copy()
    noisy = rng.random(len(pred_sem)) < 0.1
    pred_sem[noisy] = rng.choice(kitti_config.class_ids, size=int(noisy.sum()))

    plain = cluster_scan(PointCloud(scene.cloud.xyz, pred_sem), kitti_config)
    oracle = instance_oracle(pred_sem, scene.gt, kitti_config)
    assert (oracle.semantic == pred_sem).all()
    ids = kitti_config.class_ids
    assert iou_per_class(oracle.semantic, scene.gt.semantic, ids) == iou_per_class(plain.semantic, scene.gt.semantic, ids)
    plain_report = panoptic_quality(plain, scene.gt, kitti_config)
    oracle_report = panoptic_quality(oracle, scene.gt, kitti_config)
    assert oracle_report.miou == plain_report.miou


def test_instance_oracle_on_perfect_semantics(kitti_config):
    scene = separable_scene(kitti_config, seed=9, objects=1)
    oracle = instance_oracle(scene.gt.semantic, scene.gt, kitti_config)
    assert oracle.instance.tolist() == scene.gt.instance.tolist()


@pytest.mark.slow
def test_bench_scene_clusters_at_five_hertz(kitti_config):
    scene = bench_scene(kitti_config, seed=0)
    cluster_scan(scene.cloud, kitti_config)
    runs = 5
    start = time.perf_counter()
    for _ in range(runs):
        cluster_scan(scene.cloud, kitti_config)
    assert runs / (time.perf_counter() - start) >= 5.0
