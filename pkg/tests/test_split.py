from __future__ import annotations

import logging

import numpy as np
import pytest
from conftest import CAR, PERSON, TRUCK, grid_blob

from src.clustering.pipeline import cluster_scan
from src.clustering.splitting import SplitParams, fits_in_reference, split_cluster
from src.data_sources.synthetic import merged_objects, separable_scene, two_car_scene
from src.errors import ContractViolation

CAR_PARAMS = SplitParams(reference_box=(4.4, 1.8), margin=0.30)


def _check_partition(parts, n):
    joined = np.sort(np.concatenate(parts))
    assert joined.tolist() == list(range(n))
    assert [int(p[0]) for p in parts] == sorted(int(p[0]) for p in parts)


def test_single_point_fits_anything():
    assert fits_in_reference([(3.0, 4.0)], SplitParams(reference_box=(0.1, 0.1)))


def test_margin_makes_long_cluster_fit():
    assert fits_in_reference([(0, 0), (5.5, 0), (5.5, 1.0), (0, 1.0)], CAR_PARAMS)


def test_two_parked_cars_do_not_fit():
    assert not fits_in_reference([(0, 0), (9, 0), (9, 2), (0, 2)], CAR_PARAMS)


def test_fit_test_rejects_empty_cluster():
    with pytest.raises(ContractViolation):
        fits_in_reference(np.empty((0, 2)), CAR_PARAMS)


def test_params_sort_box_sides():
    assert SplitParams(reference_box=(1.8, 4.4)).reference_box == (4.4, 1.8)
    assert SplitParams(reference_box=(4.4, 1.8), margin=0.5).limits == pytest.approx((6.6, 2.7))
    with pytest.raises(ContractViolation):
        SplitParams(reference_box=(4.4, 0.0))


def test_fitting_cluster_is_returned_whole():
    pts = grid_blob((0, 0), 4.0, 1.6, 0.2)
    parts = split_cluster(pts, CAR_PARAMS, 1.8)
    assert len(parts) == 1 and parts[0].tolist() == list(range(len(pts)))


def test_split_rejects_bad_input():
    with pytest.raises(ContractViolation):
        split_cluster(np.empty((0, 2)), CAR_PARAMS, 1.8)
    with pytest.raises(ContractViolation):
        split_cluster([(0, 0)], CAR_PARAMS, 0.0)


def test_two_cars_bumper_gap_split_in_two():
    a = grid_blob((0.0, 0.0), 4.0, 1.8, 0.1)
    b = grid_blob((4.5, 0.0), 4.0, 1.8, 0.1)
    pts = np.vstack([a, b])
    parts = split_cluster(pts, CAR_PARAMS, 1.8)
    assert len(parts) == 2
    assert parts[0].tolist() == list(range(len(a)))
    assert all(fits_in_reference(pts[p], CAR_PARAMS) for p in parts)


def test_two_car_scene_clusters_to_ground_truth(kitti_config):
    scene = two_car_scene(kitti_config, gap=0.5)
    merged = cluster_scan(scene.cloud, kitti_config, enable_split=False)
    assert merged.instance_count == 1
    split = cluster_scan(scene.cloud, kitti_config, enable_split=True)
    assert split.instance.tolist() == scene.gt.instance.tolist()


def test_side_by_side_cars_split_too(kitti_config):
    scene = two_car_scene(kitti_config, gap=0.5, side_by_side=True)
    assert cluster_scan(scene.cloud, kitti_config).instance.tolist() == scene.gt.instance.tolist()


def test_unsplittable_blob_is_kept(caplog):
    # no threshold above epsilon cuts a dense grid
    pts = grid_blob((0, 0), 3.0, 3.0, 0.05)
    with caplog.at_level(logging.DEBUG, logger="src.clustering.splitting"):
        parts = split_cluster(pts, SplitParams(reference_box=(0.8, 0.8), epsilon=0.1), 0.8)
    assert len(parts) == 1 and len(parts[0]) == len(pts)
    assert "unsplittable" in caplog.text


# gaps at or above this separate blobs sampled at merged_objects' 0.1 m pitch
SEPARABLE_GAP = 0.35


def _merged_scene(rng, reference_box, t_c, count, min_gap=0.0):
    gaps = rng.uniform(min_gap, t_c, size=count - 1)
    # below 0.8 two narrow blobs plus a small gap can fit one enlarged box
    pts, owner = merged_objects(rng, reference_box, gaps, size_range=(0.8, 0.95))
    return pts, owner, gaps


@pytest.mark.parametrize("epsilon", [1e-3, 1e-4, 1e-5])
def test_epsilon_does_not_change_partitions(epsilon):
    rng = np.random.default_rng(11)
    for _ in range(10):
        pts, _, _ = _merged_scene(rng, (4.4, 1.8), 1.8, 2, min_gap=SEPARABLE_GAP)
        reference = split_cluster(pts, SplitParams((4.4, 1.8), epsilon=1e-3), 1.8)
        parts = split_cluster(pts, SplitParams((4.4, 1.8), epsilon=epsilon), 1.8)
        assert [p.tolist() for p in parts] == [p.tolist() for p in reference]


def test_wider_margin_never_gives_more_parts():
    rng = np.random.default_rng(5)
    for _ in range(10):
        pts, _, _ = _merged_scene(rng, (4.4, 1.8), 1.8, int(rng.integers(2, 4)))
        counts = [len(split_cluster(pts, SplitParams((4.4, 1.8), margin=m), 1.8)) for m in (0.0, 0.1, 0.2, 0.3, 0.5, 1.0)]
        assert counts == sorted(counts, reverse=True)


def test_gap_below_point_pitch_keeps_a_partition():
    rng = np.random.default_rng(3)
    pts, _ = merged_objects(rng, (4.4, 1.8), [0.001], size_range=(0.8, 0.95))
    parts = split_cluster(pts, CAR_PARAMS, 1.8)
    _check_partition(parts, len(pts))


def test_neighbor_count_barely_changes_partitions(kitti_config):
    moved = total = 0
    for seed in range(3):
        scene = separable_scene(kitti_config, seed=seed, objects=2)
        a = cluster_scan(scene.cloud, kitti_config.with_overrides(k=32)).instance
        b = cluster_scan(scene.cloud, kitti_config.with_overrides(k=64)).instance
        moved += int((a != b).sum())
        total += len(a)
    assert moved < 0.01 * total


@pytest.mark.slow
def test_merged_objects_always_split_into_fitting_parts(small_config):
    rng = np.random.default_rng(99)
    for i in range(100):
        class_id = (CAR, TRUCK, PERSON)[i % 3]
        reference = small_config.reference_box(class_id)
        t_c = small_config.threshold(class_id)
        pts, owner, gaps = _merged_scene(rng, reference, t_c, 2 + i % 2)
        params = SplitParams.for_class(small_config, class_id)
        parts = split_cluster(pts, params, t_c)
        _check_partition(parts, len(pts))
        for p in parts:
            if fits_in_reference(pts[p], params):
                continue
            # kept whole under the epsilon floor: only blobs joined by sub-pitch gaps
            lo, hi = int(owner[p].min()), int(owner[p].max())
            assert hi > lo
            assert (gaps[lo:hi] < SEPARABLE_GAP).all()
        if (gaps >= SEPARABLE_GAP).all():
            assert all(len(np.unique(owner[p])) == 1 for p in parts)
