from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import BUILDING, CAR, PERSON, ROAD, labeling

from src.clustering.pipeline import PointCloud
from src.errors import ContractViolation
from src.evaluation.binned import (
    DEFAULT_BINS,
    DistanceBinnedAccumulator,
    assign_bins,
    bin_label,
    distance_binned_report,
    parse_bins,
    validate_bins,
)
from src.evaluation.matching import iou_per_class, match_segments
from src.evaluation.panoptic import AGGREGATE_KEYS, PanopticAccumulator, panoptic_quality
from src.oracle.bruteforce import match_exhaustive

CLASSES = [CAR, PERSON, ROAD, BUILDING]


def _random_scene(rng, n=400):
    gt_sem = rng.choice([0, CAR, PERSON, ROAD, BUILDING], size=n, p=[0.1, 0.3, 0.2, 0.2, 0.2])
    gt_inst = np.where(np.isin(gt_sem, [CAR, PERSON]), rng.integers(1, 6, size=n), 0)
    pred_sem = gt_sem.copy()
    flip = rng.random(n) < 0.15
    pred_sem[flip] = rng.choice(CLASSES, size=int(flip.sum()))
    pred_inst = gt_inst.copy()
    move = rng.random(n) < 0.2
    pred_inst[move] = rng.integers(0, 8, size=int(move.sum()))
    pred_inst[~np.isin(pred_sem, [CAR, PERSON])] = 0
    return labeling(pred_sem, pred_inst), labeling(gt_sem, gt_inst)


def _permute_ids(rng, instance):
    ids = np.unique(instance[instance > 0])
    mapping = dict(zip(ids.tolist(), (rng.permutation(len(ids)) + 100).tolist()))
    return np.array([mapping.get(int(i), 0) for i in instance])


def test_iou_identity_and_disjoint():
    sem = np.array([CAR, CAR, PERSON, ROAD])
    ious, miou = iou_per_class(sem, sem, CLASSES)
    assert ious == {CAR: 1.0, PERSON: 1.0, ROAD: 1.0}
    assert miou == 1.0

    ious, _ = iou_per_class([PERSON, PERSON], [CAR, CAR], CLASSES)
    assert ious == {CAR: 0.0, PERSON: 0.0}


def test_iou_half_overlap():
    gt = np.array([CAR] * 10 + [ROAD] * 2)
    pred = np.array([ROAD] * 4 + [CAR] * 8)
    ious, _ = iou_per_class(pred, gt, CLASSES)
    assert ious[CAR] == 0.5


def test_iou_ignores_void_gt_points():
    ious, _ = iou_per_class([CAR, CAR, CAR], [CAR, 0, 0], CLASSES)
    assert ious[CAR] == 1.0


def test_split_prediction_gives_one_tp_and_one_fp():
    gt = labeling([CAR] * 10, [1] * 10)
    pred = labeling([CAR] * 10, [1] * 6 + [2] * 4)
    m = match_segments(pred, gt, CAR)
    assert [(t.pred_instance, t.gt_instance, t.iou) for t in m.tp] == [(1, 1, 0.6)]
    assert m.fp == [2] and m.fn == []


def test_merged_prediction_at_exactly_half_is_no_match():
    gt = labeling([CAR] * 10, [1] * 5 + [2] * 5)
    pred = labeling([CAR] * 10, [1] * 10)
    m = match_segments(pred, gt, CAR)
    assert m.tp == [] and m.fp == [1] and m.fn == [1, 2]


def test_perfect_prediction_scores_100(small_config, rng):
    _, gt = _random_scene(rng)
    report = panoptic_quality(gt, gt, small_config)
    for key in ("PQ", "PQ_dagger", "RQ", "SQ", "mIoU", "PQ_Th", "PQ_St"):
        assert report.aggregates()[key] == pytest.approx(100.0)


def test_one_tp_and_one_fn(small_config):
    gt = labeling([CAR] * 15, [1] * 10 + [2] * 5)
    pred = labeling([CAR] * 8 + [0] * 7, [1] * 8 + [0] * 7)
    scores = panoptic_quality(pred, gt, small_config).classes[CAR]
    assert (scores.tp, scores.fp, scores.fn) == (1, 0, 1)
    assert scores.sq == pytest.approx(0.8)
    assert scores.pq * 100 == pytest.approx(53.33, abs=0.01)


def test_absent_classes_do_not_count(small_config):
    gt = labeling([CAR] * 4, [1] * 4)
    report = panoptic_quality(gt, gt, small_config)
    assert not report.classes[PERSON].present
    assert report.pq == pytest.approx(100.0)
    assert math.isnan(report.pq_st)
    assert list(report.aggregates()) == list(AGGREGATE_KEYS)


def test_pq_dagger_uses_stuff_iou(small_config):
    gt = labeling([CAR] * 4 + [ROAD] * 4, [1] * 4 + [0] * 4)
    pred = labeling([CAR] * 4 + [ROAD] * 2 + [BUILDING] * 2, [1] * 4 + [0] * 4)
    report = panoptic_quality(pred, gt, small_config)
    # road: segment IoU 0.5 is no TP, but its semantic IoU still counts
    assert report.classes[ROAD].pq == 0.0
    assert report.pq_dagger == pytest.approx(np.mean([1.0, 0.5, 0.0]) * 100)


@pytest.mark.parametrize("seed", range(20))
def test_pq_is_sq_times_rq(small_config, seed):
    pred, gt = _random_scene(np.random.default_rng(seed))
    for c in panoptic_quality(pred, gt, small_config).classes.values():
        assert abs(c.pq - c.sq * c.rq) <= 1e-12
        assert 0.0 <= c.pq <= 1.0


@pytest.mark.parametrize("seed", range(10))
def test_instance_relabeling_changes_nothing(small_config, seed):
    rng = np.random.default_rng(seed)
    pred, gt = _random_scene(rng)
    relabeled = labeling(pred.semantic, _permute_ids(rng, pred.instance))
    a = panoptic_quality(pred, gt, small_config)
    b = panoptic_quality(relabeled, gt, small_config)
    assert b.aggregates() == pytest.approx(a.aggregates(), nan_ok=True)
    assert [(c.tp, c.fp, c.fn) for c in a.classes.values()] == [(c.tp, c.fp, c.fn) for c in b.classes.values()]


@pytest.mark.parametrize("seed", range(20))
def test_greedy_matching_equals_exhaustive(small_config, seed):
    pred, gt = _random_scene(np.random.default_rng(seed), n=150)
    for class_id in CLASSES:
        stuff = class_id in small_config.stuff_ids
        greedy = match_segments(pred, gt, class_id, stuff=stuff)
        assert greedy.tp == match_exhaustive(pred, gt, class_id, stuff=stuff)


def test_void_points_leave_the_union(small_config):
    gt = labeling([CAR] * 10 + [0] * 12, [1] * 10 + [0] * 12)
    pred = labeling([CAR] * 22, [1] * 22)
    m = match_segments(pred, gt, CAR)
    assert [t.iou for t in m.tp] == [1.0]


def test_all_void_prediction_is_not_a_false_positive(small_config):
    gt = labeling([CAR] * 5 + [0] * 5, [1] * 5 + [0] * 5)
    pred = labeling([CAR] * 10, [1] * 5 + [2] * 5)
    m = match_segments(pred, gt, CAR)
    assert len(m.tp) == 1 and m.fp == []


def test_min_points_drops_small_segments(small_config):
    gt = labeling([CAR] * 13, [1] * 10 + [2] * 3)
    pred = labeling([CAR] * 10 + [ROAD] * 3, [1] * 10 + [0] * 3)
    assert match_segments(pred, gt, CAR, min_points=5).fn == []
    assert match_segments(pred, gt, CAR, min_points=1).fn == [2]
    acc = PanopticAccumulator(small_config, min_points=5)
    acc.add_scan(pred, gt)
    assert acc.report().classes[CAR].fn == 0


def test_accumulator_merge_is_order_free(small_config):
    rng = np.random.default_rng(77)
    parts = []
    for _ in range(6):
        acc = PanopticAccumulator(small_config)
        acc.add_scan(*_random_scene(rng))
        parts.append(acc)

    forward = parts[0]
    for acc in parts[1:]:
        forward = forward.merge(acc)
    backward = parts[-1]
    for acc in reversed(parts[:-1]):
        backward = acc.merge(backward)
    tree = (parts[0].merge(parts[3])).merge(parts[5].merge(parts[1])).merge(parts[2].merge(parts[4]))

    expected = forward.report()
    assert expected.scans == 6
    for other in (backward.report(), tree.report()):
        assert other.aggregates() == expected.aggregates()
        assert other.classes == expected.classes


def test_accumulating_scans_equals_merging(small_config):
    rng = np.random.default_rng(3)
    scans = [_random_scene(rng) for _ in range(3)]
    single = PanopticAccumulator(small_config)
    merged = PanopticAccumulator(small_config)
    for pred, gt in scans:
        single.add_scan(pred, gt)
        one = PanopticAccumulator(small_config)
        one.add_scan(pred, gt)
        merged = merged.merge(one)
    assert single.report().classes == merged.report().classes


def test_merge_rejects_other_class_tables(small_config, kitti_config):
    with pytest.raises(ContractViolation):
        PanopticAccumulator(small_config).merge(PanopticAccumulator(kitti_config))


def test_report_frame(small_config, rng):
    pred, gt = _random_scene(rng)
    frame = panoptic_quality(pred, gt, small_config).to_frame()
    assert list(frame.index) == ["car", "person", "truck", "road", "building"]
    assert list(frame.columns) == ["ID", "Kind", "PQ %", "SQ %", "RQ %", "IoU %", "TP", "FP", "FN"]
    assert np.isnan(frame.loc["truck", "PQ %"])


def _two_range_scene():
    near = np.column_stack([np.linspace(5.0, 6.0, 10), np.zeros(10), np.zeros(10)])
    far = np.column_stack([np.linspace(20.0, 21.0, 10), np.zeros(10), np.zeros(10)])
    xyz = np.vstack([near, far])
    gt = labeling([CAR] * 20, [1] * 10 + [2] * 10)
    pred = labeling([CAR] * 20, [4] * 10 + [3] * 6 + [5] * 4)
    return PointCloud(xyz, gt.semantic), pred, gt


def test_binned_tp_counts_add_up(small_config):
    cloud, pred, gt = _two_range_scene()
    binned = distance_binned_report(pred, gt, cloud, small_config)
    total = panoptic_quality(pred, gt, small_config)
    assert [r.classes[CAR].tp for _, r in binned] == [1, 1, 0]
    assert sum(r.tp for _, r in binned) == total.tp


def test_single_bin_equals_global_report(small_config, rng):
    pred, gt = _random_scene(rng, n=200)
    xyz = np.column_stack([rng.uniform(0, 10, size=(200, 2)), np.zeros(200)])
    cloud = PointCloud(xyz, gt.semantic)
    (_, first), *_ = distance_binned_report(pred, gt, cloud, small_config)
    assert first.classes == panoptic_quality(pred, gt, small_config).classes


def test_binned_accumulator_merge(small_config):
    cloud, pred, gt = _two_range_scene()
    a = DistanceBinnedAccumulator(small_config)
    a.add_scan(pred, gt, cloud)
    merged = a.merge(a)
    assert [r.classes[CAR].tp for _, r in merged.reports()] == [2, 2, 0]
    with pytest.raises(ContractViolation):
        a.merge(DistanceBinnedAccumulator(small_config, parse_bins("0,10")))


def test_assign_bins_edges():
    cloud = PointCloud(np.array([[0.0, 0, 0], [15.0, 0, 0], [29.9, 0, 0], [30.0, 0, 0]]), [CAR] * 4)
    assert assign_bins(cloud, DEFAULT_BINS).tolist() == [0, 1, 1, 2]


@pytest.mark.parametrize(
    "bins",
    [
        [(0, 15), (10, math.inf)],
        [(0, 15), (20, math.inf)],
        [(5, math.inf)],
        [(0, 15), (15, 30)],
        [(0, 0), (0, math.inf)],
        [],
    ],
)
def test_bad_bins_rejected(bins):
    with pytest.raises(ContractViolation):
        validate_bins(bins)


def test_parse_bins_and_labels():
    bins = parse_bins("0,15,30")
    assert bins == list(DEFAULT_BINS)
    assert [bin_label(b) for b in bins] == ["0-15m", "15-30m", "30m+"]
    with pytest.raises(ContractViolation):
        parse_bins("0,a")
