from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from src.clustering.pipeline import InstanceLabeling
from src.errors import ContractViolation

TP_IOU = 0.5


@dataclass(frozen=True)
class SegmentMatch:
    class_id: int
    pred_instance: int
    gt_instance: int
    intersection: int
    union: int

    @property
    def iou(self) -> float:
        return self.intersection / self.union


@dataclass(frozen=True)
class ClassMatching:
    class_id: int
    tp: List[SegmentMatch] = field(default_factory=list)
    fp: List[int] = field(default_factory=list)
    fn: List[int] = field(default_factory=list)

    @property
    def iou_values(self) -> List[float]:
        return [m.iou for m in self.tp]


def check_lengths(*arrays: Sequence) -> None:
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        raise ContractViolation(f"label arrays differ in length: {sorted(lengths)}")


def valid_mask(gt_semantic: np.ndarray, ignore_labels: Iterable[int]) -> np.ndarray:
    return ~np.isin(gt_semantic, list(ignore_labels))


def semantic_counts(
    pred_semantic: np.ndarray, gt_semantic: np.ndarray, class_ids: Sequence[int], ignore_labels: Iterable[int] = (0,)
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-class (intersection, union) point counts, void GT points excluded."""
    pred_semantic = np.asarray(pred_semantic, dtype=np.int64)
    gt_semantic = np.asarray(gt_semantic, dtype=np.int64)
    check_lengths(pred_semantic, gt_semantic)

    valid = valid_mask(gt_semantic, ignore_labels)
    pred_v, gt_v = pred_semantic[valid], gt_semantic[valid]
    size = max(int(pred_v.max(initial=0)), int(gt_v.max(initial=0)), max(class_ids, default=0)) + 1
    pred_n = np.bincount(pred_v, minlength=size)
    gt_n = np.bincount(gt_v, minlength=size)
    inter_n = np.bincount(gt_v[pred_v == gt_v], minlength=size)

    ids = np.asarray(list(class_ids), dtype=np.int64)
    inter = inter_n[ids]
    return inter, pred_n[ids] + gt_n[ids] - inter


def iou_per_class(
    pred_semantic: np.ndarray, gt_semantic: np.ndarray, class_ids: Sequence[int], ignore_labels: Iterable[int] = (0,)
) -> Tuple[Dict[int, float], float]:
    inter, union = semantic_counts(pred_semantic, gt_semantic, class_ids, ignore_labels)
    ious = {int(c): float(i / u) for c, i, u in zip(class_ids, inter, union) if u > 0}
    miou = float(np.mean(list(ious.values()))) if ious else float("nan")
    return ious, miou


def match_segments(
    pred: InstanceLabeling,
    gt: InstanceLabeling,
    class_id: int,
    ignore_labels: Iterable[int] = (0,),
    min_points: int = 1,
    stuff: bool = False,
) -> ClassMatching:
    """Match predicted and GT segments of one class; a pair is a TP iff IoU > 0.5.

    Stuff classes count as a single segment per scan. Unmatched segments smaller
    than ``min_points`` are neither FP nor FN.
    """
    check_lengths(pred.semantic, gt.semantic)
    valid = valid_mask(gt.semantic, ignore_labels)
    p_in = valid & (pred.semantic == class_id)
    g_in = valid & (gt.semantic == class_id)

    p_inst = np.zeros(len(pred), dtype=np.int64) if stuff else pred.instance
    g_inst = np.zeros(len(gt), dtype=np.int64) if stuff else gt.instance

    p_ids, p_area = np.unique(p_inst[p_in], return_counts=True)
    g_ids, g_area = np.unique(g_inst[g_in], return_counts=True)

    both = p_in & g_in
    tp: List[SegmentMatch] = []
    if both.any():
        pairs, inter = np.unique(np.stack([p_inst[both], g_inst[both]], axis=1), axis=0, return_counts=True)
        union = p_area[np.searchsorted(p_ids, pairs[:, 0])] + g_area[np.searchsorted(g_ids, pairs[:, 1])] - inter
        hit = inter * 2 > union  # IoU > 0.5 without rounding
        for (p, g), i, u in zip(pairs[hit], inter[hit], union[hit]):
            tp.append(SegmentMatch(int(class_id), int(p), int(g), int(i), int(u)))

    matched_pred = {m.pred_instance for m in tp}
    matched_gt = {m.gt_instance for m in tp}
    if len(matched_pred) != len(tp) or len(matched_gt) != len(tp):
        raise ContractViolation(f"class {class_id}: a segment was matched twice")

    fp = [int(p) for p, a in zip(p_ids, p_area) if int(p) not in matched_pred and a >= min_points]
    fn = [int(g) for g, a in zip(g_ids, g_area) if int(g) not in matched_gt and a >= min_points]
    tp.sort(key=lambda m: (m.gt_instance, m.pred_instance))
    return ClassMatching(class_id=int(class_id), tp=tp, fp=fp, fn=fn)
