from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from src.clustering.pipeline import InstanceLabeling
from src.config_loader import THING, ClassConfig
from src.errors import ContractViolation
from src.evaluation.matching import check_lengths, match_segments, semantic_counts

AGGREGATE_KEYS = ("PQ", "PQ_dagger", "RQ", "SQ", "mIoU", "PQ_Th", "PQ_St")


@dataclass(frozen=True)
class ClassScores:
    class_id: int
    name: str
    kind: str
    pq: float
    sq: float
    rq: float
    iou: Optional[float]
    tp: int
    fp: int
    fn: int

    @property
    def present(self) -> bool:
        return self.tp + self.fp + self.fn > 0


@dataclass(frozen=True)
class PanopticReport:
    """Scores as fractions per class; aggregates as percentages."""

    classes: Dict[int, ClassScores]
    pq: float
    pq_dagger: float
    rq: float
    sq: float
    miou: float
    pq_th: float
    pq_st: float
    scans: int = 1

    def aggregates(self) -> Dict[str, float]:
        return {
            "PQ": self.pq,
            "PQ_dagger": self.pq_dagger,
            "RQ": self.rq,
            "SQ": self.sq,
            "mIoU": self.miou,
            "PQ_Th": self.pq_th,
            "PQ_St": self.pq_st,
        }

    @property
    def tp(self) -> int:
        return sum(c.tp for c in self.classes.values())

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for c in self.classes.values():
            rows.append(
                {
                    "Class": c.name,
                    "ID": c.class_id,
                    "Kind": c.kind,
                    "PQ %": c.pq * 100 if c.present else np.nan,
                    "SQ %": c.sq * 100 if c.present else np.nan,
                    "RQ %": c.rq * 100 if c.present else np.nan,
                    "IoU %": c.iou * 100 if c.iou is not None else np.nan,
                    "TP": c.tp,
                    "FP": c.fp,
                    "FN": c.fn,
                }
            )
        if not rows:
            return pd.DataFrame()
        return pd.DataFrame(rows).set_index("Class")


class PanopticAccumulator:
    """Sums TP/FP/FN counts, TP IoUs and semantic intersections/unions over scans."""

    def __init__(self, config: ClassConfig, min_points: Optional[int] = None):
        self.config = config
        self.min_points = config.min_points if min_points is None else min_points
        self.class_ids = config.class_ids
        n = len(self.class_ids)
        self.tp = np.zeros(n, dtype=np.int64)
        self.fp = np.zeros(n, dtype=np.int64)
        self.fn = np.zeros(n, dtype=np.int64)
        self.inter = np.zeros(n, dtype=np.int64)
        self.union = np.zeros(n, dtype=np.int64)
        self.tp_ious: List[List[float]] = [[] for _ in range(n)]
        self.scans = 0

    def add_scan(self, pred: InstanceLabeling, gt: InstanceLabeling) -> None:
        check_lengths(pred.semantic, gt.semantic)
        ignore = self.config.ignore_labels
        for pos, class_id in enumerate(self.class_ids):
            stuff = not self.config.classes[class_id].is_thing
            m = match_segments(pred, gt, class_id, ignore, self.min_points, stuff=stuff)
            self.tp[pos] += len(m.tp)
            self.fp[pos] += len(m.fp)
            self.fn[pos] += len(m.fn)
            self.tp_ious[pos].extend(m.iou_values)

        inter, union = semantic_counts(pred.semantic, gt.semantic, self.class_ids, ignore)
        self.inter += inter
        self.union += union
        self.scans += 1

    def merge(self, other: "PanopticAccumulator") -> "PanopticAccumulator":
        if other.class_ids != self.class_ids or other.min_points != self.min_points:
            raise ContractViolation("cannot merge accumulators built for different class tables")
        merged = PanopticAccumulator(self.config, self.min_points)
        for name in ("tp", "fp", "fn", "inter", "union"):
            setattr(merged, name, getattr(self, name) + getattr(other, name))
        merged.tp_ious = [a + b for a, b in zip(self.tp_ious, other.tp_ious)]
        merged.scans = self.scans + other.scans
        return merged

    def report(self) -> PanopticReport:
        classes: Dict[int, ClassScores] = {}
        for pos, class_id in enumerate(self.class_ids):
            spec = self.config.classes[class_id]
            tp, fp, fn = int(self.tp[pos]), int(self.fp[pos]), int(self.fn[pos])
            # fsum is correctly rounded, so the result does not depend on merge order
            sq = math.fsum(self.tp_ious[pos]) / tp if tp else 0.0
            rq = tp / (tp + 0.5 * fp + 0.5 * fn) if tp + fp + fn else 0.0
            union = int(self.union[pos])
            classes[class_id] = ClassScores(
                class_id=class_id,
                name=spec.name,
                kind=spec.kind,
                pq=sq * rq,
                sq=sq,
                rq=rq,
                iou=int(self.inter[pos]) / union if union else None,
                tp=tp,
                fp=fp,
                fn=fn,
            )
        return _aggregate(classes, self.scans)


def _mean_pct(values: List[float]) -> float:
    return float(np.mean(values)) * 100 if values else float("nan")


def _aggregate(classes: Dict[int, ClassScores], scans: int) -> PanopticReport:
    present = [c for c in classes.values() if c.present]
    things = [c for c in present if c.kind == THING]
    stuff = [c for c in present if c.kind != THING]
    defined_iou = [c.iou for c in classes.values() if c.iou is not None]
    stuff_iou = [c.iou for c in classes.values() if c.kind != THING and c.iou is not None]
    return PanopticReport(
        classes=classes,
        pq=_mean_pct([c.pq for c in present]),
        pq_dagger=_mean_pct([c.pq for c in things] + stuff_iou),
        rq=_mean_pct([c.rq for c in present]),
        sq=_mean_pct([c.sq for c in present]),
        miou=_mean_pct(defined_iou),
        pq_th=_mean_pct([c.pq for c in things]),
        pq_st=_mean_pct([c.pq for c in stuff]),
        scans=scans,
    )


def panoptic_quality(pred: InstanceLabeling, gt: InstanceLabeling, config: ClassConfig) -> PanopticReport:
    acc = PanopticAccumulator(config)
    acc.add_scan(pred, gt)
    return acc.report()
