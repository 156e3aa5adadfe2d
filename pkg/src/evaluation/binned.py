from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.clustering.pipeline import InstanceLabeling, PointCloud
from src.config_loader import ClassConfig
from src.errors import ContractViolation
from src.evaluation.matching import check_lengths
from src.evaluation.panoptic import PanopticAccumulator, PanopticReport
from src.geometry.points import bev_range

Bin = Tuple[float, float]

DEFAULT_BINS: Tuple[Bin, ...] = ((0.0, 15.0), (15.0, 30.0), (30.0, math.inf))


def validate_bins(bins: Sequence[Bin]) -> List[Bin]:
    """Bins must partition [0, inf): sorted, contiguous, no overlap."""
    out = [(float(lo), float(hi)) for lo, hi in bins]
    if not out:
        raise ContractViolation("at least one distance bin is required")
    if out[0][0] != 0.0:
        raise ContractViolation(f"first bin must start at 0 m, got {out[0][0]}")
    if not math.isinf(out[-1][1]):
        raise ContractViolation(f"last bin must be open-ended, got upper bound {out[-1][1]}")
    for i, (lo, hi) in enumerate(out):
        if not lo < hi:
            raise ContractViolation(f"bin {i} is empty: [{lo}, {hi})")
        if i and lo != out[i - 1][1]:
            kind = "overlaps" if lo < out[i - 1][1] else "leaves a gap after"
            raise ContractViolation(f"bin {i} [{lo}, {hi}) {kind} bin {i - 1}")
    return out


def parse_bins(text: str) -> List[Bin]:
    """'0,15,30' -> [0,15), [15,30), [30,inf)."""
    try:
        edges = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ContractViolation(f"bin edges must be numbers, got {text!r}") from None
    if not edges:
        raise ContractViolation("no bin edges given")
    uppers = edges[1:] + [math.inf]
    return validate_bins(list(zip(edges, uppers)))


def bin_label(bin_: Bin) -> str:
    lo, hi = bin_
    return f"{lo:g}m+" if math.isinf(hi) else f"{lo:g}-{hi:g}m"


def assign_bins(cloud: PointCloud, bins: Sequence[Bin]) -> np.ndarray:
    edges = np.array([hi for _, hi in bins[:-1]], dtype=np.float64)
    return np.searchsorted(edges, bev_range(cloud.bev), side="right")


class DistanceBinnedAccumulator:
    def __init__(self, config: ClassConfig, bins: Sequence[Bin] = DEFAULT_BINS, min_points: Optional[int] = None):
        self.bins = validate_bins(bins)
        self.config = config
        self.accumulators = [PanopticAccumulator(config, min_points) for _ in self.bins]

    def add_scan(self, pred: InstanceLabeling, gt: InstanceLabeling, cloud: PointCloud) -> None:
        check_lengths(pred.semantic, gt.semantic, cloud.semantic)
        which = assign_bins(cloud, self.bins)
        for b, acc in enumerate(self.accumulators):
            mask = which == b
            acc.add_scan(
                InstanceLabeling(pred.semantic[mask], pred.instance[mask]),
                InstanceLabeling(gt.semantic[mask], gt.instance[mask]),
            )

    def merge(self, other: "DistanceBinnedAccumulator") -> "DistanceBinnedAccumulator":
        if other.bins != self.bins:
            raise ContractViolation("cannot merge accumulators with different bins")
        merged = DistanceBinnedAccumulator(self.config, self.bins, self.accumulators[0].min_points)
        merged.accumulators = [a.merge(b) for a, b in zip(self.accumulators, other.accumulators)]
        return merged

    def reports(self) -> List[Tuple[Bin, PanopticReport]]:
        return [(b, acc.report()) for b, acc in zip(self.bins, self.accumulators)]


def distance_binned_report(
    pred: InstanceLabeling,
    gt: InstanceLabeling,
    cloud: PointCloud,
    config: ClassConfig,
    bins: Sequence[Bin] = DEFAULT_BINS,
) -> List[Tuple[Bin, PanopticReport]]:
    acc = DistanceBinnedAccumulator(config, bins)
    acc.add_scan(pred, gt, cloud)
    return acc.reports()
