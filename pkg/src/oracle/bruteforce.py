"""Slow, exhaustive references for the clustering, box fitting and matching code.

Nothing in the pipeline imports this module; tests and downstream verification do.
"""

from __future__ import annotations

import math
from collections import deque
from typing import Iterable, List, Optional, Tuple

import numpy as np

from src.clustering.components import ComponentLabeling
from src.clustering.graph import AdjacencyGraph
from src.clustering.pipeline import InstanceLabeling
from src.errors import OracleGuardError
from src.evaluation.matching import SegmentMatch, check_lengths, valid_mask
from src.geometry.box_fitting import OrientedBox2D, canonical_box
from src.geometry.points import PointsLike, as_points, distances, rotation

MAX_RADIUS_POINTS = 5000
MAX_SEGMENTS = 10


def _relabel(roots: np.ndarray) -> ComponentLabeling:
    _, labels = np.unique(roots, return_inverse=True)
    labels = labels.astype(np.int64).reshape(-1)
    return ComponentLabeling(labels=labels, component_count=int(labels.max()) + 1 if len(labels) else 0)


def radius_cluster_bruteforce(points: PointsLike, t: float) -> ComponentLabeling:
    """Components of the graph linking every pair closer than or exactly ``t``."""
    pts = as_points(points)
    n = len(pts)
    if n > MAX_RADIUS_POINTS:
        raise OracleGuardError(f"radius oracle takes at most {MAX_RADIUS_POINTS} points, got {n}")

    root = np.full(n, -1, dtype=np.int64)
    for start in range(n):
        if root[start] >= 0:
            continue
        root[start] = start
        queue = deque([start])
        while queue:
            u = queue.popleft()
            near = np.flatnonzero((distances(pts, pts[u]) <= t) & (root < 0))
            root[near] = start
            queue.extend(near.tolist())
    return _relabel(root)


def components_bfs(graph: AdjacencyGraph) -> ComponentLabeling:
    adjacency: List[List[int]] = [[] for _ in range(graph.node_count)]
    for u, v in graph.edges.tolist():
        adjacency[u].append(v)
        adjacency[v].append(u)

    root = np.full(graph.node_count, -1, dtype=np.int64)
    for start in range(graph.node_count):
        if root[start] >= 0:
            continue
        root[start] = start
        queue = deque([start])
        while queue:
            for w in adjacency[queue.popleft()]:
                if root[w] < 0:
                    root[w] = start
                    queue.append(w)
    return _relabel(root)


def min_box_sweep(points: PointsLike, angle_step: float = 0.001) -> OrientedBox2D:
    """Smallest axis-aligned box over rotations in [0, pi/2) at ``angle_step`` spacing."""
    pts = as_points(points)
    if len(pts) == 0:
        raise OracleGuardError("cannot sweep an empty point set")

    best: Optional[Tuple[float, float, np.ndarray, np.ndarray]] = None
    for theta in np.arange(0.0, math.pi / 2, angle_step):
        local = pts @ rotation(theta)
        lo, hi = local.min(axis=0), local.max(axis=0)
        area = float(np.prod(hi - lo))
        if best is None or area < best[0]:
            best = (area, float(theta), lo, hi)

    _, theta, lo, hi = best
    center = rotation(theta) @ ((lo + hi) / 2.0)
    half = (hi - lo) / 2.0
    return canonical_box(center[0], center[1], half[0], half[1], theta)


def _segments(semantic, instance, valid, class_id, stuff) -> List[Tuple[int, np.ndarray]]:
    mask = valid & (semantic == class_id)
    if stuff:
        return [(0, mask)] if mask.any() else []
    return [(int(i), mask & (instance == i)) for i in np.unique(instance[mask])]


def match_exhaustive(
    pred: InstanceLabeling,
    gt: InstanceLabeling,
    class_id: int,
    ignore_labels: Iterable[int] = (0,),
    stuff: bool = False,
) -> List[SegmentMatch]:
    """Largest set of one-to-one pairs with IoU > 0.5, found by trying every assignment."""
    check_lengths(pred.semantic, gt.semantic)
    valid = valid_mask(gt.semantic, ignore_labels)
    p_segs = _segments(pred.semantic, pred.instance, valid, class_id, stuff)
    g_segs = _segments(gt.semantic, gt.instance, valid, class_id, stuff)
    if len(p_segs) > MAX_SEGMENTS or len(g_segs) > MAX_SEGMENTS:
        raise OracleGuardError(
            f"exhaustive matching takes at most {MAX_SEGMENTS} segments per side, got {len(p_segs)} and {len(g_segs)}"
        )

    candidates: List[List[SegmentMatch]] = []
    for p_id, p_mask in p_segs:
        row = []
        for g_id, g_mask in g_segs:
            inter = int((p_mask & g_mask).sum())
            union = int((p_mask | g_mask).sum())
            if union and 2 * inter > union:
                row.append(SegmentMatch(int(class_id), p_id, g_id, inter, union))
        candidates.append(row)

    def search(i: int, used: frozenset) -> List[SegmentMatch]:
        if i == len(candidates):
            return []
        best = search(i + 1, used)
        for m in candidates[i]:
            if m.gt_instance not in used:
                trial = [m] + search(i + 1, used | {m.gt_instance})
                if len(trial) > len(best) or (
                    len(trial) == len(best) and math.fsum(x.iou for x in trial) > math.fsum(x.iou for x in best)
                ):
                    best = trial
        return best

    return sorted(search(0, frozenset()), key=lambda m: (m.gt_instance, m.pred_instance))
