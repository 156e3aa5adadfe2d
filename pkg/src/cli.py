from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.clustering.pipeline import InstanceLabeling, PointCloud, cluster_scan
from src.config_loader import THRESHOLD_MODES, ClassConfig, load_class_config, resolve_config_path
from src.data_sources.kitti_files import (
    LABEL_SUFFIX,
    SCAN_SUFFIX,
    list_stems,
    pair_files,
    read_labels,
    read_scan,
    write_labels,
    write_scan,
)
from src.data_sources.synthetic import BENCH_POINTS, SceneParams, bench_scene, generate_scene, two_car_scene
from src.data_sources.text_scene import write_text_scene
from src.errors import (
    EXIT_OK,
    EXIT_USAGE,
    ContractViolation,
    LidarClusterError,
    UnpairedFilesError,
    UsageError,
    exit_code_for,
)
from src.evaluation.binned import Bin, DistanceBinnedAccumulator, parse_bins
from src.evaluation.oracle_modes import MODES, instance_oracle, semantic_oracle
from src.evaluation.panoptic import PanopticAccumulator
from src.logging_utils import parse_level, setup_logger
from src.reporting.export import report_key_values, timing_frame, write_class_csv, write_key_values, write_text
from src.reporting.html_builder import markdown_to_basic_html
from src.reporting.narrative import generate_report_markdown, timing_markdown

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV_VAR = "LIDAR_CLUSTER_LOG_LEVEL"
FLAG_FOR = {"scan_dir": "--scans", "pred_dir": "--preds", "gt_dir": "--gt"}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; this CLI reserves 2 for data errors."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"Value must be an integer, got '{raw}'.") from exc
    if value < 1:
        raise argparse.ArgumentTypeError("Value must be >= 1.")
    return value


def _nonnegative_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"Value must be an integer, got '{raw}'.") from exc
    if value < 0:
        raise argparse.ArgumentTypeError("Value must be >= 0.")
    return value


def _float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"Value must be a number, got '{raw}'.") from exc


def _positive_float(raw: str) -> float:
    value = _float(raw)
    if not value > 0:
        raise argparse.ArgumentTypeError("Value must be > 0.")
    return value


def _nonnegative_float(raw: str) -> float:
    value = _float(raw)
    if value < 0:
        raise argparse.ArgumentTypeError("Value must be >= 0.")
    return value


def _bins(raw: str) -> List[Bin]:
    try:
        return parse_bins(raw)
    except ContractViolation as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


@dataclass
class RunManifest:
    out_dir: Path
    scan_dir: Optional[Path] = None
    pred_dir: Optional[Path] = None
    gt_dir: Optional[Path] = None
    config_path: Optional[Path] = None
    enable_split: bool = True
    mode: str = "plain"
    bins: Optional[List[Bin]] = None
    workers: int = 1
    html: bool = False
    overrides: dict = field(default_factory=dict)

    def check_dirs(self, *names: str) -> None:
        for name in names:
            path = getattr(self, name)
            if path is None:
                raise UsageError(f"{FLAG_FOR[name]} is required here")
            if not Path(path).is_dir():
                raise UsageError(f"directory not found: {path}")

    def load_config(self) -> ClassConfig:
        config = load_class_config(self.config_path).with_overrides(**self.overrides)
        logger.info("class config %s (%d thing classes)", config.source, len(config.thing_ids))
        return config


def _read_cloud(scan_path: Path, label_path: Path, config: ClassConfig) -> Tuple[PointCloud, np.ndarray]:
    scan = read_scan(scan_path)
    raw_semantic, instance = read_labels(label_path, expected_points=len(scan))
    return PointCloud(scan.xyz, config.to_class_ids(raw_semantic)), instance


def _read_labeling(label_path: Path, config: ClassConfig, expected: Optional[int] = None) -> InstanceLabeling:
    raw_semantic, instance = read_labels(label_path, expected_points=expected)
    return InstanceLabeling(config.to_class_ids(raw_semantic), instance)


def _run_tasks(fn: Callable, tasks: Sequence, workers: int) -> List:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _cluster_task(task: Tuple[str, Path, Path, Path, ClassConfig, bool]) -> Tuple[str, float, int]:
    stem, scan_path, pred_path, out_path, config, enable_split = task
    cloud, _ = _read_cloud(scan_path, pred_path, config)
    started = time.perf_counter()
    labels = cluster_scan(cloud, config, enable_split=enable_split)
    elapsed = time.perf_counter() - started
    write_labels(config.to_raw_ids(labels.semantic), labels.instance, out_path)
    logger.debug("%s: %d points, %d instances, %.1f ms", stem, len(cloud), labels.instance_count, elapsed * 1000)
    return stem, elapsed, labels.instance_count


def cmd_cluster(manifest: RunManifest) -> int:
    manifest.check_dirs("scan_dir", "pred_dir")
    pairs = pair_files(manifest.scan_dir, {"pred": manifest.pred_dir})
    config = manifest.load_config()
    labels_dir = manifest.out_dir / "labels"

    tasks = [
        (stem, scan, files["pred"], labels_dir / f"{stem}{LABEL_SUFFIX}", config, manifest.enable_split)
        for stem, scan, files in pairs
    ]
    results = _run_tasks(_cluster_task, tasks, manifest.workers)

    timings = timing_frame([r[0] for r in results], [r[1] for r in results])
    timings["instances"] = [r[2] for r in results]
    write_text(timing_markdown(timings["seconds"], manifest.enable_split), manifest.out_dir / "timing.md")
    timings.to_csv(manifest.out_dir / "timing.csv", float_format="%.6f")
    hz = len(timings) / float(timings["seconds"].sum()) if len(timings) and timings["seconds"].sum() > 0 else float("nan")
    write_key_values(
        {"scans": len(timings), "split": manifest.enable_split, "mean_seconds": _mean(timings["seconds"]), "hz": _finite(hz)},
        manifest.out_dir / "timing.yaml",
    )
    logger.info("clustered %d scans at %.2f Hz -> %s", len(timings), hz, labels_dir)
    return EXIT_OK


def _mean(series: pd.Series) -> Optional[float]:
    return float(series.mean()) if len(series) else None


def _finite(value: float) -> Optional[float]:
    return float(value) if np.isfinite(value) else None


def _eval_task(task) -> Tuple[PanopticAccumulator, Optional[DistanceBinnedAccumulator]]:
    stem, files, config, mode, bins, enable_split = task
    cloud: Optional[PointCloud] = None
    gt: InstanceLabeling

    if "scan" in files:
        cloud, gt_instance = _read_cloud(files["scan"], files["gt"], config)
        gt = InstanceLabeling(cloud.semantic, gt_instance)
    else:
        gt = _read_labeling(files["gt"], config)

    if mode == "plain":
        pred = _read_labeling(files["pred"], config, expected=len(gt))
    elif mode == "semantic-oracle":
        pred = semantic_oracle(cloud.xyz, gt, config, enable_split=enable_split)
    else:
        pred = instance_oracle(_read_labeling(files["pred"], config, expected=len(gt)).semantic, gt, config)

    acc = PanopticAccumulator(config)
    acc.add_scan(pred, gt)
    binned = None
    if bins:
        binned = DistanceBinnedAccumulator(config, bins)
        binned.add_scan(pred, gt, cloud)
    logger.debug("%s evaluated (%s)", stem, mode)
    return acc, binned


def cmd_eval(manifest: RunManifest) -> int:
    if manifest.gt_dir is None:
        raise UsageError("evaluation needs a ground-truth directory (--gt)")
    manifest.check_dirs("gt_dir")
    needs_scans = manifest.mode == "semantic-oracle" or bool(manifest.bins)
    needs_preds = manifest.mode != "semantic-oracle"
    if needs_scans:
        manifest.check_dirs("scan_dir")
    if needs_preds:
        manifest.check_dirs("pred_dir")

    config = manifest.load_config()
    tasks = []
    for stem, files in _pair_eval_files(manifest, needs_scans, needs_preds):
        tasks.append((stem, files, config, manifest.mode, manifest.bins, manifest.enable_split))
    if not tasks:
        raise UsageError(f"no {LABEL_SUFFIX} files found in {manifest.gt_dir}")

    results = _run_tasks(_eval_task, tasks, manifest.workers)
    acc = results[0][0]
    for other, _ in results[1:]:
        acc = acc.merge(other)
    report = acc.report()

    binned = None
    if manifest.bins:
        bin_acc = results[0][1]
        for _, other in results[1:]:
            bin_acc = bin_acc.merge(other)
        binned = bin_acc.reports()

    out = manifest.out_dir
    markdown = generate_report_markdown(report, dataset=config.dataset, mode=manifest.mode, binned=binned)
    write_text(markdown, out / "report.md")
    write_key_values(report_key_values(report, binned, dataset=config.dataset, mode=manifest.mode), out / "report.yaml")
    write_class_csv(report, out / "classes.csv")
    if manifest.html:
        write_text(markdown_to_basic_html(markdown, report.to_frame()), out / "report.html")
    logger.info("PQ %.2f | PQ_dagger %.2f | mIoU %.2f over %d scans -> %s", report.pq, report.pq_dagger, report.miou, report.scans, out)
    return EXIT_OK


def _pair_eval_files(manifest: RunManifest, needs_scans: bool, needs_preds: bool) -> Iterable[Tuple[str, dict]]:
    if needs_scans:
        label_dirs = {"gt": manifest.gt_dir}
        if needs_preds:
            label_dirs["pred"] = manifest.pred_dir
        for stem, scan, files in pair_files(manifest.scan_dir, label_dirs):
            yield stem, {"scan": scan, **files}
        return

    # no scans involved: pair predictions against ground truth by stem
    gt = list_stems(manifest.gt_dir, LABEL_SUFFIX)
    pred = list_stems(manifest.pred_dir, LABEL_SUFFIX)
    missing = [str(manifest.pred_dir / f"{s}{LABEL_SUFFIX}") for s in gt if s not in pred]
    missing += [str(manifest.gt_dir / f"{s}{LABEL_SUFFIX}") for s in pred if s not in gt]
    if missing:
        raise UnpairedFilesError(sorted(missing))
    for stem, path in gt.items():
        yield stem, {"gt": path, "pred": pred[stem]}


def cmd_gen(args: argparse.Namespace) -> int:
    config = load_class_config(args.config).with_overrides(**_overrides(args))
    out = Path(args.out)
    rng = np.random.default_rng(args.seed)
    for i in range(args.scenes):
        stem = f"{i:06d}"
        if args.two_car_gap is not None:
            scene = two_car_scene(config, gap=args.two_car_gap, seed=args.seed + i)
        else:
            classes = args.classes if args.classes else config.thing_ids
            unknown = [c for c in classes if c not in config.thing_ids]
            if unknown:
                raise UsageError(f"--classes {unknown} are not thing classes of {config.source}")
            params = SceneParams(
                objects_per_class={c: args.objects for c in classes},
                stuff_points=args.stuff_points,
                falloff=not args.no_falloff,
            )
            scene = generate_scene(config, params, rng)
        write_scan(scene.cloud.xyz, out / "scans" / f"{stem}{SCAN_SUFFIX}")
        write_labels(config.to_raw_ids(scene.gt.semantic), scene.gt.instance, out / "labels" / f"{stem}{LABEL_SUFFIX}")
        write_text_scene(scene.cloud, out / "text" / f"{stem}.txt", scene.gt.instance, header=f"scene {stem} seed {args.seed}")
        logger.debug("%s: %d points, %d objects", stem, len(scene), scene.gt.instance_count)
    logger.info("wrote %d scenes to %s", args.scenes, out)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    config = load_class_config(args.config).with_overrides(**_overrides(args))
    scenes = [bench_scene(config, seed=args.seed + i, points=args.points) for i in range(args.scenes)]
    rows = []
    for split in (False, True):
        seconds = []
        for scene in scenes:
            started = time.perf_counter()
            cluster_scan(scene.cloud, config, enable_split=split)
            seconds.append(time.perf_counter() - started)
        mean = float(np.mean(seconds))
        rows.append({"split": split, "scans": len(seconds), "mean_ms": mean * 1000, "hz": 1.0 / mean if mean > 0 else float("inf")})
        logger.info("split=%s: %.1f ms/scan, %.2f Hz (%d points, k=%d)", split, mean * 1000, rows[-1]["hz"], args.points, config.k)

    frame = pd.DataFrame(rows).set_index("split")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out / "bench.csv", float_format="%.4f")
        write_key_values({("split" if s else "no_split"): {"hz": _finite(r["hz"]), "mean_ms": float(r["mean_ms"])} for s, r in frame.iterrows()}, out / "bench.yaml")
    print(frame.to_string(float_format=lambda v: f"{v:.2f}"))
    return EXIT_OK


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "k": getattr(args, "k", None),
        "margin": getattr(args, "margin", None),
        "epsilon": getattr(args, "epsilon", None),
        "threshold_mode": getattr(args, "threshold_mode", None),
        "range_coefficient": getattr(args, "range_coefficient", None),
    }


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="Class config YAML (default: $LIDAR_CLUSTER_CONFIG or shipped SemanticKITTI)")
    p.add_argument("--log-level", default=None, help=f"Logging level (default: ${LOG_LEVEL_ENV_VAR} or INFO)")
    p.add_argument("--log-file", default=None, help="Also write logs to this file")


def _add_clustering(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-split", action="store_true", help="Disable box splitting")
    p.add_argument("--k", type=_positive_int, default=None, help="Neighbors per point")
    p.add_argument("--margin", type=_nonnegative_float, default=None, help="Box-splitting margin (0.30 = 30%%)")
    p.add_argument("--epsilon", type=_positive_float, default=None, help="Dichotomy floor in meters")
    p.add_argument("--threshold-mode", choices=THRESHOLD_MODES, default=None, help="Edge threshold rule")
    p.add_argument("--range-coefficient", type=_positive_float, default=None, help="Coefficient of the range-proportional rule")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="app.py", description="Training-free LiDAR instance clustering and panoptic evaluation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cluster", help="Cluster semantic predictions into instances")
    _add_common(p)
    _add_clustering(p)
    p.add_argument("--scans", required=True, help="Directory of .bin scans")
    p.add_argument("--preds", required=True, help="Directory of semantic .label predictions")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--workers", type=_positive_int, default=1, help="Process scans in parallel")

    p = sub.add_parser("eval", help="Evaluate panoptic predictions against ground truth")
    _add_common(p)
    _add_clustering(p)
    p.add_argument("--gt", default=None, help="Directory of ground-truth .label files")
    p.add_argument("--preds", default=None, help="Directory of predicted .label files")
    p.add_argument("--scans", default=None, help="Directory of .bin scans (semantic-oracle mode and --bins)")
    p.add_argument("--out", required=True, help="Report directory")
    p.add_argument("--mode", choices=MODES, default="plain")
    p.add_argument("--bins", type=_bins, default=None, help="Distance bin edges in meters, e.g. 0,15,30")
    p.add_argument("--html", action="store_true", help="Also write an HTML report")
    p.add_argument("--workers", type=_positive_int, default=1, help="Process scans in parallel")

    p = sub.add_parser("gen", help="Generate synthetic scans with ground truth")
    _add_common(p)
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--seed", type=_nonnegative_int, default=0)
    p.add_argument("--scenes", type=_positive_int, default=1)
    p.add_argument("--objects", type=_nonnegative_int, default=3, help="Objects per thing class")
    p.add_argument("--classes", type=_positive_int, nargs="+", default=None, help="Thing class IDs to place")
    p.add_argument("--stuff-points", type=_nonnegative_int, default=2000)
    p.add_argument("--no-falloff", action="store_true", help="Constant point density over range")
    p.add_argument("--two-car-gap", type=_positive_float, default=None, help="Emit the two parked cars scene with this gap")

    p = sub.add_parser("bench", help="Measure clustering throughput on generated scans")
    _add_common(p)
    _add_clustering(p)
    p.add_argument("--scenes", type=_positive_int, default=5)
    p.add_argument("--seed", type=_nonnegative_int, default=0)
    p.add_argument("--points", type=_positive_int, default=BENCH_POINTS)
    p.add_argument("--out", default=None, help="Optional directory for bench.csv/bench.yaml")
    return parser


def _manifest(args: argparse.Namespace) -> RunManifest:
    def opt(name: str) -> Optional[Path]:
        value = getattr(args, name, None)
        return Path(value) if value else None

    return RunManifest(
        out_dir=Path(args.out),
        scan_dir=opt("scans"),
        pred_dir=opt("preds"),
        gt_dir=opt("gt"),
        config_path=resolve_config_path(args.config),
        enable_split=not args.no_split,
        mode=getattr(args, "mode", "plain"),
        bins=getattr(args, "bins", None),
        workers=args.workers,
        html=getattr(args, "html", False),
        overrides=_overrides(args),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threshold_mode", None) == "range_proportional" and args.range_coefficient is None:
        parser.error("--threshold-mode range_proportional needs --range-coefficient")
    level = parse_level(args.log_level or os.environ.get(LOG_LEVEL_ENV_VAR))
    setup_logger("src", level=level, log_file=args.log_file)

    try:
        if args.command == "cluster":
            return cmd_cluster(_manifest(args))
        if args.command == "eval":
            return cmd_eval(_manifest(args))
        if args.command == "gen":
            return cmd_gen(args)
        return cmd_bench(args)
    except (LidarClusterError, FileNotFoundError) as exc:
        logger.error("%s", exc)
        return exit_code_for(exc)
    except Exception:
        logger.exception("internal error")
        return exit_code_for(RuntimeError())


if __name__ == "__main__":
    sys.exit(main())
