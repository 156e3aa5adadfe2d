from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import pandas as pd
import yaml

from src.errors import DataIOError
from src.evaluation.binned import Bin, bin_label
from src.evaluation.panoptic import PanopticReport


def _clean(value: float) -> Optional[float]:
    return None if value is None or math.isnan(value) else round(float(value), 6)


def report_key_values(
    report: PanopticReport, binned: Optional[Sequence[Tuple[Bin, PanopticReport]]] = None, **meta: Any
) -> Dict[str, Any]:
    """Flat, machine-readable form of a report: aggregates in percent, per-class scores as fractions."""
    data: Dict[str, Any] = dict(meta)
    data["scans"] = report.scans
    data["aggregates"] = {key: _clean(value) for key, value in report.aggregates().items()}
    data["classes"] = {
        c.name: {
            "id": c.class_id,
            "kind": c.kind,
            "pq": _clean(c.pq) if c.present else None,
            "sq": _clean(c.sq) if c.present else None,
            "rq": _clean(c.rq) if c.present else None,
            "iou": _clean(c.iou) if c.iou is not None else None,
            "tp": c.tp,
            "fp": c.fp,
            "fn": c.fn,
        }
        for c in report.classes.values()
    }
    if binned:
        data["bins"] = {bin_label(b): {k: _clean(v) for k, v in r.aggregates().items()} for b, r in binned}
    return data


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"{path}: {exc}") from exc
    return path


def write_key_values(data: Dict[str, Any], path: str | Path) -> Path:
    return _write(Path(path), yaml.safe_dump(data, sort_keys=False))


def write_class_csv(report: PanopticReport, path: str | Path) -> Path:
    return _write(Path(path), report.to_frame().to_csv(float_format="%.4f"))


def write_text(text: str, path: str | Path) -> Path:
    return _write(Path(path), text)


def timing_frame(stems: Sequence[str], seconds: Sequence[float]) -> pd.DataFrame:
    return pd.DataFrame({"scan": list(stems), "seconds": list(seconds)}).set_index("scan")
