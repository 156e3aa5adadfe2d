from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

import pandas as pd

from src.evaluation.binned import Bin, bin_label
from src.evaluation.panoptic import PanopticReport

SCORE_COLUMNS = ["PQ %", "SQ %", "RQ %", "IoU %"]
COUNT_COLUMNS = ["TP", "FP", "FN"]
AGGREGATE_LABELS = [("PQ", "PQ"), ("PQ_dagger", "PQ†"), ("RQ", "RQ"), ("SQ", "SQ"), ("mIoU", "mIoU"), ("PQ_Th", "PQ_Th"), ("PQ_St", "PQ_St")]


def _num(value: float) -> str:
    return "N/A" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.2f}"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> List[str]:
    out = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
    out += ["| " + " | ".join(row) + " |" for row in rows]
    return out


def _class_rows(frame: pd.DataFrame) -> List[List[str]]:
    rows = []
    for name, row in frame.iterrows():
        rows.append([str(name)] + [_num(float(row[c])) for c in SCORE_COLUMNS] + [str(int(row[c])) for c in COUNT_COLUMNS])
    return rows


def _rank(frame: pd.DataFrame, top_n: int = 3) -> Tuple[pd.Series, pd.Series]:
    scored = frame["PQ %"].dropna().sort_values(ascending=False)
    if scored.empty:
        return pd.Series(dtype=float), pd.Series(dtype=float)
    return scored.head(top_n), scored.tail(top_n).sort_values()


def _fmt(series: pd.Series) -> str:
    if series.empty:
        return "N/A"
    return ", ".join(f"**{k}** ({v:.2f}%)" for k, v in series.items())


def aggregate_table(report: PanopticReport) -> List[str]:
    values = report.aggregates()
    return _table([label for _, label in AGGREGATE_LABELS], [[_num(values[key]) for key, _ in AGGREGATE_LABELS]])


def generate_report_markdown(
    report: PanopticReport,
    dataset: str = "custom",
    mode: str = "plain",
    binned: Optional[Sequence[Tuple[Bin, PanopticReport]]] = None,
) -> str:
    frame = report.to_frame()
    lines = [
        "# Panoptic Evaluation Report",
        f"**Dataset:** {dataset} | **Mode:** {mode} | **Scans:** {report.scans}",
        "",
        "## AGGREGATES",
        *aggregate_table(report),
    ]

    if not frame.empty:
        top, bottom = _rank(frame)
        lines += ["", f"Strongest classes by PQ: {_fmt(top)}. Weakest: {_fmt(bottom)}."]

    header = ["Class", *SCORE_COLUMNS, *COUNT_COLUMNS]
    for kind, title in (("thing", "THING CLASSES"), ("stuff", "STUFF CLASSES")):
        subset = frame[frame["Kind"] == kind] if not frame.empty else frame
        if subset.empty:
            continue
        lines += ["", f"## {title}", *_table(header, _class_rows(subset))]

    if binned:
        rows = [[bin_label(b), *(_num(r.aggregates()[key]) for key, _ in AGGREGATE_LABELS), str(r.tp)] for b, r in binned]
        lines += ["", "## DISTANCE BINS", *_table(["Range", *(label for _, label in AGGREGATE_LABELS), "TP"], rows)]

    return "\n".join(lines) + "\n"


def timing_markdown(timings: pd.Series, split: bool) -> str:
    if timings.empty:
        return "# Clustering Timing\nNo scans processed.\n"
    mean = float(timings.mean())
    rows = [
        ["Scans", str(len(timings))],
        ["Box splitting", "on" if split else "off"],
        ["Mean time (ms)", f"{mean * 1000:.2f}"],
        ["Max time (ms)", f"{float(timings.max()) * 1000:.2f}"],
        ["Throughput (Hz)", f"{1.0 / mean:.2f}" if mean > 0 else "inf"],
    ]
    return "\n".join(["# Clustering Timing", *_table(["Metric", "Value"], rows)]) + "\n"
