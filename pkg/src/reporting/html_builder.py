from __future__ import annotations

import html
import math
import re
from typing import List, Optional

import pandas as pd

CELL = "border:1px solid #ddd;padding:8px;"
HEAD = "background:#f5f5f7;color:#111;padding:10px;border:1px solid #ddd;"
H2 = "color:#1f1f1f;font-size:20px;margin-top:26px;margin-bottom:12px;padding-bottom:5px;border-bottom:1px solid #ccc;"


def markdown_to_basic_html(markdown_text: str, class_frame: Optional[pd.DataFrame] = None) -> str:
    """Render the markdown report as a standalone page; pipe tables become HTML tables."""
    out = [
        "<html><body style='font-family:Arial,sans-serif;line-height:1.6;color:#1f1f1f;background:#ffffff;max-width:960px;margin:0 auto;padding:20px;'>",
    ]
    table: List[str] = []

    for line in markdown_text.splitlines() + [""]:
        if line.startswith("|"):
            table.append(line)
            continue
        if table:
            out.append(_pipe_table_html(table))
            table = []
        if line.startswith("# "):
            out.append(f"<div style='font-size:28px;text-align:center;margin-bottom:24px;font-weight:700;'>{html.escape(line[2:])}</div>")
        elif line.startswith("## "):
            out.append(f"<h2 style='{H2}'>{html.escape(line[3:])}</h2>")
        elif line.strip():
            out.append(f"<p style='margin-bottom:12px;'>{_bold(line)}</p>")

    if class_frame is not None and not class_frame.empty:
        out.append(f"<h2 style='{H2}'>PQ BY CLASS</h2>")
        out.append(_pq_bars_html(class_frame))

    out.append("</body></html>")
    return "\n".join(out)


def _bold(text: str) -> str:
    return re.sub(r"\*\*(.+?)\*\*", r"<strong>\1</strong>", html.escape(text))


def _cells(line: str) -> List[str]:
    return [c.strip() for c in line.strip().strip("|").split("|")]


def _pipe_table_html(lines: List[str]) -> str:
    header, body = _cells(lines[0]), [_cells(x) for x in lines[2:]]
    rows = ["<table style='width:100%;border-collapse:collapse;margin:18px 0;font-size:14px;'>"]
    rows.append("<tr>" + "".join(f"<th style='{HEAD}text-align:left;'>{html.escape(h)}</th>" for h in header) + "</tr>")
    for cells in body:
        tds = [f"<td style='{CELL}'><span style='font-weight:700;'>{html.escape(cells[0])}</span></td>"]
        tds += [f"<td style='{CELL}text-align:right;'>{html.escape(c)}</td>" for c in cells[1:]]
        rows.append("<tr>" + "".join(tds) + "</tr>")
    rows.append("</table>")
    return "\n".join(rows)


def _pq_bars_html(frame: pd.DataFrame) -> str:
    rows = ["<table style='width:100%;border-collapse:collapse;font-size:13px;'>"]
    for name, row in frame.sort_values("PQ %", ascending=False).iterrows():
        pq = float(row["PQ %"])
        if math.isnan(pq):
            continue
        color = "#2e7d32" if row["Kind"] == "thing" else "#1565c0"
        rows.append(
            "<tr>"
            f"<td style='padding:4px;width:160px;'>{html.escape(str(name))}</td>"
            f"<td style='padding:4px;'><div style='background:{color};height:12px;width:{pq:.1f}%;'></div></td>"
            f"<td style='padding:4px;text-align:right;width:70px;'>{pq:.2f}%</td>"
            "</tr>"
        )
    rows.append("</table>")
    return "\n".join(rows)
