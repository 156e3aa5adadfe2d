from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from src.clustering.pipeline import InstanceLabeling, PointCloud
from src.errors import ContractViolation, DataIOError, TextSceneError

COMMENT = "#"


@dataclass
class TextScene:
    cloud: PointCloud
    instance: Optional[np.ndarray] = None

    @property
    def labels(self) -> Optional[InstanceLabeling]:
        if self.instance is None:
            return None
        return InstanceLabeling(self.cloud.semantic, self.instance)


def parse_text_scene(text: str, source: str = "<string>") -> TextScene:
    """One point per line: ``x y z semantic [instance]``; blank lines and '#' comments skipped."""
    rows: List[List[str]] = []
    lines: List[int] = []
    width: Optional[int] = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = raw.split(COMMENT, 1)[0].strip()
        if not content:
            continue
        fields = content.split()
        if len(fields) not in (4, 5):
            raise TextSceneError(source, lineno, f"expected 4 or 5 fields, got {len(fields)}")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise TextSceneError(source, lineno, f"expected {width} fields like the first point, got {len(fields)}")
        rows.append(fields)
        lines.append(lineno)

    xyz = np.empty((len(rows), 3), dtype=np.float64)
    labels = np.zeros((len(rows), 2), dtype=np.int64)
    for i, (fields, lineno) in enumerate(zip(rows, lines)):
        try:
            xyz[i] = [float(v) for v in fields[:3]]
        except ValueError:
            raise TextSceneError(source, lineno, f"bad coordinate in {' '.join(fields[:3])!r}") from None
        if not np.isfinite(xyz[i]).all():
            raise TextSceneError(source, lineno, "non-finite coordinate")
        try:
            ids = [int(v) for v in fields[3:]]
        except ValueError:
            raise TextSceneError(source, lineno, f"bad label in {' '.join(fields[3:])!r}") from None
        if any(v < 0 for v in ids):
            raise TextSceneError(source, lineno, "labels must be non-negative")
        try:
            labels[i, : len(ids)] = ids
        except OverflowError:
            raise TextSceneError(source, lineno, f"label out of range in {' '.join(fields[3:])!r}") from None

    instance = labels[:, 1].copy() if width == 5 else None
    return TextScene(cloud=PointCloud(xyz, labels[:, 0].copy()), instance=instance)


def read_text_scene(path: str | Path) -> TextScene:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise DataIOError(f"{path}: {exc}") from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TextSceneError(str(path), data.count(b"\n", 0, exc.start) + 1, "not valid UTF-8") from None
    return parse_text_scene(text, source=str(path))


def format_text_scene(cloud: PointCloud, instance: Optional[np.ndarray] = None, header: str = "") -> str:
    if instance is not None:
        instance = np.asarray(instance, dtype=np.int64).reshape(-1)
        if len(instance) != len(cloud):
            raise ContractViolation(f"{len(cloud)} points but {len(instance)} instance labels")

    out = [f"{COMMENT} {line}" for line in header.splitlines()]
    for i, (x, y, z) in enumerate(cloud.xyz.tolist()):
        # repr keeps every float64 bit
        row = f"{x!r} {y!r} {z!r} {int(cloud.semantic[i])}"
        if instance is not None:
            row += f" {int(instance[i])}"
        out.append(row)
    return "\n".join(out) + "\n"


def write_text_scene(cloud: PointCloud, path: str | Path, instance: Optional[np.ndarray] = None, header: str = "") -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_text_scene(cloud, instance, header), encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"{path}: {exc}") from exc
