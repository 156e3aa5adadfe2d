from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.errors import (
    ContractViolation,
    DataIOError,
    FormatError,
    MisalignedFileError,
    ShortFileError,
    UnpairedFilesError,
)

SCAN_DTYPE = np.dtype("<f4")
LABEL_DTYPE = np.dtype("<u4")
SCAN_RECORD = 4 * SCAN_DTYPE.itemsize
LABEL_RECORD = LABEL_DTYPE.itemsize
ID_LIMIT = 1 << 16

SCAN_SUFFIX = ".bin"
LABEL_SUFFIX = ".label"


@dataclass
class ScanRecords:
    xyz: np.ndarray
    intensity: np.ndarray

    def __len__(self) -> int:
        return len(self.xyz)


def _file_size(path: Path) -> int:
    try:
        return path.stat().st_size
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise DataIOError(f"{path}: {exc}") from exc


def _read_array(path: Path, dtype: np.dtype) -> np.ndarray:
    try:
        return np.fromfile(path, dtype=dtype)
    except OSError as exc:
        raise DataIOError(f"{path}: {exc}") from exc


def _check_count(path: Path, count: int, expected: Optional[int], what: str) -> None:
    if expected is None or count == expected:
        return
    if count < expected:
        raise ShortFileError(f"{path}: {count} {what} records, paired file has {expected}")
    raise FormatError(f"{path}: {count} {what} records, paired file has only {expected}")


def read_scan(path: str | Path, expected_points: Optional[int] = None) -> ScanRecords:
    """Read a KITTI-style scan: little-endian float32 (x, y, z, intensity) per point."""
    path = Path(path)
    size = _file_size(path)
    if size % SCAN_RECORD:
        raise MisalignedFileError(f"{path}: size {size} is not a multiple of {SCAN_RECORD} bytes")
    records = _read_array(path, SCAN_DTYPE).reshape(-1, 4)
    _check_count(path, len(records), expected_points, "point")
    return ScanRecords(xyz=records[:, :3], intensity=records[:, 3])


def write_scan(xyz: np.ndarray, path: str | Path, intensity: Optional[np.ndarray] = None) -> None:
    xyz = np.asarray(xyz, dtype=SCAN_DTYPE).reshape(-1, 3)
    if intensity is None:
        intensity = np.zeros(len(xyz), dtype=SCAN_DTYPE)
    intensity = np.asarray(intensity, dtype=SCAN_DTYPE).reshape(-1)
    if len(intensity) != len(xyz):
        raise ContractViolation(f"{len(xyz)} points but {len(intensity)} intensities")
    records = np.empty((len(xyz), 4), dtype=SCAN_DTYPE)
    records[:, :3] = xyz
    records[:, 3] = intensity
    _write_bytes(Path(path), records.tobytes())


def read_labels(path: str | Path, expected_points: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(semantic, instance) from the low and high 16 bits of each uint32."""
    path = Path(path)
    size = _file_size(path)
    if size % LABEL_RECORD:
        raise MisalignedFileError(f"{path}: size {size} is not a multiple of {LABEL_RECORD} bytes")
    values = _read_array(path, LABEL_DTYPE)
    _check_count(path, len(values), expected_points, "label")
    return (values & 0xFFFF).astype(np.int64), (values >> 16).astype(np.int64)


def pack_labels(semantic: np.ndarray, instance: np.ndarray) -> np.ndarray:
    semantic = np.asarray(semantic, dtype=np.int64).reshape(-1)
    instance = np.asarray(instance, dtype=np.int64).reshape(-1)
    if len(semantic) != len(instance):
        raise ContractViolation(f"{len(semantic)} semantic labels but {len(instance)} instance labels")
    for name, arr in (("semantic", semantic), ("instance", instance)):
        bad = np.flatnonzero((arr < 0) | (arr >= ID_LIMIT))
        if len(bad):
            raise ContractViolation(f"{name} id {int(arr[bad[0]])} at index {int(bad[0])} does not fit in 16 bits")
    return (semantic | (instance << 16)).astype(LABEL_DTYPE)


def write_labels(semantic: np.ndarray, instance: np.ndarray, path: str | Path) -> None:
    _write_bytes(Path(path), pack_labels(semantic, instance).tobytes())


def _write_bytes(path: Path, payload: bytes) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as exc:
        raise DataIOError(f"{path}: {exc}") from exc


def list_stems(directory: str | Path, suffix: str) -> Dict[str, Path]:
    directory = Path(directory)
    return {p.stem: p for p in sorted(directory.glob(f"*{suffix}"))}


def pair_files(scan_dir: str | Path, label_dirs: Dict[str, str | Path]) -> List[Tuple[str, Path, Dict[str, Path]]]:
    """Match scans to label files by stem; raises listing every missing file."""
    scans = list_stems(scan_dir, SCAN_SUFFIX)
    labels = {name: list_stems(d, LABEL_SUFFIX) for name, d in label_dirs.items()}

    missing: List[str] = []
    for name, found in labels.items():
        missing += [str(Path(label_dirs[name]) / f"{stem}{LABEL_SUFFIX}") for stem in scans if stem not in found]
        missing += [str(Path(scan_dir) / f"{stem}{SCAN_SUFFIX}") for stem in found if stem not in scans]
    if missing:
        raise UnpairedFilesError(sorted(set(missing)))

    return [(stem, path, {name: labels[name][stem] for name in labels}) for stem, path in scans.items()]
