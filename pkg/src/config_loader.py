from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from src.errors import ConfigError, ContractViolation

DEFAULT_CONFIG_PATH = Path(__file__).parent / "data" / "semantickitti.yaml"
CONFIG_ENV_VAR = "LIDAR_CLUSTER_CONFIG"

THING = "thing"
STUFF = "stuff"
THRESHOLD_MODES = ("constant", "range_proportional")

_LINE_KEY = "__line__"


@dataclass(frozen=True)
class ClassSpec:
    class_id: int
    name: str
    kind: str
    length: Optional[float] = None
    width: Optional[float] = None

    @property
    def is_thing(self) -> bool:
        return self.kind == THING

    @property
    def threshold(self) -> float:
        # t_c is the smallest side of the reference box
        if self.width is None:
            raise ContractViolation(f"class {self.class_id} ({self.name}) has no reference box")
        return self.width


@dataclass(frozen=True)
class ClassConfig:
    classes: Dict[int, ClassSpec]
    k: int = 32
    margin: float = 0.30
    epsilon: float = 1e-3
    threshold_mode: str = "constant"
    range_coefficient: Optional[float] = None
    ignore_labels: Tuple[int, ...] = (0,)
    min_points: int = 1
    label_map: Dict[int, int] = field(default_factory=dict)
    label_map_inv: Dict[int, int] = field(default_factory=dict)
    dataset: str = "custom"
    source: str = "<memory>"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ContractViolation(f"k must be >= 1, got {self.k}")
        if self.margin < 0:
            raise ContractViolation(f"margin must be >= 0, got {self.margin}")
        if not self.epsilon > 0:
            raise ContractViolation(f"epsilon must be > 0, got {self.epsilon}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ContractViolation(f"unknown threshold mode {self.threshold_mode!r}")
        if self.threshold_mode == "range_proportional" and (self.range_coefficient is None or self.range_coefficient <= 0):
            raise ContractViolation("range_proportional mode needs a positive range_coefficient")
        for spec in self.classes.values():
            if spec.is_thing and (spec.width is None or spec.width <= 0):
                raise ContractViolation(f"thing class {spec.class_id} ({spec.name}) needs a positive box width")

    @property
    def class_ids(self) -> List[int]:
        return sorted(self.classes)

    @property
    def thing_ids(self) -> List[int]:
        return [c for c in self.class_ids if self.classes[c].is_thing]

    @property
    def stuff_ids(self) -> List[int]:
        return [c for c in self.class_ids if not self.classes[c].is_thing]

    def name_of(self, class_id: int) -> str:
        spec = self.classes.get(class_id)
        return spec.name if spec else f"class_{class_id}"

    def require_class(self, class_id: int) -> ClassSpec:
        spec = self.classes.get(int(class_id))
        if spec is None:
            raise ContractViolation(f"class id {class_id} is not in the class table")
        return spec

    def require_thing(self, class_id: int) -> ClassSpec:
        spec = self.require_class(class_id)
        if not spec.is_thing:
            raise ContractViolation(f"class {class_id} ({spec.name}) is a stuff class")
        return spec

    def threshold(self, class_id: int) -> float:
        return self.require_thing(class_id).threshold

    def reference_box(self, class_id: int) -> Tuple[float, float]:
        spec = self.require_thing(class_id)
        return float(spec.length), float(spec.width)

    def with_overrides(self, **overrides: Any) -> "ClassConfig":
        clean = {key: value for key, value in overrides.items() if value is not None}
        return dataclasses.replace(self, **clean) if clean else self

    def to_class_ids(self, raw: np.ndarray) -> np.ndarray:
        """Map raw dataset IDs to class IDs; unmapped IDs become the first ignore label."""
        raw = np.asarray(raw, dtype=np.int64)
        if not self.label_map:
            return raw
        lut = np.full(max(max(self.label_map), int(raw.max(initial=0))) + 1, self.ignore_labels[0], dtype=np.int64)
        for src, dst in self.label_map.items():
            lut[src] = dst
        return lut[raw]

    def to_raw_ids(self, class_ids: np.ndarray) -> np.ndarray:
        class_ids = np.asarray(class_ids, dtype=np.int64)
        if not self.label_map:
            return class_ids
        inverse = self.label_map_inv or _first_raw_per_class(self.label_map)
        lut = np.zeros(max(max(inverse), int(class_ids.max(initial=0))) + 1, dtype=np.int64)
        for dst, src in inverse.items():
            lut[dst] = src
        return lut[class_ids]


def _first_raw_per_class(label_map: Dict[int, int]) -> Dict[int, int]:
    inverse: Dict[int, int] = {}
    for raw in sorted(label_map):
        inverse.setdefault(label_map[raw], raw)
    return inverse


class _LineLoader(yaml.SafeLoader):
    """SafeLoader that records the source line of every mapping."""

    def construct_mapping(self, node, deep=False):
        mapping = super().construct_mapping(node, deep=deep)
        mapping[_LINE_KEY] = node.start_mark.line + 1
        return mapping


def resolve_config_path(config_path: str | Path | None = None) -> Path:
    if config_path:
        return Path(config_path)
    env_path = os.environ.get(CONFIG_ENV_VAR)
    if env_path:
        return Path(env_path)
    return DEFAULT_CONFIG_PATH


def load_class_config(config_path: str | Path | None = None) -> ClassConfig:
    path = resolve_config_path(config_path)
    if not path.exists():
        raise FileNotFoundError(f"Class config not found at: {path}")

    with path.open("r", encoding="utf-8") as f:
        text = f.read()
    return parse_class_config(text, source=str(path))


def parse_class_config(text: str, source: str = "<string>") -> ClassConfig:
    try:
        data = yaml.load(text, Loader=_LineLoader) or {}
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigError(source, mark.line + 1 if mark else None, str(exc.problem or exc)) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(source, None, str(exc)) from exc

    if not isinstance(data, dict):
        raise ConfigError(source, 1, "class configuration must be a mapping")

    top_line = data.get(_LINE_KEY, 1)
    glob = _section(data, "global", source, top_line)
    evaluation = _section(data, "evaluation", source, top_line)

    classes_node = data.get("classes")
    if not isinstance(classes_node, dict) or len(_items(classes_node)) == 0:
        raise ConfigError(source, top_line, "missing or empty 'classes' section")

    classes: Dict[int, ClassSpec] = {}
    for raw_id, entry in _items(classes_node):
        line = entry.get(_LINE_KEY) if isinstance(entry, dict) else classes_node[_LINE_KEY]
        class_id = _as_int(raw_id, source, line, "class id")
        if not isinstance(entry, dict):
            raise ConfigError(source, line, f"class {class_id}: expected a mapping with name/kind/box")
        classes[class_id] = _class_spec(class_id, entry, source, line)

    glob_line = glob.get(_LINE_KEY, top_line)
    threshold_mode = str(glob.get("threshold_mode", "constant"))
    if threshold_mode not in THRESHOLD_MODES:
        raise ConfigError(source, glob_line, f"threshold_mode must be one of {THRESHOLD_MODES}, got {threshold_mode!r}")

    range_coefficient = glob.get("range_coefficient")
    if range_coefficient is not None:
        range_coefficient = _as_float(range_coefficient, source, glob_line, "range_coefficient")

    eval_line = evaluation.get(_LINE_KEY, top_line)
    ignore = evaluation.get("ignore_labels", [0])
    if not isinstance(ignore, list) or not ignore:
        raise ConfigError(source, eval_line, "ignore_labels must be a non-empty list")
    ignore_labels = tuple(_as_int(v, source, eval_line, "ignore label") for v in ignore)

    overlap = set(ignore_labels) & set(classes)
    if overlap:
        raise ConfigError(source, eval_line, f"ignore labels {sorted(overlap)} are also declared as classes")

    label_map = _int_map(data.get("label_map"), source, top_line, "label_map")
    label_map_inv = _int_map(data.get("label_map_inv"), source, top_line, "label_map_inv")
    known = set(classes) | set(ignore_labels)
    for raw_id, class_id in label_map.items():
        if class_id not in known:
            raise ConfigError(source, data["label_map"][_LINE_KEY], f"label_map sends {raw_id} to unknown class {class_id}")

    try:
        return ClassConfig(
            classes=classes,
            k=_as_int(glob.get("k", 32), source, glob_line, "k"),
            margin=_as_float(glob.get("margin", 0.30), source, glob_line, "margin"),
            epsilon=_as_float(glob.get("epsilon", 1e-3), source, glob_line, "epsilon"),
            threshold_mode=threshold_mode,
            range_coefficient=range_coefficient,
            ignore_labels=ignore_labels,
            min_points=_as_int(evaluation.get("min_points", 1), source, eval_line, "min_points"),
            label_map=label_map,
            label_map_inv=label_map_inv,
            dataset=str(data.get("dataset", "custom")),
            source=source,
        )
    except ContractViolation as exc:
        raise ConfigError(source, glob_line, str(exc)) from exc


def _items(mapping: Dict[Any, Any]) -> List[Tuple[Any, Any]]:
    return [(k, v) for k, v in mapping.items() if k != _LINE_KEY]


def _section(data: Dict[str, Any], name: str, source: str, line: int) -> Dict[str, Any]:
    section = data.get(name)
    if section is None:
        return {_LINE_KEY: line}
    if not isinstance(section, dict):
        raise ConfigError(source, line, f"'{name}' must be a mapping")
    return section


def _class_spec(class_id: int, entry: Dict[str, Any], source: str, line: int) -> ClassSpec:
    name = str(entry.get("name", f"class_{class_id}"))
    kind = str(entry.get("kind", "")).lower()
    if kind not in (THING, STUFF):
        raise ConfigError(source, line, f"class {class_id} ({name}): kind must be 'thing' or 'stuff'")

    box = entry.get("box")
    if kind == STUFF:
        if box is not None:
            raise ConfigError(source, line, f"class {class_id} ({name}): stuff classes take no box")
        return ClassSpec(class_id=class_id, name=name, kind=kind)

    if not isinstance(box, list) or len(box) != 2:
        raise ConfigError(source, line, f"class {class_id} ({name}): box must be [length, width] in meters")
    sides = sorted((_as_float(v, source, line, "box side") for v in box), reverse=True)
    if not all(math.isfinite(s) and s > 0 for s in sides):
        raise ConfigError(source, line, f"class {class_id} ({name}): box sides must be positive")
    return ClassSpec(class_id=class_id, name=name, kind=kind, length=sides[0], width=sides[1])


def _int_map(node: Any, source: str, line: int, what: str) -> Dict[int, int]:
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigError(source, line, f"'{what}' must be a mapping")
    node_line = node.get(_LINE_KEY, line)
    return {_as_int(k, source, node_line, what): _as_int(v, source, node_line, what) for k, v in _items(node)}


def _as_int(value: Any, source: str, line: int, what: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(source, line, f"{what} must be an integer, got {value!r}")
    try:
        as_int = int(value)
    except (TypeError, ValueError):
        raise ConfigError(source, line, f"{what} must be an integer, got {value!r}") from None
    if isinstance(value, float) and as_int != value:
        raise ConfigError(source, line, f"{what} must be an integer, got {value!r}")
    return as_int


def _as_float(value: Any, source: str, line: int, what: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(source, line, f"{what} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(source, line, f"{what} must be a number, got {value!r}") from None
