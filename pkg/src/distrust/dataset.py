"""Tabular ingestion: CSV loading, min-max scaling and one-hot encoding.

Every downstream module works on the encoded matrix ``Dataset.points``.
The ``EncodingMap`` stored on the dataset is what turns a raw query row into
the same coordinate system.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, InputError

ORDINAL = "ordinal"
CATEGORICAL = "categorical"
TARGET = "target"
CLASSIFICATION = "classification"
REGRESSION = "regression"
TASKS = (CLASSIFICATION, REGRESSION)

# auto task detection: integer-valued targets with at most this many levels are classes
MAX_AUTO_CLASSES = 20


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    lo: float | None = None
    hi: float | None = None
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (ORDINAL, CATEGORICAL, TARGET):
            raise ConfigError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == ORDINAL and self.lo is not None and self.hi is not None:
            if not self.lo <= self.hi:
                raise ConfigError(f"column {self.name!r}: min {self.lo} > max {self.hi}")
        if self.kind == CATEGORICAL and self.categories:
            if len(set(self.categories)) != len(self.categories):
                raise ConfigError(f"column {self.name!r}: duplicate categories")

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "lo": self.lo, "hi": self.hi,
                "categories": list(self.categories)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ColumnSpec":
        return cls(d["name"], d["kind"], d.get("lo"), d.get("hi"),
                   tuple(d.get("categories") or ()))


@dataclass(frozen=True)
class RawTable:
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def column(self, name: str) -> list[str]:
        j = self.header.index(name)
        return [r[j] for r in self.rows]


@dataclass(frozen=True)
class EncodingMap:
    """Feature columns in encoded order plus target handling.

    ``features`` holds the completed specs (observed min/max, categories);
    ``target`` the target spec whose ``categories`` are the class labels in
    id order (classification only).
    """

    features: tuple[ColumnSpec, ...]
    target: ColumnSpec | None
    task: str

    @property
    def dim(self) -> int:
        return sum(len(c.categories) if c.kind == CATEGORICAL else 1 for c in self.features)

    @property
    def class_labels(self) -> tuple[str, ...]:
        return self.target.categories if self.target is not None else ()

    def encode_row(self, values: Mapping[str, str] | Sequence) -> np.ndarray:
        if not isinstance(values, Mapping):
            if len(values) != len(self.features):
                raise InputError(
                    f"expected {len(self.features)} feature values, got {len(values)}")
            values = {c.name: v for c, v in zip(self.features, values)}
        out = []
        for col in self.features:
            if col.name not in values:
                raise InputError(f"query is missing column {col.name!r}")
            raw = values[col.name]
            if col.kind == ORDINAL:
                out.append(_scale(_parse_float(raw, col.name), col.lo, col.hi))
            else:
                key = str(raw).strip()
                if key not in col.categories:
                    raise InputError(f"unseen category {key!r} in column {col.name!r}")
                onehot = [0.0] * len(col.categories)
                onehot[col.categories.index(key)] = 1.0
                out.extend(onehot)
        return np.array(out, dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "features": [c.to_dict() for c in self.features],
            "target": self.target.to_dict() if self.target is not None else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EncodingMap":
        tgt = d.get("target")
        return cls(tuple(ColumnSpec.from_dict(c) for c in d["features"]),
                   ColumnSpec.from_dict(tgt) if tgt else None, d["task"])


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    targets: np.ndarray
    task: str
    encoding: EncodingMap = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InputError(f"points must be a non-empty n x d matrix, got shape {pts.shape}")
        tg = np.asarray(self.targets, dtype=np.float64).reshape(-1)
        if tg.shape[0] != pts.shape[0]:
            raise InputError(f"{tg.shape[0]} targets for {pts.shape[0]} rows")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        pts.setflags(write=False)
        tg.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "targets", tg)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def schema(self) -> tuple[ColumnSpec, ...]:
        enc = self.encoding
        return enc.features + ((enc.target,) if enc.target is not None else ())

    @property
    def class_labels(self) -> tuple[str, ...]:
        return self.encoding.class_labels

    def encode_query(self, raw) -> np.ndarray:
        return encode_query(raw, self.encoding)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return replace(self, points=self.points[rows], targets=self.targets[rows])

    @classmethod
    def from_arrays(cls, points, targets, task: str = CLASSIFICATION, *,
                    names: Sequence[str] | None = None, bounds=None,
                    class_labels: Sequence | None = None) -> "Dataset":
        """Build a dataset from a raw numeric matrix.

        ``bounds`` is ``None`` for min-max scaling on the observed range,
        ``"identity"`` for data already in the unit cube, or a sequence of
        ``(lo, hi)`` pairs. For classification, targets are mapped to dense ids
        in first-appearance order unless ``class_labels`` fixes the order.
        """
        raw = np.asarray(points, dtype=np.float64)
        if raw.ndim != 2:
            raise InputError("points must be 2-dimensional")
        d = raw.shape[1]
        names = list(names) if names is not None else [f"x{j + 1}" for j in range(d)]
        if bounds is None:
            bounds = [(float(raw[:, j].min()), float(raw[:, j].max())) for j in range(d)]
        elif bounds == "identity":
            bounds = [(0.0, 1.0)] * d
        feats = tuple(ColumnSpec(nm, ORDINAL, float(lo), float(hi))
                      for nm, (lo, hi) in zip(names, bounds))
        cols = [_scale_column(raw[:, j], c.lo, c.hi) for j, c in enumerate(feats)]
        X = np.column_stack(cols) if cols else raw
        if task == CLASSIFICATION:
            labels = [_label_key(v) for v in targets]
            order = [_label_key(v) for v in class_labels] if class_labels is not None \
                else list(dict.fromkeys(labels))
            ids = {lab: i for i, lab in enumerate(order)}
            missing = [lab for lab in labels if lab not in ids]
            if missing:
                raise InputError(f"target label {missing[0]!r} not among class_labels")
            y = np.array([ids[lab] for lab in labels], dtype=np.float64)
            target = ColumnSpec("y", TARGET, categories=tuple(order))
        else:
            y = np.asarray(targets, dtype=np.float64)
            target = ColumnSpec("y", TARGET)
        return cls(X, y, task, EncodingMap(feats, target, task))


def _label_key(v) -> str:
    if isinstance(v, (float, np.floating)) and float(v).is_integer():
        return str(int(v))
    return str(v).strip()


def _parse_float(text, column: str) -> float:
    if isinstance(text, (int, float, np.integer, np.floating)):
        return float(text)
    try:
        return float(text)
    except (TypeError, ValueError):
        raise InputError(f"column {column!r}: cannot parse {text!r} as a number") from None


def _is_number(text: str) -> bool:
    try:
        v = float(text)
    except ValueError:
        return False
    return math.isfinite(v)


def _scale(v: float, lo: float, hi: float) -> float:
    span = hi - lo
    return (v - lo) / span if span > 0 else 0.0


def _scale_column(col: np.ndarray, lo: float, hi: float) -> np.ndarray:
    span = hi - lo
    if span > 0:
        return (col - lo) / span
    return np.zeros_like(col)


def load_csv(path, target: str, column_kinds: Mapping[str, str] | None = None
             ) -> tuple[RawTable, list[ColumnSpec]]:
    """Read a headed CSV and infer column kinds.

    Numeric-parseable columns become ordinal, anything else categorical,
    unless ``column_kinds`` says otherwise.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}:{lineno}: ragged row ({len(row)} fields, header has {len(header)})")
            if any(not c.strip() for c in row):
                raise InputError(f"{path}:{lineno}: missing value")
            rows.append(tuple(c.strip() for c in row))
    if not rows:
        raise InputError(f"{path}: no data rows")
    if len(set(header)) != len(header):
        raise InputError(f"{path}: duplicate column names")
    if target not in header:
        raise InputError(f"{path}: target column {target!r} not in header")
    table = RawTable(tuple(header), tuple(rows))
    return table, infer_schema(table, target, column_kinds)


def infer_schema(table: RawTable, target: str,
                 column_kinds: Mapping[str, str] | None = None) -> list[ColumnSpec]:
    kinds = dict(column_kinds or {})
    unknown = set(kinds) - set(table.header)
    if unknown:
        raise ConfigError(f"column kinds given for unknown columns: {sorted(unknown)}")
    schema = []
    for name in table.header:
        if name == target:
            schema.append(ColumnSpec(name, TARGET))
            continue
        kind = kinds.get(name)
        if kind is None:
            kind = ORDINAL if all(_is_number(v) for v in table.column(name)) else CATEGORICAL
        schema.append(ColumnSpec(name, kind))
    return schema


def infer_task(values: Iterable[str]) -> str:
    values = list(values)
    if not all(_is_number(v) for v in values):
        return CLASSIFICATION
    nums = [float(v) for v in values]
    if all(x.is_integer() for x in nums) and len(set(nums)) <= MAX_AUTO_CLASSES:
        return CLASSIFICATION
    return REGRESSION


def encode(table: RawTable, schema: Sequence[ColumnSpec], task: str = "auto",
           scaling: str = "minmax") -> Dataset:
    """Encode a raw table into a ``Dataset``.

    ``scaling="identity"`` keeps ordinal values as they are (bounds 0 and 1)
    and rejects values outside the unit interval.
    """
    if scaling not in ("minmax", "identity"):
        raise ConfigError(f"unknown scaling {scaling!r}")
    if len(schema) != len(table.header):
        raise InputError("schema does not match table header")
    target_spec = None
    feats: list[ColumnSpec] = []
    blocks = []
    for spec, name in zip(schema, table.header):
        if spec.name != name:
            raise InputError(f"schema column {spec.name!r} does not match header {name!r}")
        raw = table.column(name)
        if spec.kind == TARGET:
            target_spec = spec
            target_raw = raw
            continue
        if spec.kind == ORDINAL:
            col = np.array([_parse_float(v, name) for v in raw], dtype=np.float64)
            if not np.all(np.isfinite(col)):
                raise InputError(f"column {name!r}: non-finite values")
            if scaling == "identity":
                if col.min() < 0.0 or col.max() > 1.0:
                    raise InputError(f"column {name!r}: values outside [0,1] with identity scaling")
                lo, hi = 0.0, 1.0
            else:
                lo, hi = float(col.min()), float(col.max())
            spec = replace(spec, lo=lo, hi=hi)
            blocks.append(_scale_column(col, lo, hi)[:, None])
        else:
            cats = spec.categories or tuple(dict.fromkeys(raw))
            idx = {c: i for i, c in enumerate(cats)}
            if any(v not in idx for v in raw):
                bad = next(v for v in raw if v not in idx)
                raise InputError(f"unseen category {bad!r} in column {name!r}")
            block = np.zeros((len(raw), len(cats)))
            block[np.arange(len(raw)), [idx[v] for v in raw]] = 1.0
            spec = replace(spec, categories=tuple(cats))
            blocks.append(block)
        feats.append(spec)
    if target_spec is None:
        raise InputError("schema has no target column")
    if not feats:
        raise InputError("table has no feature columns")
    if task == "auto":
        task = infer_task(target_raw)
    if task == CLASSIFICATION:
        labels = target_spec.categories or tuple(dict.fromkeys(target_raw))
        ids = {c: i for i, c in enumerate(labels)}
        y = np.array([ids[v] for v in target_raw], dtype=np.float64)
        target_spec = replace(target_spec, categories=tuple(labels))
    elif task == REGRESSION:
        y = np.array([_parse_float(v, target_spec.name) for v in target_raw])
    else:
        raise ConfigError(f"unknown task {task!r}")
    enc = EncodingMap(tuple(feats), target_spec, task)
    return Dataset(np.hstack(blocks), y, task, enc)


def encode_query(raw, encoding: EncodingMap) -> np.ndarray:
    """Apply a training encoding to one raw row.

    Values outside the training range extrapolate along the same affine map.
    """
    return encoding.encode_row(raw)


def read_queries(path, encoding: EncodingMap) -> tuple[np.ndarray, list[str] | None]:
    """Encode every row of a query CSV. Returns (matrix, raw target column or None)."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            return np.empty((0, encoding.dim)), None
        tname = encoding.target.name if encoding.target is not None else None
        missing = [c.name for c in encoding.features if c.name not in header]
        if missing:
            raise InputError(f"{path}: query file lacks columns {missing}")
        coords, truths = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: ragged row")
            rec = dict(zip(header, (c.strip() for c in row)))
            coords.append(encoding.encode_row(rec))
            if tname in rec:
                truths.append(rec[tname])
    X = np.array(coords, dtype=np.float64).reshape(-1, encoding.dim)
    return X, (truths if tname in header else None)
