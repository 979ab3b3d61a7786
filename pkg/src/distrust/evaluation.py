"""Distrust-versus-model-failure evaluation.

Queries are bucketed by SDT or WDT into ten intervals of width 0.1 and each
bucket gets the external model's accuracy, F1, FPR and FNR (classification)
or RSS (regression). A Spearman correlation between bucket index and error
summarises whether higher distrust goes with more failures.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .dataset import CLASSIFICATION, REGRESSION, Dataset
from .errors import ConfigError, InputError
from .knn_index import KnnIndex

REPORT_VERSION = 1
N_BUCKETS = 10
MEASURES = ("sdt", "wdt")


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float

    def contains(self, X: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=np.float64)
        return np.sum((X - c) ** 2, axis=1) <= self.radius ** 2


@dataclass(frozen=True)
class Polygon:
    vertices: tuple

    def contains(self, X: np.ndarray) -> np.ndarray:
        from matplotlib.path import Path as MplPath
        return MplPath(np.asarray(self.vertices, dtype=np.float64)).contains_points(X)


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 1000
    mean: tuple = (0.0, 0.0)
    cov: tuple = ((6.0, 4.0), (4.0, 3.0))
    region: Disk | Polygon = field(default_factory=lambda: Disk((1.0, 1.5), 2.0))
    seed: int = 42
    grid: int = 80

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
            raise ConfigError("covariance must be a symmetric 2x2 matrix")
        if np.any(np.linalg.eigvalsh(cov) <= 0):
            raise ConfigError("covariance must be positive definite")
        if self.n < 2:
            raise ConfigError("need at least 2 samples")


def gen_synthetic(spec: SyntheticSpec | None = None):
    """Gaussian training sample labelled by a ground-truth region plus a
    uniform ``grid x grid`` query lattice over the unit square.

    Label -1 inside the region, +1 outside. The lattice lives in the encoded
    (min-max scaled) space and is labelled by mapping it back to raw
    coordinates. Returns ``(dataset, grid_points, grid_labels)`` where the
    grid labels are class ids of ``dataset``.
    """
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(spec.seed)
    X = rng.multivariate_normal(spec.mean, spec.cov, size=spec.n)
    y = np.where(spec.region.contains(X), -1, 1)
    ds = Dataset.from_arrays(X, y, CLASSIFICATION, class_labels=["-1", "1"])
    g = (np.arange(spec.grid) + 0.5) / spec.grid
    G = np.array([(a, b) for b in g for a in g])
    lo = np.array([c.lo for c in ds.encoding.features])
    hi = np.array([c.hi for c in ds.encoding.features])
    raw = lo + G * (hi - lo)
    gy = np.where(spec.region.contains(raw), 0, 1)
    return ds, G, gy


def baseline_predict(dataset: Dataset, queries, task: str | None = None, k: int = 10,
                     metric: str = "euclidean", index: KnnIndex | None = None) -> np.ndarray:
    """k-NN majority vote (class ids, ties to the lower id) or k-NN mean."""
    task = task or dataset.task
    index = index or KnnIndex(dataset.points, metric)
    idx, _ = index.knn_batch(np.asarray(queries, dtype=np.float64), k)
    y = dataset.targets[idx]
    if task == REGRESSION:
        return y.mean(axis=1)
    n_classes = max(len(dataset.class_labels), int(dataset.targets.max()) + 1)
    counts = np.zeros((len(y), n_classes), dtype=np.int64)
    for j in range(k):
        np.add.at(counts, (np.arange(len(y)), y[:, j].astype(np.int64)), 1)
    return np.argmax(counts, axis=1)


@dataclass
class Bucket:
    lo: float
    hi: float
    count: int = 0
    accuracy: float | None = None
    f1: float | None = None
    fpr: float | None = None
    fnr: float | None = None
    rss: float | None = None
    mean_rss: float | None = None

    @property
    def error(self) -> float | None:
        if self.accuracy is not None:
            return 1.0 - self.accuracy
        return self.mean_rss

    @property
    def label(self) -> str:
        close = "]" if self.hi >= 1.0 else ")"
        return f"[{self.lo:.1f},{self.hi:.1f}{close}"


@dataclass
class BucketReport:
    measure: str
    task: str
    buckets: list
    spearman_rho: float | None
    n_queries: int
    positive: int | None = None
    config: dict = field(default_factory=dict)

    def nonempty(self) -> list:
        return [b for b in self.buckets if b.count > 0]

    def to_dict(self) -> dict:
        rows = []
        for i, b in enumerate(self.buckets):
            row = {"bucket": i, "range": b.label, "count": b.count}
            if self.task == CLASSIFICATION:
                row.update(accuracy=b.accuracy, f1=b.f1, fpr=b.fpr, fnr=b.fnr)
            else:
                row.update(rss=b.rss, mean_rss=b.mean_rss)
            rows.append(row)
        return {"report_version": REPORT_VERSION, "measure": self.measure, "task": self.task,
                "n_queries": self.n_queries, "positive": self.positive,
                "spearman_rho": self.spearman_rho, "buckets": rows, "config": self.config}


def bucket_index(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    return np.clip(np.floor(v * N_BUCKETS), 0, N_BUCKETS - 1).astype(np.int64)


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else 0.0


def bucketize(scores, measure: str, predictions, truths, task: str = CLASSIFICATION,
              positive: int = 1) -> BucketReport:
    """Group queries by distrust and score the model within each bucket.

    ``scores`` may be DistrustScore records or plain floats. For
    classification, ``positive`` names the class treated as positive for
    F1/FPR/FNR.
    """
    if measure not in MEASURES:
        raise ConfigError(f"measure must be one of {MEASURES}")
    vals = np.array([getattr(s, measure) if hasattr(s, measure) else float(s) for s in scores],
                    dtype=np.float64)
    pred = np.asarray(predictions)
    true = np.asarray(truths)
    if not len(vals) == len(pred) == len(true):
        raise InputError(f"length mismatch: {len(vals)} scores, {len(pred)} predictions, "
                         f"{len(true)} truths")
    which = bucket_index(vals)
    buckets = []
    for i in range(N_BUCKETS):
        b = Bucket(i / N_BUCKETS, (i + 1) / N_BUCKETS)
        sel = which == i
        b.count = int(sel.sum())
        if b.count:
            p, t = pred[sel], true[sel]
            if task == CLASSIFICATION:
                b.accuracy = float(np.mean(p == t))
                tp = int(np.sum((p == positive) & (t == positive)))
                fp = int(np.sum((p == positive) & (t != positive)))
                fn = int(np.sum((p != positive) & (t == positive)))
                tn = int(np.sum((p != positive) & (t != positive)))
                b.f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else None
                b.fpr = _ratio(fp, fp + tn)
                b.fnr = _ratio(fn, fn + tp)
            elif task == REGRESSION:
                res = (p.astype(np.float64) - t.astype(np.float64)) ** 2
                b.rss = float(res.sum())
                b.mean_rss = float(res.mean())
            else:
                raise ConfigError(f"unknown task {task!r}")
        buckets.append(b)
    filled = [(i, b.error) for i, b in enumerate(buckets) if b.count]
    rho = None
    if len(filled) >= 2:
        xs, ys = zip(*filled)
        if len(set(ys)) > 1:
            r = spearmanr(xs, ys).statistic
            rho = None if math.isnan(r) else float(r)
    return BucketReport(measure, task, buckets, rho, int(len(vals)),
                        positive if task == CLASSIFICATION else None)


def render_report(report: BucketReport, path) -> list[Path]:
    """Write ``<path>.json``, ``<path>.csv`` (non-empty buckets) and ``<path>.svg``."""
    from .plotting import bucket_chart

    base = Path(path)
    if base.suffix in (".json", ".csv", ".svg"):
        base = base.with_suffix("")
    try:
        base.parent.mkdir(parents=True, exist_ok=True)
        jpath = base.with_suffix(".json")
        jpath.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        cpath = base.with_suffix(".csv")
        fields = ["bucket", "range", "count"] + (
            ["accuracy", "f1", "fpr", "fnr"] if report.task == CLASSIFICATION
            else ["rss", "mean_rss"])
        with cpath.open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
            w.writeheader()
            for row in report.to_dict()["buckets"]:
                if row["count"]:
                    w.writerow({k: ("" if v is None else v) for k, v in row.items()})
        spath = bucket_chart(report, base.with_suffix(".svg"))
    except OSError as exc:
        raise InputError(f"cannot write report to {base}: {exc}") from exc
    return [jpath, cpath, spath]


def read_predictions(path) -> tuple[list[int], list[str], list[str] | None]:
    """Parse a ``row_id,prediction[,truth]`` CSV."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "row_id" not in cols or "prediction" not in cols:
            raise InputError(f"{path}: need columns row_id,prediction[,truth]")
        has_truth = "truth" in cols
        ids, preds, truths = [], [], []
        for row in reader:
            try:
                ids.append(int(row["row_id"]))
            except ValueError:
                raise InputError(f"{path}: bad row_id {row['row_id']!r}") from None
            preds.append(row["prediction"].strip())
            if has_truth:
                truths.append(row["truth"].strip())
    return ids, preds, (truths if has_truth else None)
