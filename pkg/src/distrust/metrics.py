"""Distance functions used for k-vicinity computations.

All metrics are evaluated through :func:`row_distances`, which both the tree
and the linear-scan search paths call, so a given pair of points always gets
the same bit pattern regardless of how it was reached.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, InputError

METRICS = ("euclidean", "cityblock", "manhattan", "chebyshev", "canberra", "braycurtis")

# Minkowski order for metrics a kd-tree can prune with; others are scanned.
TREE_P = {"euclidean": 2.0, "cityblock": 1.0, "manhattan": 1.0, "chebyshev": np.inf}


def check_metric(metric: str) -> str:
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    return metric


def row_distances(X: np.ndarray, q: np.ndarray, metric: str) -> np.ndarray:
    """Distance from ``q`` to each point along the last axis of ``X``.

    ``X`` may have any leading shape; ``q`` broadcasts against it.
    """
    diff = X - q
    if metric == "euclidean":
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if metric in ("cityblock", "manhattan"):
        return np.sum(np.abs(diff), axis=-1)
    if metric == "chebyshev":
        return np.max(np.abs(diff), axis=-1)
    if metric == "canberra":
        num = np.abs(diff)
        den = np.abs(X) + np.abs(q)
        with np.errstate(invalid="ignore", divide="ignore"):
            terms = np.where(den > 0, num / den, 0.0)
        return np.sum(terms, axis=-1)
    if metric == "braycurtis":
        num = np.sum(np.abs(diff), axis=-1)
        den = np.sum(np.abs(X + q), axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(den > 0, num / den, 0.0)
    raise ConfigError(f"unknown metric {metric!r}")


def distance(a, b, metric: str = "euclidean") -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(row_distances(a[None, :], b, check_metric(metric))[0])
