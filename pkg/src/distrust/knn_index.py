"""Exact k-nearest-neighbor search.

Metric distances (euclidean, cityblock/manhattan, chebyshev) go through a
kd-tree; canberra and braycurtis are scanned linearly because the tree's
pruning bounds do not hold for them. In both cases the final ranking is done
on distances from :func:`distrust.metrics.row_distances` with ties broken by
row id, so tree and scan results are identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, InputError
from .metrics import TREE_P, check_metric, row_distances

TREE = "tree"
LINEAR = "linear"

# extra candidates requested from the tree so boundary ties rarely need a fallback
_SLACK = 1
_CHUNK = 4096
_SCAN_ELEMENTS = 1 << 21
# relative guard between tree-reported and recomputed distances
_GUARD = 1e-9


@dataclass(frozen=True)
class Neighborhood:
    indices: np.ndarray
    distances: np.ndarray

    @property
    def radius(self) -> float:
        return float(self.distances[-1])


def _rank(ids: np.ndarray, dist: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((ids, dist))[:k]
    return ids[order], dist[order]


def linear_knn(points: np.ndarray, q: np.ndarray, k: int, metric: str,
               exclude: int | None = None) -> Neighborhood:
    """Reference exhaustive search; also the oracle for the tree path."""
    dist = row_distances(points, q, metric)
    ids = np.arange(points.shape[0])
    if exclude is not None:
        keep = ids != exclude
        ids, dist = ids[keep], dist[keep]
    idx, dd = _rank(ids, dist, k)
    return Neighborhood(idx, dd)


class KnnIndex:
    """Immutable k-NN index over a fixed point matrix."""

    def __init__(self, points: np.ndarray, metric: str = "euclidean",
                 strategy: str | None = None, workers: int = 1):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InputError("cannot index an empty dataset")
        self.metric = check_metric(metric)
        if strategy is None:
            strategy = TREE if metric in TREE_P else LINEAR
        if strategy == TREE and metric not in TREE_P:
            raise ConfigError(f"metric {metric!r} cannot use the tree strategy")
        if strategy not in (TREE, LINEAR):
            raise ConfigError(f"unknown strategy {strategy!r}")
        self.strategy = strategy
        self.points = pts
        self.workers = workers
        self._tree = cKDTree(pts, leafsize=16, balanced_tree=True, compact_nodes=True) \
            if strategy == TREE else None
        self._p = TREE_P.get(metric)

    @classmethod
    def build(cls, dataset, metric: str = "euclidean", **kw) -> "KnnIndex":
        return cls(dataset.points, metric, **kw)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def _check(self, k: int, excluding: bool):
        limit = self.n - (1 if excluding else 0)
        if not 1 <= k <= limit:
            raise ConfigError(f"k={k} out of range [1, {limit}]")

    def knn(self, q, k: int, exclude: int | None = None) -> Neighborhood:
        q = np.asarray(q, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.d:
            raise InputError(f"query has dimension {q.shape[0]}, index has {self.d}")
        idx, dist = self.knn_batch(q[None, :], k,
                                   None if exclude is None else np.array([exclude]))
        return Neighborhood(idx[0], dist[0])

    def kvicinity_radius(self, q, k: int, exclude: int | None = None) -> float:
        return self.knn(q, k, exclude).radius

    def knn_batch(self, Q, k: int, exclude=None) -> tuple[np.ndarray, np.ndarray]:
        """k-NN for every row of ``Q``; ``exclude`` is a per-row id (-1 for none)."""
        Q = np.ascontiguousarray(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[1] != self.d:
            raise InputError(f"queries must have shape (m, {self.d})")
        m = Q.shape[0]
        if exclude is None:
            exclude = np.full(m, -1, dtype=np.int64)
        exclude = np.asarray(exclude, dtype=np.int64)
        self._check(k, bool(np.any(exclude >= 0)))
        out_i = np.empty((m, k), dtype=np.int64)
        out_d = np.empty((m, k), dtype=np.float64)
        for lo in range(0, m, _CHUNK):
            hi = min(m, lo + _CHUNK)
            fn = self._tree_chunk if self.strategy == TREE else self._scan_chunk
            out_i[lo:hi], out_d[lo:hi] = fn(Q[lo:hi], k, exclude[lo:hi])
        return out_i, out_d

    def self_knn(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """k-NN of every indexed point with the point itself excluded."""
        return self.knn_batch(self.points, k, np.arange(self.n))

    def _scan_chunk(self, Q, k, exclude):
        out_i = np.empty((len(Q), k), dtype=np.int64)
        out_d = np.empty((len(Q), k))
        # rows per block so the (rows, n, d) difference tensor stays small
        step = max(1, _SCAN_ELEMENTS // (self.n * self.d))
        for lo in range(0, len(Q), step):
            hi = min(len(Q), lo + step)
            dist = row_distances(self.points[None, :, :], Q[lo:hi, None, :], self.metric)
            rows = np.flatnonzero(exclude[lo:hi] >= 0)
            dist[rows, exclude[lo:hi][rows]] = np.inf
            # stable sort on distance keeps lower ids first among ties
            order = np.argsort(dist, axis=1, kind="stable")[:, :k]
            out_i[lo:hi] = order
            out_d[lo:hi] = np.take_along_axis(dist, order, axis=1)
        return out_i, out_d

    def _tree_chunk(self, Q, k, exclude):
        n = self.n
        kq = min(n, k + 1 + _SLACK)
        tdist, tidx = self._tree.query(Q, k=kq, p=self._p, workers=self.workers)
        tdist = tdist.reshape(len(Q), kq)
        tidx = tidx.reshape(len(Q), kq)
        dist = row_distances(self.points[tidx], Q[:, None, :], self.metric)
        dist[tidx == exclude[:, None]] = np.inf
        order = np.lexsort((tidx, dist), axis=-1)[:, :k]
        rows = np.arange(len(Q))[:, None]
        out_i = tidx[rows, order]
        out_d = dist[rows, order]
        if kq == n:
            return out_i, out_d
        # unreturned points are at tree distance >= tdist[:, -1]; a row is
        # settled when its k-th distance is clearly below that bound
        unsettled = ~(out_d[:, -1] < tdist[:, -1] * (1.0 - _GUARD))
        for r in np.flatnonzero(unsettled):
            out_i[r], out_d[r] = self._ball_fallback(Q[r], k, exclude[r], out_d[r, -1])
        return out_i, out_d

    def _ball_fallback(self, q, k, excl, kth):
        radius = kth * (1.0 + 4 * _GUARD) + 1e-300
        while True:
            ids = np.asarray(self._tree.query_ball_point(q, radius, p=self._p), dtype=np.int64)
            ids = ids[ids != excl]
            if ids.size >= k:
                break
            radius *= 2.0
        dist = row_distances(self.points[ids], q, self.metric)
        return _rank(ids, dist, k)
