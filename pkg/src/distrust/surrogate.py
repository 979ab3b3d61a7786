"""Scoring without access to the training rows.

Two regressors stand in for the k-NN lookups at query time: one predicts the
k-vicinity radius of a point, the other its k-vicinity uncertainty. Their
training sets are drawn from the query space and labelled with exact k-NN
against the training data; the sample size is doubled until held-out RMSE
reaches the target.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, InputError
from .model import DistrustModel, DistrustScore, score_from_stats
from .oracles import OracleParams, RankList, neighborhood_uncertainties

log = logging.getLogger(__name__)

RADIUS = "radius"
UNCERTAINTY = "uncertainty"
KINDS = (RADIUS, UNCERTAINTY)

DEFAULT_MIX = 0.5
DEFAULT_EPSILON = 1e-2
BOX_INFLATION = 0.2
JITTER = 0.05
CAP_FACTOR = 64
TEST_FRACTION = 0.2


class WeightedKnnRegressor:
    """Inverse-distance weighted average over the nearest reference samples.

    A query that coincides with reference samples returns their mean value
    exactly instead of a near-infinite-weight blend.
    """

    def __init__(self, coords, values, neighbors: int = 8, delta: float = 1e-9):
        self.coords = np.ascontiguousarray(coords, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64).reshape(-1)
        if self.coords.ndim != 2 or len(self.coords) != len(self.values) or len(self.values) == 0:
            raise InputError("regressor needs a non-empty (coords, values) sample")
        self.neighbors = neighbors
        self.delta = delta
        self._tree = cKDTree(self.coords)

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    def predict(self, Q) -> np.ndarray:
        Q = np.asarray(Q, dtype=np.float64)
        single = Q.ndim == 1
        Q = Q.reshape(-1, self.d)
        kk = min(self.neighbors, len(self.values))
        dist, idx = self._tree.query(Q, k=kk)
        dist = dist.reshape(len(Q), kk)
        idx = idx.reshape(len(Q), kk)
        vals = self.values[idx]
        w = 1.0 / (dist + self.delta)
        out = np.sum(w * vals, axis=1) / np.sum(w, axis=1)
        exact = dist[:, 0] == 0.0
        for r in np.flatnonzero(exact):
            out[r] = vals[r][dist[r] == 0.0].mean()
        return out[0] if single else out


@dataclass
class SurrogateEstimator:
    kind: str
    regressor: WeightedKnnRegressor = field(repr=False)
    epsilon: float
    achieved_rmse: float
    sample_size: int
    capped: bool = False
    trajectory: list = field(default_factory=list)

    def predict(self, Q) -> np.ndarray:
        out = self.regressor.predict(Q)
        return np.maximum(out, 0.0)


def _bounds(points: np.ndarray):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    return lo, hi, hi - lo


def sample_query_space(model: DistrustModel, count: int, mix: float = DEFAULT_MIX,
                       seed=42, jitter: float = JITTER) -> np.ndarray:
    """Draw ``count`` points: a ``mix`` share uniform over the padded bounding
    box, the rest bootstrapped training rows with Gaussian jitter."""
    if not 0.0 <= mix <= 1.0:
        raise ConfigError(f"mix must lie in [0, 1], got {mix}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pts = model.dataset.points
    lo, hi, span = _bounds(pts)
    n_uniform = int(round(mix * count))
    uni = rng.uniform(lo - BOX_INFLATION * span, hi + BOX_INFLATION * span,
                      size=(n_uniform, pts.shape[1]))
    rows = rng.integers(0, len(pts), size=count - n_uniform)
    boot = pts[rows] + rng.normal(size=(len(rows), pts.shape[1])) * (jitter * span)
    return np.vstack([uni, boot])


def label_samples(model: DistrustModel, S: np.ndarray, kind: str) -> np.ndarray:
    idx, dist = model.index.knn_batch(S, model.params.k)
    if kind == RADIUS:
        return dist[:, -1]
    if kind == UNCERTAINTY:
        return neighborhood_uncertainties(model.dataset.targets, idx, model.params.task)
    raise ConfigError(f"unknown surrogate kind {kind!r}")


def train_surrogate(model: DistrustModel, kind: str, epsilon: float = DEFAULT_EPSILON,
                    seed=42, mix: float = DEFAULT_MIX, cap_factor: int = CAP_FACTOR,
                    neighbors: int = 8) -> SurrogateEstimator:
    """Exponential search over the sample size.

    Starts at n samples and doubles until the held-out RMSE is at most
    ``epsilon`` or the next size would exceed ``cap_factor * n``; in the latter
    case the last estimator is returned with ``capped=True``.
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown surrogate kind {kind!r}")
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    rng = np.random.default_rng(seed)
    n = model.n
    size = n
    trajectory = []
    while True:
        S = sample_query_space(model, size, mix, rng)
        y = label_samples(model, S, kind)
        perm = rng.permutation(size)
        n_test = max(1, int(round(TEST_FRACTION * size)))
        test, train = perm[:n_test], perm[n_test:]
        if train.size == 0:
            train = test
        reg = WeightedKnnRegressor(S[train], y[train], neighbors=neighbors)
        pred = reg.predict(S[test])
        if kind == RADIUS:
            pred = np.maximum(pred, 0.0)
        err = float(np.sqrt(np.mean((pred - y[test]) ** 2)))
        trajectory.append((size, err))
        log.debug("surrogate %s: N_s=%d rmse=%.3g", kind, size, err)
        if err <= epsilon:
            return SurrogateEstimator(kind, reg, epsilon, err, size, False, trajectory)
        if 2 * size > cap_factor * n:
            return SurrogateEstimator(kind, reg, epsilon, err, size, True, trajectory)
        size *= 2


class SurrogateScorer:
    """Scores queries from parameters, rank lists and the two estimators only."""

    def __init__(self, params: OracleParams, gamma_o: RankList, gamma_u: RankList,
                 reg_rho: SurrogateEstimator, reg_u: SurrogateEstimator):
        if reg_rho.kind != RADIUS or reg_u.kind != UNCERTAINTY:
            raise ConfigError("need one radius and one uncertainty estimator")
        self.params = params
        self.gamma_o = gamma_o
        self.gamma_u = gamma_u
        self.reg_rho = reg_rho
        self.reg_u = reg_u

    @classmethod
    def from_model(cls, model: DistrustModel) -> "SurrogateScorer":
        try:
            rho, u = model.surrogates[RADIUS], model.surrogates[UNCERTAINTY]
        except KeyError:
            raise ConfigError("model has no trained surrogate estimators") from None
        return cls(model.params, model.gamma_o, model.gamma_u, rho, u)

    @property
    def d(self) -> int:
        return self.reg_rho.regressor.d

    def score(self, q) -> DistrustScore:
        return self.score_many(np.asarray(q, dtype=np.float64).reshape(1, -1))[0]

    def score_many(self, Q) -> list[DistrustScore]:
        Q = np.asarray(Q, dtype=np.float64)
        if Q.size == 0:
            return []
        Q = Q.reshape(len(Q), -1)
        if Q.shape[1] != self.d:
            raise InputError(f"queries have dimension {Q.shape[1]}, estimators expect {self.d}")
        rho = self.reg_rho.predict(Q)
        u = self.reg_u.predict(Q)
        return [score_from_stats(self.params, self.gamma_o, self.gamma_u, rho[i], u[i])
                for i in range(len(Q))]


def score_no_data(params, gamma_o, gamma_u, reg_rho, reg_u, q) -> DistrustScore:
    return SurrogateScorer(params, gamma_o, gamma_u, reg_rho, reg_u).score(q)
