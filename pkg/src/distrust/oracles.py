"""Lack-of-representation and lack-of-certainty probabilities.

Both oracles follow the same pattern: preprocess a per-tuple statistic over the
training data (self-excluded k-vicinity radius, or k-vicinity uncertainty),
keep it sorted, and at query time turn the query's own statistic into a rank
fraction that is pushed through a Normal CDF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import CLASSIFICATION, REGRESSION, TASKS
from .errors import ConfigError

DEFAULT_K = 10


@dataclass(frozen=True)
class OracleParams:
    k: int = DEFAULT_K
    mu_o: float = 0.9
    sigma_o: float = 0.1
    mu_u: float = 0.9
    sigma_u: float = 0.1
    metric: str = "euclidean"
    task: str = CLASSIFICATION
    binary_entropy_direct: bool = False

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k}")
        for name in ("mu_o", "mu_u"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"{name} must lie in (0, 1], got {v}")
        for name in ("sigma_o", "sigma_u"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive, got {v}")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        from .metrics import check_metric
        check_metric(self.metric)

    @classmethod
    def from_ratios(cls, k: int = DEFAULT_K, c: float = 0.1, sigma: float = 0.1,
                    u: float = 0.1, sigma_u: float = 0.1, **kw) -> "OracleParams":
        """Parameters from the expected outlier ratio ``c`` and uncertainty ratio ``u``."""
        return cls(k=k, mu_o=1.0 - c, sigma_o=sigma, mu_u=1.0 - u, sigma_u=sigma_u, **kw)


class RankList:
    """Sorted multiset of per-tuple statistics."""

    __slots__ = ("values",)

    def __init__(self, values):
        v = np.sort(np.asarray(values, dtype=np.float64).reshape(-1), kind="stable")
        if v.size == 0:
            raise ConfigError("rank list must be non-empty")
        v.setflags(write=False)
        self.values = v

    def __len__(self):
        return self.values.size

    def rank_fraction(self, value: float) -> float:
        return rank_fraction(self.values, value)

    def __eq__(self, other):
        return isinstance(other, RankList) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"RankList(n={self.values.size}, min={self.values[0]:.6g}, max={self.values[-1]:.6g})"


def std_normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def rank_fraction(sorted_values, value: float) -> float:
    """Fraction of entries not larger than ``value`` (binary search)."""
    values = sorted_values.values if isinstance(sorted_values, RankList) else sorted_values
    return int(np.searchsorted(values, value, side="right")) / values.size


def entropy(labels) -> float:
    """Shannon entropy in bits of the empirical label distribution."""
    _, counts = np.unique(np.asarray(labels), return_counts=True)
    p = counts / counts.sum()
    h = -float(np.sum(p * np.log2(p)))
    return h if h > 0.0 else 0.0


def rss(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    return float(np.sum((v - v.mean()) ** 2))


def uncertainty(targets, task: str) -> float:
    if task == CLASSIFICATION:
        return entropy(targets)
    if task == REGRESSION:
        return rss(targets)
    raise ConfigError(f"unknown task {task!r}")


def neighborhood_uncertainties(targets: np.ndarray, idx: np.ndarray, task: str) -> np.ndarray:
    """Uncertainty of each row of neighbor ids ``idx`` (shape m x k)."""
    y = targets[idx]
    if task == REGRESSION:
        return np.sum((y - y.mean(axis=1, keepdims=True)) ** 2, axis=1)
    return np.array([entropy(row) for row in y])


def _check_self_k(index, k: int):
    if not 1 <= k <= index.n - 1:
        raise ConfigError(f"k={k} requires at least k+1={k + 1} rows, dataset has {index.n}")


def preprocess_representation(dataset, index, k: int) -> RankList:
    _check_self_k(index, k)
    _, dist = index.self_knn(k)
    return RankList(dist[:, -1])


def preprocess_uncertainty(dataset, index, k: int, task: str | None = None) -> RankList:
    _check_self_k(index, k)
    idx, _ = index.self_knn(k)
    return RankList(neighborhood_uncertainties(dataset.targets, idx, task or dataset.task))


def representation_probability(rho: float, gamma, mu: float, sigma: float) -> tuple[float, float]:
    """(rank fraction, P_o) for a k-vicinity radius ``rho``."""
    r = rank_fraction(gamma, rho)
    return r, std_normal_cdf((r - mu) / sigma)


def uncertainty_probability(u: float, gamma_u, mu_u: float, sigma_u: float,
                            direct_binary: bool = False) -> tuple[float, float]:
    """(rank fraction, P_u) for a k-vicinity uncertainty ``u``.

    With ``direct_binary`` the binary entropy itself is returned as P_u.
    """
    r = rank_fraction(gamma_u, u)
    if direct_binary:
        return r, min(1.0, max(0.0, u))
    return r, std_normal_cdf((r - mu_u) / sigma_u)


def p_o(model, q) -> float:
    nb = model.index.knn(q, model.params.k)
    p = model.params
    return representation_probability(nb.radius, model.gamma_o, p.mu_o, p.sigma_o)[1]


def p_u(model, q) -> float:
    nb = model.index.knn(q, model.params.k)
    p = model.params
    u = uncertainty(model.dataset.targets[nb.indices], p.task)
    return uncertainty_probability(u, model.gamma_u, p.mu_u, p.sigma_u,
                                   model.direct_binary)[1]
