"""Heuristic tuning of k, the outlier ratio c and the uncertainty ratio u.

(c, k) are chosen jointly from a grid: for every cell the tuples with the
largest k-vicinity radii are split into an "outlier" group and the
equally-sized group right below it, and the standardized difference of their
mean log radii is compared across c on the scale of a noncentral t
distribution. u is read off the knee of the reverse cumulative distribution of
per-tuple k-vicinity uncertainties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConfigError, DegenerateError
from .knn_index import KnnIndex
from .oracles import neighborhood_uncertainties, std_normal_cdf

LOG_FLOOR = 1e-12
DEFAULT_C_GRID = (0.05, 0.1, 0.15, 0.2)
DEFAULT_K_GRID = (5, 10, 20, 30)
U_GRID = tuple(i / 100 for i in range(1, 51))
U_FALLBACK = 0.1

# moments entering the noncentrality parameter
NCP_MEAN_OVER_K = "mean-over-k"
NCP_AT_BEST_K = "at-best-k"


def _nct_integral(x: float, df: float, ncp: float, upper: bool) -> float:
    # Conditioning on W = sqrt(V) gives P(T <= x) = E[Phi(x W / sqrt(df) - ncp)];
    # the chi density of W has its mass within a dozen units of sqrt(df).
    scale = x / math.sqrt(df)
    log_norm = (1.0 - df / 2.0) * math.log(2.0) - math.lgamma(df / 2.0)
    sign = -1.0 if upper else 1.0

    def integrand(w):
        z = sign * (scale * w - ncp)
        if w <= 0.0:
            return 0.0 if df > 1 else std_normal_cdf(z) * math.exp(log_norm)
        return std_normal_cdf(z) * math.exp(log_norm + (df - 1.0) * math.log(w) - 0.5 * w * w)

    center = math.sqrt(df)
    lo, hi = max(0.0, center - 12.0), center + 12.0
    pts = [p for p in (center - 2.0, center, center + 2.0) if lo < p < hi]
    val, _ = integrate.quad(integrand, lo, hi, points=pts or None,
                            epsabs=0.0, epsrel=1e-10, limit=200)
    return min(1.0, max(0.0, val))


def noncentral_t_cdf(x: float, df: float, ncp: float) -> float:
    """P(T <= x) for T = (Z + ncp) / sqrt(V / df), V ~ chi-square(df)."""
    if not df >= 1:
        raise ConfigError(f"df must be >= 1, got {df}")
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    if x > ncp:
        return 1.0 - _nct_integral(x, df, ncp, upper=True)
    return _nct_integral(x, df, ncp, upper=False)


def noncentral_t_sf(x: float, df: float, ncp: float) -> float:
    """P(T > x), accurate far into the upper tail."""
    if not df >= 1:
        raise ConfigError(f"df must be >= 1, got {df}")
    if math.isinf(x):
        return 0.0 if x > 0 else 1.0
    return _nct_integral(x, df, ncp, upper=True)


def group_moments(radii, m: int) -> tuple[float, float, float, float]:
    """(mean_out, mean_in, var_out, var_in) of log radii for the top ``m``
    radii and the next ``m``."""
    r = np.sort(np.asarray(radii, dtype=np.float64))[::-1]
    if m < 2 or 2 * m > r.size:
        raise ConfigError(f"group size {m} invalid for {r.size} radii")
    logs = np.log(np.maximum(r[:2 * m], LOG_FLOOR))
    out, inn = logs[:m], logs[m:]
    return float(out.mean()), float(inn.mean()), float(out.var(ddof=1)), float(inn.var(ddof=1))


def standardized_difference(mu_out, mu_in, var_out, var_in, m: int) -> float:
    pooled = (var_out + var_in) / m
    if not pooled > 0.0:
        raise DegenerateError("zero variance in both radius groups")
    return (mu_out - mu_in) / math.sqrt(pooled)


def t_from_radii(radii, c: float) -> float:
    radii = np.asarray(radii)
    m = int(math.floor(c * radii.size))
    return standardized_difference(*group_moments(radii, m), m)


def vicinity_radii(index: KnnIndex, k: int) -> np.ndarray:
    """Self-excluded k-vicinity radius of every indexed row, in row order."""
    if not 1 <= k <= index.n - 1:
        raise ConfigError(f"k={k} out of range for n={index.n}")
    return index.self_knn(k)[1][:, -1]


def t_statistic(dataset, index: KnnIndex, c: float, k: int) -> float:
    return t_from_radii(vicinity_radii(index, k), c)


@dataclass
class TuningGrid:
    c_values: tuple = DEFAULT_C_GRID
    k_values: tuple = DEFAULT_K_GRID

    def validate(self, n: int):
        if not self.c_values or not self.k_values:
            raise ConfigError("tuning grid is empty")
        for c in self.c_values:
            if not 0.0 < c < 0.5:
                raise ConfigError(f"c={c} outside (0, 0.5)")
            if math.floor(c * n) < 2:
                raise ConfigError(f"c={c} gives fewer than 2 outliers for n={n}")
        for k in self.k_values:
            if not 1 <= k <= n - 1:
                raise ConfigError(f"k={k} outside [1, {n - 1}]")


@dataclass
class TuningReport:
    c_values: list
    k_values: list
    T: list                      # T[i][j] for c_values[i], k_values[j]; None if degenerate
    best_k: dict                 # c -> k*_c
    df: dict
    ncp: dict
    quantile: dict               # c -> P(z < T_{c,k*_c}; df_c, ncp_c)
    c_opt: float
    k_opt: int
    ncp_moments: str = NCP_MEAN_OVER_K
    tail: dict = field(default_factory=dict)   # c -> P(z > T_{c,k*_c}); 1 - quantile
    u_hat: float | None = None
    u_degenerate: bool | None = None
    v_curve: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "c_values": self.c_values, "k_values": self.k_values, "T": self.T,
            "best_k": {str(c): k for c, k in self.best_k.items()},
            "df": {str(c): v for c, v in self.df.items()},
            "ncp": {str(c): v for c, v in self.ncp.items()},
            "quantile": {str(c): v for c, v in self.quantile.items()},
            "tail": {str(c): v for c, v in self.tail.items()},
            "c_opt": self.c_opt, "k_opt": self.k_opt, "ncp_moments": self.ncp_moments,
            "u_hat": self.u_hat, "u_degenerate": self.u_degenerate,
            "v_curve": [[r, v] for r, v in self.v_curve],
        }


def tune_ck(dataset, grid: TuningGrid | None = None, metric: str = "euclidean",
            index: KnnIndex | None = None, ncp_moments: str = NCP_MEAN_OVER_K
            ) -> tuple[float, int, TuningReport]:
    grid = grid or TuningGrid()
    n = dataset.n
    grid.validate(n)
    if ncp_moments not in (NCP_MEAN_OVER_K, NCP_AT_BEST_K):
        raise ConfigError(f"unknown ncp_moments {ncp_moments!r}")
    index = index or KnnIndex(dataset.points, metric)
    cs = sorted(grid.c_values)
    ks = sorted(grid.k_values)
    # one self-excluded query at max k serves every k in the grid
    _, dist = index.self_knn(max(ks))
    radii = {k: dist[:, k - 1] for k in ks}

    T, best_k, df, ncp, quant, tail = [], {}, {}, {}, {}, {}
    for c in cs:
        m = int(math.floor(c * n))
        row, moments = [], []
        for k in ks:
            mom = group_moments(radii[k], m)
            try:
                t = standardized_difference(*mom, m)
            except DegenerateError:
                t = None
            row.append(t)
            if t is not None:
                moments.append((k, t, mom))
        T.append(row)
        if not moments:
            continue
        k_star, t_star, mom_star = max(moments, key=lambda e: (e[1], -e[0]))
        if ncp_moments == NCP_AT_BEST_K:
            ncp_c = t_star
        else:
            avg = np.mean([mm for _, _, mm in moments], axis=0)
            try:
                ncp_c = standardized_difference(*avg, m)
            except DegenerateError:
                ncp_c = 0.0
        best_k[c], df[c], ncp[c] = k_star, 2 * m - 2, ncp_c
        tail[c] = noncentral_t_sf(t_star, 2 * m - 2, ncp_c)
        quant[c] = 1.0 - tail[c]
    if not quant:
        raise DegenerateError("every grid cell is degenerate")
    # largest quantile == smallest upper tail; the tail keeps resolution near 1
    c_opt = min(tail, key=lambda c: (tail[c], c))
    report = TuningReport(cs, ks, T, best_k, df, ncp, quant, c_opt, best_k[c_opt], ncp_moments,
                          tail=tail)
    return c_opt, best_k[c_opt], report


def reverse_cumulative(values, grid=U_GRID) -> list[tuple[float, float]]:
    """V(r): the value exceeded by (at most) a fraction r of the entries."""
    v = np.sort(np.asarray(values, dtype=np.float64))[::-1]
    n = v.size
    out = []
    for r in grid:
        j = min(n - 1, int(math.floor(round(r * n, 9))))
        out.append((r, float(v[j])))
    return out


def knee(curve) -> tuple[float, bool]:
    """Grid point with the largest discrete second difference of V.

    Returns (r, degenerate); a flat curve yields the fallback ratio.
    """
    rs = [r for r, _ in curve]
    vs = np.array([v for _, v in curve])
    if vs.size < 3 or np.all(vs == vs[0]):
        return U_FALLBACK, True
    d2 = vs[:-2] - 2.0 * vs[1:-1] + vs[2:]
    if not np.any(d2 > 0):
        return U_FALLBACK, True
    return rs[1 + int(np.argmax(d2))], False


def vicinity_uncertainties(dataset, index: KnnIndex, k: int) -> np.ndarray:
    if not 1 <= k <= index.n - 1:
        raise ConfigError(f"k={k} out of range for n={index.n}")
    idx, _ = index.self_knn(k)
    return neighborhood_uncertainties(dataset.targets, idx, dataset.task)


def estimate_u(dataset, index: KnnIndex, k: int) -> tuple[float, list, bool]:
    """(u_hat, V-curve, degenerate flag)."""
    curve = reverse_cumulative(vicinity_uncertainties(dataset, index, k))
    u_hat, degenerate = knee(curve)
    return u_hat, curve, degenerate
