"""Strong/weak distrust scoring over a fitted model."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import CLASSIFICATION, Dataset
from .errors import ConfigError, InputError
from .knn_index import KnnIndex
from .oracles import (OracleParams, RankList, neighborhood_uncertainties,
                      representation_probability, uncertainty_probability)

SCORE_FIELDS = ("rho_q", "r_q", "p_o", "u_q", "r_uq", "p_u", "sdt", "wdt")


@dataclass(frozen=True)
class DistrustScore:
    rho_q: float
    r_q: float
    p_o: float
    u_q: float
    r_uq: float
    p_u: float
    sdt: float
    wdt: float

    def to_dict(self) -> dict:
        return asdict(self)


def combine(p_o: float, p_u: float) -> tuple[float, float]:
    """(SDT, WDT) for independent P_o and P_u."""
    sdt = p_o * p_u
    # the exact value lies in [max(p_o, p_u), 1]; clamp away the last-ulp rounding
    wdt = min(1.0, max(p_o, p_u, p_o + p_u - sdt))
    return sdt, wdt


def make_score(rho, r_q, po, u, r_u, pu) -> DistrustScore:
    sdt, wdt = combine(po, pu)
    return DistrustScore(float(rho), float(r_q), float(po), float(u), float(r_u),
                         float(pu), float(sdt), float(wdt))


@dataclass
class DistrustModel:
    dataset: Dataset
    params: OracleParams
    gamma_o: RankList
    gamma_u: RankList
    index: KnnIndex = field(repr=False)
    surrogates: dict = field(default_factory=dict, repr=False)

    @property
    def direct_binary(self) -> bool:
        return self.params.binary_entropy_direct

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def d(self) -> int:
        return self.dataset.d

    def score(self, q) -> DistrustScore:
        return score(self, q)

    def score_many(self, Q) -> list[DistrustScore]:
        return score_many(self, Q)


def _validate(dataset: Dataset, params: OracleParams):
    if params.task != dataset.task:
        raise ConfigError(f"params task {params.task!r} does not match dataset task {dataset.task!r}")
    if not params.k <= dataset.n - 1:
        raise ConfigError(f"k={params.k} needs at least {params.k + 1} rows, dataset has {dataset.n}")
    if params.binary_entropy_direct:
        if dataset.task != CLASSIFICATION or len(dataset.class_labels) > 2:
            raise ConfigError("binary-entropy-direct mode needs a binary classification task")


def fit(dataset: Dataset, params: OracleParams | None = None, workers: int = 1) -> DistrustModel:
    """Build the k-NN index and both rank lists."""
    params = params or OracleParams(task=dataset.task)
    _validate(dataset, params)
    index = KnnIndex(dataset.points, params.metric, workers=workers)
    idx, dist = index.self_knn(params.k)
    gamma_o = RankList(dist[:, -1])
    gamma_u = RankList(neighborhood_uncertainties(dataset.targets, idx, params.task))
    return DistrustModel(dataset, params, gamma_o, gamma_u, index)


def _query(model: DistrustModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if q.shape[0] != model.d:
        raise InputError(f"query has dimension {q.shape[0]}, model expects {model.d}")
    return q


def score_from_stats(params: OracleParams, gamma_o, gamma_u, rho: float, u: float) -> DistrustScore:
    r_q, po = representation_probability(rho, gamma_o, params.mu_o, params.sigma_o)
    r_u, pu = uncertainty_probability(u, gamma_u, params.mu_u, params.sigma_u,
                                      params.binary_entropy_direct)
    return make_score(rho, r_q, po, u, r_u, pu)


def score(model: DistrustModel, q) -> DistrustScore:
    q = _query(model, q)
    nb = model.index.knn(q, model.params.k)
    u = neighborhood_uncertainties(model.dataset.targets, nb.indices[None, :],
                                   model.params.task)[0]
    return score_from_stats(model.params, model.gamma_o, model.gamma_u, nb.radius, u)


def score_many(model: DistrustModel, Q) -> list[DistrustScore]:
    """Batch scoring; identical results to calling :func:`score` per row."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.size == 0:
        return []
    Q = Q.reshape(len(Q), -1)
    if Q.shape[1] != model.d:
        raise InputError(f"queries have dimension {Q.shape[1]}, model expects {model.d}")
    idx, dist = model.index.knn_batch(Q, model.params.k)
    us = neighborhood_uncertainties(model.dataset.targets, idx, model.params.task)
    return [score_from_stats(model.params, model.gamma_o, model.gamma_u, dist[i, -1], us[i])
            for i in range(len(Q))]
