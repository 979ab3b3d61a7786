"""Per-query distrust scores for models trained on tabular data.

Typical use::

    from distrust import Dataset, OracleParams, fit

    model = fit(dataset, OracleParams(k=10))
    model.score(query).wdt
"""

from .container import load, save
from .dataset import Dataset, encode, encode_query, load_csv
from .errors import ConfigError, DegenerateError, DistrustError, InputError, ModelFormatError
from .knn_index import KnnIndex, Neighborhood
from .metrics import METRICS, distance
from .model import DistrustModel, DistrustScore, fit, score, score_many
from .oracles import OracleParams, RankList

__all__ = [
    "ConfigError", "Dataset", "DegenerateError", "DistrustError", "DistrustModel",
    "DistrustScore", "InputError", "KnnIndex", "METRICS", "ModelFormatError", "Neighborhood",
    "OracleParams", "RankList", "distance", "encode", "encode_query", "fit", "load",
    "load_csv", "save", "score", "score_many",
]
__version__ = "0.1.0"
