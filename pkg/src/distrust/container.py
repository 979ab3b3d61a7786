"""Binary model file (``.dtm``).

Layout, all integers and floats little-endian::

    magic   b"DTM\\x00"
    version u32
    section*  tag (4 ASCII bytes) | length u64 | payload
    crc32   u32 over every preceding byte

Sections, in order: HEAD, SCHM (UTF-8 JSON encoding map), PARM, PNTS, TRGT,
GAMO, GAMU, then optional SRHO / SUNC surrogate estimators. Float arrays are
raw IEEE-754 doubles, so a load reproduces the saved model bit for bit.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .dataset import TASKS, Dataset, EncodingMap
from .errors import InputError, ModelFormatError
from .knn_index import KnnIndex
from .metrics import METRICS
from .model import DistrustModel
from .oracles import OracleParams, RankList
from .surrogate import KINDS, RADIUS, SurrogateEstimator, WeightedKnnRegressor

MAGIC = b"DTM\x00"
FORMAT_VERSION = 1

_PARM = struct.Struct("<Q4dBBB")
_HEAD = struct.Struct("<QQ")
_SURR = struct.Struct("<BQddBQQQ")  # kind, N_s, eps, rmse, capped, n_traj, m, d
_SECTION = struct.Struct("<4sQ")
_REQUIRED = (b"HEAD", b"SCHM", b"PARM", b"PNTS", b"TRGT", b"GAMO", b"GAMU")
_SURR_TAGS = {RADIUS: b"SRHO", "uncertainty": b"SUNC"}


def _f8(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _read_f8(buf: bytes, count: int) -> np.ndarray:
    if len(buf) != 8 * count:
        raise ModelFormatError("array section has the wrong length")
    return np.frombuffer(buf, dtype="<f8").astype(np.float64)


def _pack_surrogate(est: SurrogateEstimator) -> bytes:
    reg = est.regressor
    m, d = reg.coords.shape
    head = _SURR.pack(KINDS.index(est.kind), est.sample_size, est.epsilon,
                      est.achieved_rmse, int(est.capped), len(est.trajectory), m, d)
    traj = b"".join(struct.pack("<Qd", int(s), float(e)) for s, e in est.trajectory)
    extra = struct.pack("<Qd", reg.neighbors, reg.delta)
    return head + extra + traj + _f8(reg.coords) + _f8(reg.values)


def _unpack_surrogate(buf: bytes) -> SurrogateEstimator:
    try:
        kind_i, size, eps, rmse, capped, nt, m, d = _SURR.unpack_from(buf, 0)
        off = _SURR.size
        neighbors, delta = struct.unpack_from("<Qd", buf, off)
        off += 16
        traj = []
        for _ in range(nt):
            s, e = struct.unpack_from("<Qd", buf, off)
            traj.append((s, e))
            off += 16
    except struct.error:
        raise ModelFormatError("truncated surrogate section") from None
    coords = _read_f8(buf[off:off + 8 * m * d], m * d).reshape(m, d)
    values = _read_f8(buf[off + 8 * m * d:], m)
    reg = WeightedKnnRegressor(coords, values, neighbors=int(neighbors), delta=delta)
    return SurrogateEstimator(KINDS[kind_i], reg, eps, rmse, int(size), bool(capped), traj)


def dumps(model: DistrustModel) -> bytes:
    ds, p = model.dataset, model.params
    sections = [
        (b"HEAD", _HEAD.pack(ds.n, ds.d)),
        (b"SCHM", json.dumps(ds.encoding.to_dict(), sort_keys=True).encode("utf-8")),
        (b"PARM", _PARM.pack(p.k, p.mu_o, p.sigma_o, p.mu_u, p.sigma_u,
                             METRICS.index(p.metric), TASKS.index(p.task),
                             int(p.binary_entropy_direct))),
        (b"PNTS", _f8(ds.points)),
        (b"TRGT", _f8(ds.targets)),
        (b"GAMO", _f8(model.gamma_o.values)),
        (b"GAMU", _f8(model.gamma_u.values)),
    ]
    for kind in KINDS:
        if kind in model.surrogates:
            sections.append((_SURR_TAGS[kind], _pack_surrogate(model.surrogates[kind])))
    body = bytearray(MAGIC + struct.pack("<I", FORMAT_VERSION))
    for tag, payload in sections:
        body += _SECTION.pack(tag, len(payload)) + payload
    body += struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    return bytes(body)


def loads(data: bytes, workers: int = 1) -> DistrustModel:
    if len(data) < len(MAGIC) + 8:
        raise ModelFormatError("model file is truncated")
    if data[:4] != MAGIC:
        raise ModelFormatError("not a distrust model file (bad magic)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"model format version {version}, expected {FORMAT_VERSION}")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ModelFormatError("checksum mismatch (file truncated or corrupted)")
    sections = {}
    order = []
    off = 8
    while off < len(body):
        if off + _SECTION.size > len(body):
            raise ModelFormatError("truncated section header")
        tag, length = _SECTION.unpack_from(body, off)
        off += _SECTION.size
        if off + length > len(body):
            raise ModelFormatError(f"section {tag!r} runs past end of file")
        sections[tag] = body[off:off + length]
        order.append(tag)
        off += length
    if tuple(order[:len(_REQUIRED)]) != _REQUIRED:
        raise ModelFormatError(f"unexpected section order {order}")
    unknown = set(order[len(_REQUIRED):]) - set(_SURR_TAGS.values())
    if unknown:
        raise ModelFormatError(f"unknown sections {sorted(unknown)}")

    n, d = _HEAD.unpack(sections[b"HEAD"])
    enc = EncodingMap.from_dict(json.loads(sections[b"SCHM"].decode("utf-8")))
    k, mu_o, s_o, mu_u, s_u, mi, ti, direct = _PARM.unpack(sections[b"PARM"])
    params = OracleParams(k, mu_o, s_o, mu_u, s_u, METRICS[mi], TASKS[ti], bool(direct))
    points = _read_f8(sections[b"PNTS"], n * d).reshape(n, d)
    dataset = Dataset(points, _read_f8(sections[b"TRGT"], n), params.task, enc)
    gamma_o = RankList(_read_f8(sections[b"GAMO"], n))
    gamma_u = RankList(_read_f8(sections[b"GAMU"], n))
    index = KnnIndex(points, params.metric, workers=workers)
    surrogates = {kind: _unpack_surrogate(sections[tag])
                  for kind, tag in _SURR_TAGS.items() if tag in sections}
    return DistrustModel(dataset, params, gamma_o, gamma_u, index, surrogates)


def save(model: DistrustModel, path) -> Path:
    path = Path(path)
    try:
        path.write_bytes(dumps(model))
    except OSError as exc:
        raise InputError(f"cannot write model to {path}: {exc}") from exc
    return path


def load(path, workers: int = 1) -> DistrustModel:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read model {path}: {exc}") from exc
    return loads(data, workers=workers)
