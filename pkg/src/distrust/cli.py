"""Command-line entry point.

Exit codes: 0 success, 2 input error, 3 configuration error, 4 internal error.
Effective settings come from built-in defaults, then ``--config`` (key=value
lines), then explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import container
from .dataset import CLASSIFICATION, encode, load_csv, read_queries
from .errors import ConfigError, DistrustError, InputError
from .knn_index import KnnIndex
from .evaluation import (MEASURES, SyntheticSpec, baseline_predict, bucketize, gen_synthetic,
                         read_predictions, render_report)
from .metrics import METRICS
from .model import SCORE_FIELDS, fit, score_many
from .oracles import OracleParams
from .surrogate import KINDS, RADIUS, UNCERTAINTY, SurrogateScorer, train_surrogate
from .tuning import TuningGrid, estimate_u, tune_ck

log = logging.getLogger("distrust")

DEFAULTS = {
    "target": None, "metric": "euclidean", "k": 10, "c": 0.1, "sigma": 0.1, "u": 0.1,
    "sigma_u": 0.1, "binary_entropy_direct": False, "no_data": False, "epsilon": 1e-2,
    "mix": 0.5, "seed": 42, "task": "auto", "scaling": "minmax",
}
_TYPES = {"k": int, "c": float, "sigma": float, "u": float, "sigma_u": float,
          "epsilon": float, "mix": float, "seed": int}
_BOOLS = {"binary_entropy_direct", "no_data"}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _coerce(key: str, value):
    if key in _BOOLS:
        return value if isinstance(value, bool) else _parse_bool(str(value))
    if key in _TYPES:
        try:
            return _TYPES[key](value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return value


def read_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def effective_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = _coerce(key, v)
    if cfg["metric"] not in METRICS:
        raise ConfigError(f"unknown metric {cfg['metric']!r}")
    for key in ("c", "u"):
        if not 0.0 <= cfg[key] < 1.0:
            raise ConfigError(f"{key} must lie in [0, 1), got {cfg[key]}")
    return cfg


def params_from(cfg: dict, task: str) -> OracleParams:
    return OracleParams.from_ratios(k=cfg["k"], c=cfg["c"], sigma=cfg["sigma"], u=cfg["u"],
                                    sigma_u=cfg["sigma_u"], metric=cfg["metric"], task=task,
                                    binary_entropy_direct=cfg["binary_entropy_direct"])


def _load_dataset(path, cfg):
    if not cfg["target"]:
        raise ConfigError("--target is required")
    table, schema = load_csv(path, cfg["target"])
    return encode(table, schema, task=cfg["task"], scaling=cfg["scaling"])


def _write_json(path, obj):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
    return path


def _echo(obj, stream=None):
    print(json.dumps(obj), file=stream or sys.stdout)


def cmd_preprocess(args) -> int:
    cfg = effective_config(args)
    ds = _load_dataset(args.data, cfg)
    model = fit(ds, params_from(cfg, ds.task))
    out = container.save(model, args.out)
    g, gu = model.gamma_o.values, model.gamma_u.values
    _echo({"model": str(out), "n": ds.n, "d": ds.d, "k": model.params.k,
           "metric": model.params.metric, "task": ds.task,
           "gamma_min": float(g[0]), "gamma_max": float(g[-1]),
           "gamma_u_min": float(gu[0]), "gamma_u_max": float(gu[-1]), "config": cfg})
    return 0


def _explicit(args) -> set:
    keys = {k for k in DEFAULTS if getattr(args, k, None) is not None}
    if getattr(args, "config", None):
        keys |= set(read_config(args.config))
    return keys


def _apply_overrides(model, cfg, args):
    """Scoring-time flags may change the rank-to-probability transform but not k or metric."""
    given = _explicit(args)
    changes = {key: cfg[key] for key in ("c", "sigma", "u", "sigma_u", "binary_entropy_direct")
               if key in given}
    if not changes:
        return model
    p = model.params
    model.params = OracleParams(
        k=p.k, metric=p.metric, task=p.task,
        mu_o=1.0 - changes["c"] if "c" in changes else p.mu_o,
        sigma_o=changes.get("sigma", p.sigma_o),
        mu_u=1.0 - changes["u"] if "u" in changes else p.mu_u,
        sigma_u=changes.get("sigma_u", p.sigma_u),
        binary_entropy_direct=changes.get("binary_entropy_direct", p.binary_entropy_direct))
    return model


def cmd_score(args) -> int:
    cfg = effective_config(args)
    model = container.load(args.model)
    model = _apply_overrides(model, cfg, args)
    if cfg["no_data"]:
        missing = [k for k in KINDS if k not in model.surrogates]
        if missing:
            raise ConfigError(f"--no-data needs surrogate estimators; model lacks {missing}")
        scorer = SurrogateScorer.from_model(model)
    Q, _ = read_queries(args.queries, model.dataset.encoding)
    scores = scorer.score_many(Q) if cfg["no_data"] else score_many(model, Q)
    for i, s in enumerate(scores):
        rec = {"row_id": i}
        rec.update({f: getattr(s, f) for f in SCORE_FIELDS})
        _echo(rec)
    _echo({"config": cfg, "queries": len(scores)}, sys.stderr)
    return 0


def _floats(text, cast=float):
    try:
        return tuple(cast(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def cmd_tune(args) -> int:
    cfg = effective_config(args)
    ds = _load_dataset(args.data, cfg)
    grid = TuningGrid(_floats(args.grid_c), _floats(args.grid_k, int))
    c_opt, k_opt, report = tune_ck(ds, grid, metric=cfg["metric"])
    u_hat, curve, degenerate = estimate_u(ds, KnnIndex(ds.points, cfg["metric"]), k_opt)
    report.u_hat, report.u_degenerate, report.v_curve = u_hat, degenerate, curve
    out = report.to_dict()
    out["config"] = cfg
    _write_json(args.out, out)
    curve_path = Path(args.curve) if args.curve else Path(args.out).with_suffix(".vcurve.csv")
    try:
        with curve_path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "V"])
            w.writerows(curve)
    except OSError as exc:
        raise InputError(f"cannot write {curve_path}: {exc}") from exc
    _echo({"c_opt": c_opt, "k_opt": k_opt, "u_hat": u_hat, "u_degenerate": degenerate,
           "report": str(args.out), "v_curve": str(curve_path), "config": cfg})
    return 0


def cmd_surrogate_train(args) -> int:
    cfg = effective_config(args)
    model = container.load(args.model)
    eps = cfg["epsilon"]
    eps_u = float(args.epsilon_u) if args.epsilon_u is not None else eps
    info = {}
    for kind, e in ((RADIUS, eps), (UNCERTAINTY, eps_u)):
        est = train_surrogate(model, kind, e, seed=cfg["seed"], mix=cfg["mix"])
        model.surrogates[kind] = est
        info[kind] = {"sample_size": est.sample_size, "achieved_rmse": est.achieved_rmse,
                      "epsilon": e, "capped": est.capped,
                      "trajectory": [[s, r] for s, r in est.trajectory]}
    out = container.save(model, args.out or args.model)
    report = {"model": str(out), "n": model.n, "estimators": info, "config": cfg}
    if args.report:
        _write_json(args.report, report)
    _echo(report)
    return 0


def _label_ids(values, labels):
    index = {lab: i for i, lab in enumerate(labels)}
    out = []
    for v in values:
        key = str(v).strip()
        if key not in index:
            try:
                f = float(key)
                key = str(int(f)) if f.is_integer() else key
            except ValueError:
                pass
        if key not in index:
            index[key] = len(index)
        out.append(index[key])
    return np.array(out)


def cmd_evaluate(args) -> int:
    cfg = effective_config(args)
    outdir = Path(args.out)
    from .plotting import distrust_map
    if args.synthetic:
        spec = SyntheticSpec(n=args.n, seed=cfg["seed"])
        ds, G, truth = gen_synthetic(spec)
        model = fit(ds, params_from(cfg, CLASSIFICATION))
        scores = score_many(model, G)
        pred = baseline_predict(ds, G, k=model.params.k, index=model.index)
        task, positive = CLASSIFICATION, 0
    else:
        if not (args.model and args.queries and args.predictions):
            raise ConfigError("evaluate needs --synthetic or MODEL QUERIES PREDICTIONS")
        model = container.load(args.model)
        Q, qtruth = read_queries(args.queries, model.dataset.encoding)
        ids, preds, ptruth = read_predictions(args.predictions)
        if ptruth is None and qtruth is None:
            raise InputError("no ground truth: add a truth column or the target to the queries")
        if any(not 0 <= i < len(Q) for i in ids):
            raise InputError("prediction row_id outside the query file")
        all_scores = score_many(model, Q)
        scores = [all_scores[i] for i in ids]
        truths = ptruth if ptruth is not None else [qtruth[i] for i in ids]
        task = model.params.task
        if task == CLASSIFICATION:
            labels = list(model.dataset.class_labels)
            pred = _label_ids(preds, labels)
            truth = _label_ids(truths, labels)
            positive = 1
        else:
            try:
                pred = np.array([float(p) for p in preds])
                truth = np.array([float(t) for t in truths])
            except ValueError:
                raise InputError("regression predictions and truths must be numeric") from None
            positive = None
        G = None
    files, summary = [], {}
    for measure in MEASURES:
        rep = bucketize(scores, measure, pred, truth, task, positive=positive or 0)
        rep.config = cfg
        files += render_report(rep, outdir / f"report_{measure}")
        filled = rep.nonempty()
        summary[measure] = {"spearman_rho": rep.spearman_rho,
                            "bottom_error": filled[0].error if filled else None,
                            "top_error": filled[-1].error if filled else None}
    if G is not None:
        for measure in MEASURES:
            vals = [getattr(s, measure) for s in scores]
            files.append(distrust_map(G, vals, outdir / f"map_{measure}.svg",
                                      title=measure.upper(), train_points=model.dataset.points))
    _echo({"files": [str(f) for f in files], "summary": summary, "config": cfg})
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(ConfigError.exit_code)


def _common(p):
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--target")
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("--k", type=int)
    p.add_argument("--c", type=float, help="expected outlier ratio")
    p.add_argument("--sigma", type=float)
    p.add_argument("--u", type=float, help="expected uncertainty ratio")
    p.add_argument("--sigma-u", dest="sigma_u", type=float)
    p.add_argument("--binary-entropy-direct", dest="binary_entropy_direct",
                   action="store_const", const=True)
    p.add_argument("--task", choices=("auto", "classification", "regression"))
    p.add_argument("--scaling", choices=("minmax", "identity"))
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--mix", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="distrust", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("preprocess", help="fit a model from a CSV")
    p.add_argument("data")
    p.add_argument("--out", default="model.dtm")
    _common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("score", help="score queries; JSON lines on stdout")
    p.add_argument("model")
    p.add_argument("queries")
    p.add_argument("--no-data", dest="no_data", action="store_const", const=True)
    _common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("tune", help="choose c, k and u for a dataset")
    p.add_argument("data")
    p.add_argument("--out", default="tuning.json")
    p.add_argument("--curve", help="V-curve CSV path (default: next to --out)")
    p.add_argument("--grid-c", default="0.05,0.1,0.15,0.2")
    p.add_argument("--grid-k", default="5,10,20,30")
    _common(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("surrogate-train", help="train no-data estimators into a model")
    p.add_argument("model")
    p.add_argument("--out", help="output model (default: overwrite input)")
    p.add_argument("--report", help="write the training report JSON here")
    p.add_argument("--epsilon-u", dest="epsilon_u", type=float,
                   help="RMSE target for the uncertainty estimator (default: --epsilon)")
    _common(p)
    p.set_defaults(func=cmd_surrogate_train)

    p = sub.add_parser("evaluate", help="bucket distrust against model errors")
    p.add_argument("model", nargs="?")
    p.add_argument("queries", nargs="?")
    p.add_argument("predictions", nargs="?", help="CSV row_id,prediction[,truth]")
    p.add_argument("--synthetic", action="store_true", help="use the built-in disk task")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out", default="eval")
    _common(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else ConfigError.exit_code
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DistrustError as exc:
        print(f"distrust: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"distrust: internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
