import json
import subprocess
import sys

import numpy as np
import pytest

from distrust import container
from distrust.cli import main, read_config
from distrust.errors import ConfigError

from conftest import planted_outliers


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def ex2_model(tmp_path, example2_csv, capsys):
    out = tmp_path / "ex2.dtm"
    code, stdout, _ = run(capsys, "preprocess", example2_csv, "--target", "y", "--k", "2",
                          "--scaling", "identity", "--out", out)
    assert code == 0
    return out, json.loads(stdout)


def test_preprocess_example2(ex2_model):
    path, info = ex2_model
    assert path.exists()
    assert info["gamma_max"] == pytest.approx(0.372, abs=5e-4)
    assert (info["n"], info["d"], info["k"], info["metric"]) == (10, 2, 2, "euclidean")


def test_preprocess_errors(tmp_path, example2_csv, capsys):
    assert run(capsys, "preprocess", example2_csv)[0] == 3
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run(capsys, "preprocess", empty, "--target", "y")[0] == 2
    assert run(capsys, "preprocess", example2_csv, "--target", "y", "--k", "10")[0] == 3
    assert run(capsys, "preprocess", example2_csv, "--target", "y", "--metric", "cosine")[0] == 3


def test_score_example2(ex2_model, tmp_path, capsys):
    q = tmp_path / "q.csv"
    q.write_text("x1,x2\n0.81,0.76\n")
    code, out, err = run(capsys, "score", ex2_model[0], q, "--c", "0.2")
    assert code == 0
    rec = json.loads(out.strip())
    assert rec["row_id"] == 0 and rec["r_q"] == 0.9
    assert rec["p_o"] == pytest.approx(0.8413, abs=1e-3)
    assert json.loads(err)["config"]["c"] == 0.2


def test_score_empty_and_no_data(ex2_model, tmp_path, capsys):
    empty = tmp_path / "q.csv"
    empty.write_text("x1,x2\n")
    code, out, _ = run(capsys, "score", ex2_model[0], empty)
    assert code == 0 and out == ""
    assert run(capsys, "score", ex2_model[0], empty, "--no-data")[0] == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("x1\n0.5\n")
    assert run(capsys, "score", ex2_model[0], bad)[0] == 2
    garbage = tmp_path / "garbage.dtm"
    garbage.write_bytes(b"not a model")
    assert run(capsys, "score", garbage, empty)[0] == 2


def _write_dataset(path, ds):
    lines = ["a,b,y"] + [f"{p[0]!r},{p[1]!r},0" for p in ds.points.tolist()]
    path.write_text("\n".join(lines) + "\n")


def test_tune_planted(tmp_path, capsys):
    data = tmp_path / "planted.csv"
    _write_dataset(data, planted_outliers(0))
    out = tmp_path / "tune.json"
    code, stdout, _ = run(capsys, "tune", data, "--target", "y", "--out", out,
                          "--grid-c", "0.05,0.1,0.2")
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["c_opt"] == 0.1 and rep["u_hat"] is not None
    assert (tmp_path / "tune.vcurve.csv").read_text().startswith("r,V")
    assert run(capsys, "tune", data, "--target", "y", "--grid-c", "0.9", "--out", out)[0] == 3


def test_surrogate_train_infinite_eps(ex2_model, tmp_path, capsys):
    report = tmp_path / "s.json"
    out = tmp_path / "s.dtm"
    code, _, _ = run(capsys, "surrogate-train", ex2_model[0], "--epsilon", "inf",
                     "--out", out, "--report", report)
    assert code == 0
    rep = json.loads(report.read_text())
    assert rep["estimators"]["radius"]["sample_size"] == 10
    assert rep["estimators"]["uncertainty"]["sample_size"] == 10
    assert set(container.load(out).surrogates) == {"radius", "uncertainty"}
    q = tmp_path / "q.csv"
    q.write_text("x1,x2\n0.81,0.76\n0.2,0.2\n")
    code, stdout, _ = run(capsys, "score", out, q, "--no-data")
    assert code == 0 and len(stdout.splitlines()) == 2


def test_evaluate_synthetic(tmp_path, capsys):
    code, stdout, _ = run(capsys, "evaluate", "--synthetic", "--out", tmp_path / "ev")
    assert code == 0
    for name in ("report_wdt.json", "report_wdt.csv", "report_wdt.svg", "report_sdt.json",
                 "map_wdt.svg", "map_sdt.svg"):
        assert (tmp_path / "ev" / name).exists()
    rep = json.loads((tmp_path / "ev" / "report_wdt.json").read_text())
    assert rep["spearman_rho"] is not None


def test_evaluate_from_files(ex2_model, tmp_path, capsys):
    q = tmp_path / "q.csv"
    q.write_text("x1,x2,y\n0.81,0.76,a\n0.6,0.6,a\n0.9,0.1,b\n")
    preds = tmp_path / "p.csv"
    preds.write_text("row_id,prediction\n0,a\n1,b\n2,b\n")
    code, _, _ = run(capsys, "evaluate", ex2_model[0], q, preds, "--out", tmp_path / "ev")
    assert code == 0
    rep = json.loads((tmp_path / "ev" / "report_sdt.json").read_text())
    assert rep["n_queries"] == 3
    assert run(capsys, "evaluate", ex2_model[0], "--out", tmp_path / "ev")[0] == 3


def test_config_file_precedence(tmp_path, example2_csv, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\ntarget = y\nk = 3\nscaling = identity\n")
    code, out, _ = run(capsys, "preprocess", example2_csv, "--config", cfg, "--k", "2",
                       "--out", tmp_path / "m.dtm")
    assert code == 0 and json.loads(out)["k"] == 2
    cfg.write_text("kk = 3\n")
    with pytest.raises(ConfigError):
        read_config(cfg)
    assert run(capsys, "preprocess", example2_csv, "--config", cfg)[0] == 3


def test_deterministic(tmp_path, ex2_model, capsys):
    a = run(capsys, "surrogate-train", ex2_model[0], "--out", tmp_path / "a.dtm", "--epsilon", "0.05")
    b = run(capsys, "surrogate-train", ex2_model[0], "--out", tmp_path / "b.dtm", "--epsilon", "0.05")
    assert (tmp_path / "a.dtm").read_bytes() == (tmp_path / "b.dtm").read_bytes()


def test_console_script(tmp_path, example2_csv):
    proc = subprocess.run([sys.executable, "-m", "distrust.cli", "preprocess", str(example2_csv),
                           "--target", "y", "--k", "2", "--out", str(tmp_path / "m.dtm")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "distrust.cli", "bogus"], capture_output=True)
    assert proc.returncode == 3
