import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distrust.dataset import REGRESSION, Dataset
from distrust.errors import ConfigError, InputError
from distrust.evaluation import (Disk, Polygon, SyntheticSpec, baseline_predict, bucket_index,
                                 bucketize, gen_synthetic, read_predictions, render_report)


def test_disk_extremes():
    ds, _, gy = gen_synthetic(SyntheticSpec(n=200, region=Disk((1e6, 1e6), 1.0), grid=10))
    assert set(ds.targets) == {1.0} and set(gy) == {1}
    ds, _, gy = gen_synthetic(SyntheticSpec(n=200, region=Disk((0, 0), 1e6), grid=10))
    assert set(ds.targets) == {0.0} and set(gy) == {0}
    assert ds.class_labels == ("-1", "1")


def test_synthetic_deterministic_and_shaped():
    a = gen_synthetic(SyntheticSpec(n=300, seed=4))
    b = gen_synthetic(SyntheticSpec(n=300, seed=4))
    np.testing.assert_array_equal(a[0].points, b[0].points)
    np.testing.assert_array_equal(a[2], b[2])
    assert a[1].shape == (6400, 2)


def test_polygon_region():
    square = Polygon(((-1, -1), (1, -1), (1, 1), (-1, 1)))
    assert square.contains(np.array([[0.0, 0.0], [2.0, 0.0]])).tolist() == [True, False]


def test_bad_covariance():
    with pytest.raises(ConfigError):
        SyntheticSpec(cov=((6, 4), (3, 1)))
    with pytest.raises(ConfigError):
        SyntheticSpec(cov=((1, 2), (2, 1)))


def test_baseline_predict():
    X = np.array([[0.0], [0.1], [0.2], [5.0]])
    ds = Dataset.from_arrays(X, [1, 1, 1, 0])
    assert baseline_predict(ds, [[0.05]], k=3).tolist() == [0]  # class id of label 1
    reg = Dataset.from_arrays(X, [1.0, 2.0, 3.0, 9.0], REGRESSION)
    assert baseline_predict(reg, [[0.1]], k=3).tolist() == [2.0]
    tie = Dataset.from_arrays(np.arange(10.0)[:, None], [0, 1] * 5)
    assert baseline_predict(tie, [[4.5]], k=10).tolist() == [0]


def test_bucket_index():
    assert bucket_index([0.05, 0.15, 0.95, 1.0, 0.0]).tolist() == [0, 1, 9, 9, 0]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=200))
def test_buckets_partition(vals):
    rep = bucketize(vals, "wdt", np.zeros(len(vals)), np.zeros(len(vals)))
    assert sum(b.count for b in rep.buckets) == len(vals)
    for v in vals:
        assert sum(b.lo <= v < b.hi or (b.hi == 1.0 and v == 1.0) for b in rep.buckets) == 1


def test_all_correct():
    vals = np.linspace(0, 1, 50)
    y = np.arange(50) % 2
    rep = bucketize(vals, "sdt", y, y)
    for b in rep.nonempty():
        assert b.accuracy == 1.0 and b.fpr == 0.0 and b.fnr == 0.0
    assert rep.spearman_rho is None


def test_confusion_rates():
    rep = bucketize([0.05] * 4, "wdt", [1, 1, 0, 0], [1, 0, 1, 0])
    b = rep.buckets[0]
    assert (b.accuracy, b.f1, b.fpr, b.fnr) == (0.5, 0.5, 0.5, 0.5)
    rep = bucketize([0.05] * 2, "wdt", [0, 0], [0, 0])
    assert rep.buckets[0].f1 is None


def test_regression_buckets_and_spearman():
    vals = [0.05, 0.05, 0.55, 0.95]
    rep = bucketize(vals, "wdt", [1.0, 1.0, 2.0, 4.0], [1.0, 1.0, 1.0, 1.0], REGRESSION)
    assert rep.buckets[0].mean_rss == 0.0 and rep.buckets[9].rss == 9.0
    assert rep.spearman_rho == pytest.approx(1.0)
    with pytest.raises(InputError):
        bucketize([0.1], "wdt", [1, 2], [1])
    with pytest.raises(ConfigError):
        bucketize([0.1], "xdt", [1], [1])


def test_render_report(tmp_path):
    vals = [0.05, 0.07, 0.95, 0.55]
    rep = bucketize(vals, "wdt", [0, 1, 1, 0], [0, 1, 0, 0])
    files = render_report(rep, tmp_path / "out" / "report")
    assert [f.suffix for f in files] == [".json", ".csv", ".svg"]
    assert json.loads(files[0].read_text())["report_version"] == 1
    rows = list(csv.reader(files[1].open()))
    assert len(rows) == len(rep.nonempty()) + 1
    svg = files[2].read_text()
    ET.fromstring(svg)
    # glyphs are paths; matplotlib keeps the legend text in a comment
    assert "omitted (empty)" in svg


def test_read_predictions(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("row_id,prediction,truth\n0,a,a\n1,b,a\n")
    assert read_predictions(p) == ([0, 1], ["a", "b"], ["a", "a"])
    p.write_text("id,prediction\n0,a\n")
    with pytest.raises(InputError):
        read_predictions(p)
    with pytest.raises(InputError):
        read_predictions(tmp_path / "none.csv")
