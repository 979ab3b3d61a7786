import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from distrust.dataset import (CATEGORICAL, CLASSIFICATION, ORDINAL, REGRESSION, Dataset,
                              encode, encode_query, infer_task, load_csv, read_queries)
from distrust.errors import ConfigError, InputError

from conftest import EXAMPLE2


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_example2(example2_csv):
    table, schema = load_csv(example2_csv, "y")
    assert len(table.rows) == 10
    assert [c.kind for c in schema] == [ORDINAL, ORDINAL, "target"]


def test_categorical_inferred(tmp_path):
    p = _write(tmp_path, "color,x,y\nred,1,a\nblue,2,b\nred,3,a\n")
    table, schema = load_csv(p, "y")
    assert schema[0].kind == CATEGORICAL
    ds = encode(table, schema)
    np.testing.assert_array_equal(ds.points[:, :2], [[1, 0], [0, 1], [1, 0]])
    assert ds.encoding.features[0].categories == ("red", "blue")


@pytest.mark.parametrize("text", [
    "x1,x2,y\n1,2\n",            # ragged
    "x1,x2,y\n1,,a\n",           # missing value
    "x1,x2,y\n",                 # header only
    "x1,x1,y\n1,2,a\n",          # duplicate column
    "x1,x2,z\n1,2,a\n",          # no target
])
def test_load_errors(tmp_path, text):
    with pytest.raises(InputError):
        load_csv(_write(tmp_path, text), "y")


def test_empty_and_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_csv(_write(tmp_path, ""), "y")
    with pytest.raises(InputError):
        load_csv(tmp_path / "nope.csv", "y")


def test_minmax_scaling(tmp_path):
    p = _write(tmp_path, "a,b,y\n-2,5,1.5\n0,5,2.5\n2,5,3.25\n")
    ds = encode(*load_csv(p, "y"))
    np.testing.assert_array_equal(ds.points[:, 0], [0.0, 0.5, 1.0])
    # constant column maps to 0
    np.testing.assert_array_equal(ds.points[:, 1], [0.0, 0.0, 0.0])
    assert ds.task == REGRESSION


def test_identity_scaling_query():
    ds = Dataset.from_arrays(EXAMPLE2, [0] * 10, bounds="identity")
    np.testing.assert_array_equal(ds.encode_query([0.81, 0.76]), [0.81, 0.76])


def test_identity_scaling_rejects_out_of_range(tmp_path):
    p = _write(tmp_path, "a,y\n2,0\n0.5,1\n")
    with pytest.raises(InputError):
        encode(*load_csv(p, "y"), scaling="identity")
    with pytest.raises(ConfigError):
        encode(*load_csv(p, "y"), scaling="zscore")


def test_query_extrapolates_and_rejects_unseen(tmp_path):
    p = _write(tmp_path, "a,color,y\n0,red,0\n1,blue,1\n")
    ds = encode(*load_csv(p, "y"))
    q = encode_query({"a": "3", "color": "red"}, ds.encoding)
    assert q[0] == 3.0
    with pytest.raises(InputError, match="color"):
        encode_query({"a": "0", "color": "green"}, ds.encoding)


def test_task_inference():
    assert infer_task(["a", "b"]) == CLASSIFICATION
    assert infer_task(["0", "1", "1"]) == CLASSIFICATION
    assert infer_task(["0.5", "1.25"]) == REGRESSION
    assert infer_task([str(i) for i in range(50)]) == REGRESSION


def test_read_queries(tmp_path, example2_csv):
    ds = encode(*load_csv(example2_csv, "y"), scaling="identity")
    q = _write(tmp_path, "x2,x1,y\n0.76,0.81,a\n", "q.csv")
    X, truth = read_queries(q, ds.encoding)
    np.testing.assert_array_equal(X, [[0.81, 0.76]])
    assert truth == ["a"]
    empty = _write(tmp_path, "", "e.csv")
    X, truth = read_queries(empty, ds.encoding)
    assert X.shape == (0, 2) and truth is None
    with pytest.raises(InputError):
        read_queries(_write(tmp_path, "x1\n0.5\n", "bad.csv"), ds.encoding)


def test_encoding_dict_round_trip(tmp_path):
    p = _write(tmp_path, "a,color,y\n0,red,x\n4,blue,z\n")
    ds = encode(*load_csv(p, "y"))
    from distrust.dataset import EncodingMap
    assert EncodingMap.from_dict(ds.encoding.to_dict()) == ds.encoding


def test_arrays_are_read_only():
    ds = Dataset.from_arrays(EXAMPLE2, [0] * 10)
    with pytest.raises(ValueError):
        ds.points[0, 0] = 1.0


tables = st.integers(2, 12).flatmap(lambda n: st.tuples(
    arrays(np.float64, (n, 3), elements=st.floats(-1e3, 1e3, allow_nan=False)),
    st.lists(st.sampled_from(["r", "g", "b"]), min_size=n, max_size=n)))


@settings(max_examples=60, deadline=None)
@given(tables)
def test_encoding_properties(tmp_path_factory, data):
    X, cats = data
    path = tmp_path_factory.mktemp("h") / "t.csv"
    lines = ["a,b,c,col,y"] + [",".join(map(repr, map(float, r))) + f",{c},{i % 2}"
                               for i, (r, c) in enumerate(zip(X, cats))]
    path.write_text("\n".join(lines) + "\n")
    table, schema = load_csv(path, "y")
    ds = encode(table, schema)
    assert ds.n == len(X) and len(ds.targets) == ds.n
    assert np.all((ds.points >= 0) & (ds.points <= 1))
    ncat = len(ds.encoding.features[3].categories)
    np.testing.assert_array_equal(ds.points[:, 3:3 + ncat].sum(axis=1), 1.0)
    for j in range(3):
        col = ds.points[:, j]
        if X[:, j].max() > X[:, j].min():
            assert col.min() == 0.0 and col.max() == 1.0
    # re-encoding a training row reproduces it bit for bit
    for i, row in enumerate(table.rows):
        np.testing.assert_array_equal(ds.encode_query(dict(zip(table.header, row))), ds.points[i])
    # row order of targets follows the file
    np.testing.assert_array_equal(ds.targets, [i % 2 for i in range(len(X))])
