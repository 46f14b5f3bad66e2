import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nprobust.data import load_csv, pca_fit, pca_transform, save_csv, scale_features, split
from nprobust.errors import DataParseError, EmptyDatasetError

from oracles import dataset


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_two_rows(tmp_path):
    ds = load_csv(write(tmp_path, "0.1,0.2,A\n0.3,0.4,B\n"), -1)
    assert (ds.n, ds.d, ds.C) == (2, 2, 2)
    assert ds.y.tolist() == [1, 2]
    assert ds.X.tolist() == [[0.1, 0.2], [0.3, 0.4]]


def test_load_first_occurrence_encoding(tmp_path):
    ds = load_csv(write(tmp_path, "0,A\n1,B\n2,A\n"))
    assert ds.y.tolist() == [1, 2, 1]
    assert ds.label_names == ("A", "B")


def test_load_malformed_row_names_row(tmp_path):
    with pytest.raises(DataParseError) as err:
        load_csv(write(tmp_path, "0.1,,A\n"))
    assert err.value.row == 1


def test_load_ragged_row(tmp_path):
    with pytest.raises(DataParseError) as err:
        load_csv(write(tmp_path, "0.1,0.2,A\n0.3,B\n"))
    assert err.value.row == 2


def test_load_empty(tmp_path):
    with pytest.raises(EmptyDatasetError):
        load_csv(write(tmp_path, ""))


def test_load_header_and_named_label(tmp_path):
    ds = load_csv(write(tmp_path, "cls,a,b\nX,1,2\nY,3,4\n"), "cls")
    assert ds.feature_names == ("a", "b")
    assert ds.X.tolist() == [[1, 2], [3, 4]]
    assert ds.label_names == ("X", "Y")


def test_label_column_by_index(tmp_path):
    ds = load_csv(write(tmp_path, "A,1,2\nB,3,4\n"), 0)
    assert ds.X.tolist() == [[1, 2], [3, 4]]


def test_roundtrip_bit_exact(tmp_path, rng):
    X = rng.normal(size=(20, 3)) * 10.0 ** rng.integers(-5, 5, size=(20, 3))
    ds = dataset(X, rng.integers(1, 4, size=20))
    save_csv(ds, tmp_path / "o.csv")
    back = load_csv(tmp_path / "o.csv", "label")
    assert np.array_equal(back.X, ds.X)
    assert [back.label_names[c - 1] for c in back.y] == [ds.label_names[c - 1] for c in ds.y]


def test_scale_examples():
    out, table = scale_features(dataset([[2.0], [4.0], [6.0]], [1, 1, 2]))
    assert out.X.ravel().tolist() == [0, 0.5, 1]
    out, _ = scale_features(dataset([[5.0], [5.0]], [1, 2]))
    assert out.X.ravel().tolist() == [0, 0]
    out, _ = scale_features(dataset([[0, 10], [1, 20]], [1, 2]))
    assert out.X.tolist() == [[0, 0], [1, 1]]


def test_scale_table_applies_to_new_data():
    train = dataset([[0.0, 1.0], [2.0, 1.0]], [1, 2])
    _, table = scale_features(train)
    out = table.apply(dataset([[1.0, 7.0]], [1], 2))
    assert out.X.tolist() == [[0.5, 0.0]]


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 12), st.integers(1, 4)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_scale_range_property(X):
    out, _ = scale_features(dataset(X, np.ones(X.shape[0], dtype=int)))
    assert np.all(out.X >= 0) and np.all(out.X <= 1 + 1e-12)


def test_pca_line_example():
    ds = dataset([[0, 0], [1, 2], [2, 4]], [1, 2, 1])
    m = pca_fit(ds, 1)
    assert np.allclose(m.components[0], np.array([1, 2]) / math.sqrt(5), atol=1e-10)
    # the model centers first, so the mean (1, 2) maps to 0 and (2, 4) to sqrt(5)
    z = pca_transform(m, dataset([[1, 2], [2, 4]], [1, 1]))
    assert np.allclose(z.X.ravel(), [0, math.sqrt(5)], atol=1e-10)


def test_pca_full_rank_isometry(rng):
    X = rng.normal(size=(30, 4))
    ds = dataset(X, np.ones(30, dtype=int))
    m = pca_fit(ds, 4)
    Z = pca_transform(m, ds).X
    back = Z @ m.components + m.mean
    assert np.abs(back - X).max() < 1e-8


def test_pca_orthonormal_and_sorted(rng):
    X = rng.normal(size=(60, 30)) @ rng.normal(size=(30, 30))
    m = pca_fit(dataset(X, np.ones(60, dtype=int)), 25)
    assert m.components.shape == (25, 30)
    assert np.abs(m.components @ m.components.T - np.eye(25)).max() < 1e-8
    assert np.all(np.diff(m.explained_variance) <= 1e-9)
    for row in m.components:
        assert row[np.argmax(np.abs(row))] >= 0


def test_pca_errors():
    ds = dataset([[0, 0], [1, 2]], [1, 2])
    with pytest.raises(ValueError):
        pca_fit(ds, 3)
    with pytest.raises(ValueError):
        pca_fit(ds, 0)
    m = pca_fit(ds, 1)
    with pytest.raises(ValueError):
        pca_transform(m, dataset([[0, 0, 0]], [1]))


def test_split_partition_and_determinism():
    ds = dataset(np.arange(10.0), [1, 2] * 5)
    tr, te = split(ds, 2, seed=3)
    assert (tr.n, te.n) == (8, 2)
    assert sorted(tr.X.ravel().tolist() + te.X.ravel().tolist()) == list(range(10))
    tr2, te2 = split(ds, 2, seed=3)
    assert np.array_equal(tr.X, tr2.X) and np.array_equal(te.X, te2.X)
    for bad in (0, 10):
        with pytest.raises(ValueError):
            split(ds, bad, seed=0)


def test_relabel():
    ds = dataset([0.0, 1.0, 2.0], [1, 2, 1])
    out = ds.relabel(("2", "1"))
    assert out.y.tolist() == [2, 1, 2] and out.label_names == ("2", "1")
    assert ds.relabel(ds.label_names) is ds
    with pytest.raises(ValueError):
        ds.relabel(("1",))
