import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nprobust.classifiers import (
    LEAF, Forest, KnnModel, accuracy, dt_predict, dt_train, knn_predict, load_model, model_from_json,
    model_to_json, rf_predict, rf_train, save_model,
)
from nprobust.data import save_csv
from nprobust.geometry import tree_leaf_region
from nprobust.harness import synth_dataset

from oracles import dataset, stump, tree_doc


def test_knn_examples():
    m = KnnModel(dataset([0.0, 1.0], [1, 2]), 1)
    assert knn_predict(m, [0.2]) == 1
    m3 = KnnModel(dataset([0.0, 0.1, 1.0], [1, 1, 2]), 3)
    assert knn_predict(m3, [0.9]) == 1
    m2 = KnnModel(dataset([0.0, 1.0], [2, 1]), 2)
    assert knn_predict(m2, [0.4]) == 1  # one vote each: smaller label wins


def test_knn_distance_tie_prefers_lower_index():
    m = KnnModel(dataset([-1.0, 1.0], [2, 1]), 1)
    assert m.predict([0.0]) == 2
    assert m.predict_batch(np.array([[0.0]])).tolist() == [2]


def test_knn_dimension_check():
    m = KnnModel(dataset([[0.0, 0.0]], [1]), 1)
    with pytest.raises(ValueError):
        m.predict([0.0])
    with pytest.raises(ValueError):
        KnnModel(dataset([[0.0, 0.0]], [1]), 2)


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_knn_batch_matches_naive(rng, k):
    X = rng.uniform(size=(15, 2))
    y = rng.integers(1, 4, size=15)
    m = KnnModel(dataset(X, y, 3), k)
    Q = rng.uniform(size=(300, 2))
    batch = m.predict_batch(Q)
    for q, b in zip(Q, batch):
        order = sorted(range(15), key=lambda i: (float(((X[i] - q) ** 2).sum()), i))[:k]
        counts = [sum(y[i] == c for i in order) for c in (1, 2, 3)]
        assert b == m.predict(q) == counts.index(max(counts)) + 1


def test_dt_single_split_example():
    t = dt_train(dataset([0.0, 1.0], [1, 2]), max_depth=1)
    assert t.feature[0] == 0 and t.threshold[0] == 0.5
    assert t.value[t.left[0]].tolist() == [1.0, 0.0]
    assert t.value[t.right[0]].tolist() == [0.0, 1.0]
    assert dt_predict(t, [0.2]) == 1 and dt_predict(t, [0.5]) == 1 and dt_predict(t, [0.7]) == 2


def test_dt_pure_and_depth_zero():
    t = dt_train(dataset([0.0, 1.0, 2.0], [2, 2, 2], 2), max_depth=5)
    assert t.n_nodes == 1 and t.value[0].tolist() == [0.0, 1.0]
    t = dt_train(dataset([0.0, 1.0, 2.0, 3.0], [1, 2, 2, 2]), max_depth=0)
    assert t.n_nodes == 1 and np.allclose(t.value[0], [0.25, 0.75])


def test_dt_equal_leaf_votes_pick_label_one():
    t = model_from_json(tree_doc(stump(left=(0.5, 0.5)), 1))
    assert dt_predict(t, [0.0]) == 1


def test_dt_equal_gain_prefers_lower_feature():
    # both features separate the classes perfectly
    t = dt_train(dataset([[0, 0], [1, 1]], [1, 2]), max_depth=1)
    assert t.feature[0] == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 4))
def test_dt_depth_bound_and_leaf_vectors(seed, depth):
    rng = np.random.default_rng(seed)
    ds = dataset(rng.uniform(size=(30, 3)), rng.integers(1, 4, size=30), 3)
    t = dt_train(ds, max_depth=depth)
    assert t.depth() <= depth
    for leaf in t.leaves():
        assert len(t.path(leaf)) <= depth
        assert np.all(t.value[leaf] >= 0) and abs(t.value[leaf].sum() - 1) < 1e-9
    assert np.all(np.isfinite(t.threshold[t.feature != LEAF]))


def test_dt_predict_matches_leaf_region(rng):
    ds = dataset(rng.uniform(size=(40, 2)), rng.integers(1, 3, size=40))
    t = dt_train(ds, max_depth=4)
    regions = {leaf: tree_leaf_region(t, leaf) for leaf in t.leaves()}
    for z in rng.uniform(size=(200, 2)):
        inside = [leaf for leaf, P in regions.items() if np.all(P.A @ z - P.b <= 1e-12)]
        assert t.apply(z) in inside
        assert dt_predict(t, z) == int(np.argmax(t.value[t.apply(z)])) + 1


def test_rf_single_tree_without_bootstrap_is_dt(rng):
    ds = dataset(rng.uniform(size=(40, 3)), rng.integers(1, 3, size=40))
    f = rf_train(ds, T=1, max_depth=3, seed=0, bootstrap=False, max_features=None)
    t = dt_train(ds, max_depth=3)
    Q = rng.uniform(size=(500, 3))
    assert np.array_equal(f.predict_batch(Q), t.predict_batch(Q))
    assert np.array_equal(f.trees[0].threshold, t.threshold)


def test_rf_deterministic(rng):
    ds = dataset(rng.uniform(size=(40, 3)), rng.integers(1, 3, size=40))
    a = rf_train(ds, T=5, max_depth=3, seed=7)
    b = rf_train(ds, T=5, max_depth=3, seed=7)
    assert json.dumps(model_to_json(a)) == json.dumps(model_to_json(b))


def test_rf_training_accuracy_on_clusters():
    ds = synth_dataset("two-gaussians-overlap", 200, 0.1, seed=0, separation=1.0)
    f = rf_train(ds, T=25, max_depth=5, seed=0)
    assert accuracy(f, ds) >= 0.95


def test_rf_vote_rules():
    one = tree_doc(stump(left=(1.0, 0.0), right=(0.9, 0.1)), 1)
    two = tree_doc(stump(left=(1.0, 0.0), right=(0.0, 1.0)), 1)
    f = Forest((model_from_json(one), model_from_json(two)))
    assert rf_predict(f, [0.0]) == 1  # (1,0) + (1,0)
    assert rf_predict(f, [1.0]) == 2  # (0.9, 1.1)
    tie = tree_doc(stump(right=(0.5, 0.5)), 1)
    f = Forest((model_from_json(tie), model_from_json(tie)))
    assert rf_predict(f, [1.0]) == 1  # (1.0, 1.0)


def test_accuracy_examples():
    ds = dataset([0.0, 1.0, 2.0, 3.0], [1, 2, 1, 2])
    m = KnnModel(ds, 1)
    assert accuracy(m, ds) == 1.0
    const = model_from_json(tree_doc({"value": [1.0, 0.0]}, 1))
    assert accuracy(const, ds) == 0.5
    with pytest.raises(ValueError):
        accuracy(m, ds.subset([]))


def test_model_json_roundtrip(tmp_path, rng):
    ds = dataset(rng.uniform(size=(30, 2)), rng.integers(1, 3, size=30))
    save_csv(ds, tmp_path / "train.csv")
    Q = rng.uniform(size=(200, 2))
    models = [KnnModel(ds, 3), dt_train(ds, 3), rf_train(ds, T=4, max_depth=3, seed=1)]
    for i, m in enumerate(models):
        path = tmp_path / f"m{i}.json"
        save_model(m, path, tmp_path / "train.csv", "label")
        back = load_model(path)
        assert np.array_equal(back.predict_batch(Q), m.predict_batch(Q))
        assert back.train is not None and back.train.n == 30


def test_oblique_tree_from_json():
    root = {"weights": [1.0, 1.0], "threshold": 1.0, "left": {"value": [1, 0]}, "right": {"value": [0, 1]}}
    t = model_from_json(tree_doc(root, 2))
    assert t.predict([0.4, 0.4]) == 1 and t.predict([0.6, 0.6]) == 2
    assert t.predict_batch(np.array([[0.4, 0.4], [0.6, 0.6]])).tolist() == [1, 2]
