"""k-NN, entropy decision trees and random forests.

All three expose ``predict(x)``, ``predict_batch(X)``, ``n_features``,
``n_classes`` and ``train`` (the dataset they were fitted on, if known), which
is the surface the geometry and attack modules rely on. Ties always resolve
to the smallest label index.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, load_csv

FORMAT = "nprobust-model"
FORMAT_VERSION = 1

LEAF = -2
OBLIQUE = -1


def _check_dim(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise ValueError(f"input has shape {x.shape}, expected ({d},)")
    return x


def _first_argmax(v):
    # np.argmax already returns the first maximum
    return int(np.argmax(v)) + 1


# k-NN ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KnnModel:
    """k-NN with Euclidean neighbor selection.

    Distance ties prefer the lower training index.
    """

    train: Dataset
    k: int = 1
    train_path: str | None = None

    def __post_init__(self):
        if not 1 <= self.k <= self.train.n:
            raise ValueError(f"k={self.k} outside 1..{self.train.n}")

    @property
    def n_features(self):
        return self.train.d

    @property
    def n_classes(self):
        return self.train.n_classes

    def neighbors(self, x):
        x = _check_dim(x, self.n_features)
        diff = self.train.X - x
        dist = np.einsum("ij,ij->i", diff, diff)
        return np.argsort(dist, kind="stable")[: self.k]

    def vote(self, indices):
        counts = np.bincount(self.train.y[np.asarray(indices)], minlength=self.n_classes + 1)[1:]
        return _first_argmax(counts)

    def predict(self, x):
        return self.vote(self.neighbors(x))

    def predict_batch(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.n_features)
        out = np.empty(X.shape[0], dtype=np.int64)
        T = self.train.X
        chunk = max(1, 4_000_000 // max(1, T.size))
        for s in range(0, X.shape[0], chunk):
            Q = X[s:s + chunk]
            # same arithmetic as neighbors() so exact ties resolve identically
            diff = Q[:, None, :] - T[None, :, :]
            dist = np.einsum("qnd,qnd->qn", diff, diff)
            if self.k == 1:
                out[s:s + chunk] = self.train.y[np.argmin(dist, axis=1)]
            else:
                idx = np.argsort(dist, axis=1, kind="stable")[:, : self.k]
                labels = self.train.y[idx]
                counts = np.stack([(labels == c).sum(axis=1) for c in range(1, self.n_classes + 1)], axis=1)
                out[s:s + chunk] = np.argmax(counts, axis=1) + 1
        return out


def knn_predict(m, x):
    return m.predict(x)


# Decision trees --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Binary tree over ``x[feature] <= threshold`` splits, stored as flat arrays.

    Node 0 is the root. Internal nodes go left iff the split holds. Oblique
    nodes (``feature == OBLIQUE``) test ``weights[node] . x <= threshold``;
    they only arise from loaded JSON. ``value[node]`` holds class proportions.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int
    n_classes: int
    max_depth: int
    weights: dict = field(default_factory=dict)
    train: Dataset | None = None

    @property
    def n_nodes(self):
        return len(self.feature)

    def is_leaf(self, node):
        return self.feature[node] == LEAF

    def leaves(self):
        return [i for i in range(self.n_nodes) if self.feature[i] == LEAF]

    def split_of(self, node):
        """``(w, b)`` such that the split at ``node`` holds iff ``w . x <= b``."""
        if self.feature[node] == OBLIQUE:
            return np.asarray(self.weights[node], dtype=float), float(self.threshold[node])
        w = np.zeros(self.n_features)
        w[self.feature[node]] = 1.0
        return w, float(self.threshold[node])

    def _goes_left(self, node, x):
        f = self.feature[node]
        if f == OBLIQUE:
            return float(np.dot(self.weights[node], x)) <= self.threshold[node]
        return x[f] <= self.threshold[node]

    def apply(self, x):
        """Id of the leaf reached by ``x``."""
        x = _check_dim(x, self.n_features)
        node = 0
        while self.feature[node] != LEAF:
            node = self.left[node] if self._goes_left(node, x) else self.right[node]
        return int(node)

    def path(self, leaf):
        """Root-to-leaf list of ``(internal node, went_left)``."""
        parent = {}
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                parent[int(self.left[i])] = (i, True)
                parent[int(self.right[i])] = (i, False)
        if not 0 <= leaf < self.n_nodes or self.feature[leaf] != LEAF:
            raise ValueError(f"{leaf} is not a leaf id")
        steps = []
        node = leaf
        while node in parent:
            node, went_left = parent[node]
            steps.append((node, went_left))
        return steps[::-1]

    def depth(self):
        best = 0
        stack = [(0, 0)]
        while stack:
            node, dep = stack.pop()
            best = max(best, dep)
            if self.feature[node] != LEAF:
                stack.append((int(self.left[node]), dep + 1))
                stack.append((int(self.right[node]), dep + 1))
        return best

    def apply_batch(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.n_features)
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[nodes] != LEAF)
        while active.size:
            cur = nodes[active]
            feat = self.feature[cur]
            go_left = np.empty(active.size, dtype=bool)
            axis = feat >= 0
            go_left[axis] = X[active[axis], feat[axis]] <= self.threshold[cur[axis]]
            for j in np.flatnonzero(~axis):
                go_left[j] = float(np.dot(self.weights[int(cur[j])], X[active[j]])) <= self.threshold[cur[j]]
            nodes[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[nodes[active]] != LEAF]
        return nodes

    def predict(self, x):
        return _first_argmax(self.value[self.apply(x)])

    def predict_batch(self, X):
        return np.argmax(self.value[self.apply_batch(X)], axis=1) + 1


def _entropy(counts):
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / total, 0.0)
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * logs).sum(axis=-1)


_GAIN_TOL = 1e-12


def _best_split(X, y1h, w, features):
    """Highest information-gain split over ``features``.

    Returns ``(gain, feature, threshold)``; ties go to the lowest feature,
    then the smallest threshold.
    """
    counts = (y1h * w[:, None]).sum(axis=0)
    total = counts.sum()
    parent = _entropy(counts)
    best = (0.0, -1, 0.0)
    for j in features:
        order = np.argsort(X[:, j], kind="stable")
        vals = X[order, j]
        cum = np.cumsum(y1h[order] * w[order, None], axis=0)
        cut = np.flatnonzero(vals[:-1] < vals[1:])
        if cut.size == 0:
            continue
        left = cum[cut]
        right = counts - left
        wl = left.sum(axis=1)
        gain = parent - (wl * _entropy(left) + (total - wl) * _entropy(right)) / total
        top = gain.max()
        i = int(np.flatnonzero(gain >= top - _GAIN_TOL)[0])
        if gain[i] > best[0] + _GAIN_TOL:
            best = (float(gain[i]), int(j), float((vals[cut[i]] + vals[cut[i] + 1]) / 2))
    return best


def _grow(X, y, weights, n_classes, max_depth, feature_sampler):
    y1h = np.eye(n_classes)[y - 1]
    feature, threshold, left, right, value = [], [], [], [], []

    def build(idx, depth):
        node = len(feature)
        w = weights[idx]
        counts = (y1h[idx] * w[:, None]).sum(axis=0)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        if depth >= max_depth or np.count_nonzero(counts) <= 1:
            return node
        gain, f, thr = _best_split(X[idx], y1h[idx], w, feature_sampler())
        if f < 0 or gain <= _GAIN_TOL:
            return node
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = build(idx[go_left], depth + 1)
        right[node] = build(idx[~go_left], depth + 1)
        return node

    build(np.flatnonzero(weights > 0), 0)
    return (np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
            np.array(left, dtype=np.int64), np.array(right, dtype=np.int64), np.array(value, dtype=float))


def _resolve_max_features(max_features, d):
    if max_features is None:
        return d
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    k = int(max_features)
    if not 1 <= k <= d:
        raise ValueError(f"max_features={k} outside 1..{d}")
    return k


def dt_train(train, max_depth=5, rng=None, max_features=None, weights=None):
    """Greedy top-down entropy tree.

    Candidate thresholds are midpoints between consecutive distinct values.
    ``rng`` is only consulted when ``max_features`` restricts the split search.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    if train.n == 0:
        raise ValueError("cannot train on an empty dataset")
    d = train.d
    k = _resolve_max_features(max_features, d)
    rng = np.random.default_rng(rng)
    if k == d:
        sampler = lambda: range(d)  # noqa: E731
    else:
        sampler = lambda: np.sort(rng.choice(d, size=k, replace=False))  # noqa: E731
    w = np.ones(train.n) if weights is None else np.asarray(weights, dtype=float)
    feat, thr, lft, rgt, val = _grow(train.X, train.y, w, train.n_classes, max_depth, sampler)
    return DecisionTree(feat, thr, lft, rgt, val, d, train.n_classes, max_depth, train=train)


def dt_predict(t, x):
    return t.predict(x)


# Forests ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple
    seeds: tuple = ()
    bootstrap: bool = True
    train: Dataset | None = None

    def __post_init__(self):
        if not self.trees:
            raise ValueError("a forest needs at least one tree")
        d = {t.n_features for t in self.trees}
        c = {t.n_classes for t in self.trees}
        if len(d) != 1 or len(c) != 1:
            raise ValueError("trees disagree on dimension or class count")

    @property
    def n_features(self):
        return self.trees[0].n_features

    @property
    def n_classes(self):
        return self.trees[0].n_classes

    @property
    def T(self):
        return len(self.trees)

    def apply(self, x):
        return tuple(t.apply(x) for t in self.trees)

    def scores(self, x):
        return sum(t.value[t.apply(x)] for t in self.trees)

    def predict(self, x):
        return _first_argmax(self.scores(x))

    def predict_batch(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.n_features)
        total = np.zeros((X.shape[0], self.n_classes))
        for t in self.trees:
            total += t.value[t.apply_batch(X)]
        return np.argmax(total, axis=1) + 1


def rf_train(train, T=100, max_depth=5, seed=0, bootstrap=True, max_features="sqrt"):
    """Bagged entropy trees; every node searches ``max_features`` random features."""
    if T < 1:
        raise ValueError("T must be >= 1")
    seeds = tuple(int(s) for s in np.random.default_rng(seed).integers(0, 2**63 - 1, size=T))
    trees = []
    for s in seeds:
        rng = np.random.default_rng(s)
        weights = None
        if bootstrap:
            weights = np.bincount(rng.integers(0, train.n, size=train.n), minlength=train.n).astype(float)
        trees.append(dt_train(train, max_depth, rng, max_features, weights))
    return Forest(tuple(trees), seeds, bootstrap, train)


def rf_predict(f, x):
    return f.predict(x)


# Shared ----------------------------------------------------------------------

def predict(f, x):
    return f.predict(x)


def accuracy(f, ds):
    if ds.n == 0:
        raise ValueError("accuracy of an empty dataset is undefined")
    if ds.d != f.n_features:
        raise ValueError(f"dataset has {ds.d} features, classifier expects {f.n_features}")
    return float(np.mean(f.predict_batch(ds.X) == ds.y))


def train_classifier(kind, train, *, k=1, max_depth=5, n_trees=100, seed=0):
    """Build a classifier from a short spec, as used by the harness and CLI."""
    if kind == "knn":
        return KnnModel(train, k)
    if kind == "dt":
        return dt_train(train, max_depth)
    if kind == "rf":
        return rf_train(train, n_trees, max_depth, seed)
    raise ValueError(f"unknown classifier kind {kind!r}")


# Serialization ---------------------------------------------------------------

def _tree_node_doc(t, node):
    if t.feature[node] == LEAF:
        return {"value": [float(v) for v in t.value[node]]}
    doc = {"threshold": float(t.threshold[node])}
    if t.feature[node] == OBLIQUE:
        doc["weights"] = [float(v) for v in t.weights[node]]
    else:
        doc["feature"] = int(t.feature[node])
    doc["value"] = [float(v) for v in t.value[node]]
    doc["left"] = _tree_node_doc(t, int(t.left[node]))
    doc["right"] = _tree_node_doc(t, int(t.right[node]))
    return doc


def _tree_doc(t):
    return {"n_features": t.n_features, "n_classes": t.n_classes, "max_depth": t.max_depth,
            "root": _tree_node_doc(t, 0)}


def _tree_from_doc(doc, train=None):
    feature, threshold, left, right, value, weights = [], [], [], [], [], {}
    n_classes = int(doc["n_classes"])

    def walk(nd):
        node = len(feature)
        feature.append(LEAF)
        threshold.append(float(nd.get("threshold", 0.0)))
        left.append(-1)
        right.append(-1)
        vec = np.asarray(nd.get("value", np.full(n_classes, 1.0 / n_classes)), dtype=float)
        value.append(vec)
        if "left" in nd:
            if "weights" in nd:
                feature[node] = OBLIQUE
                weights[node] = np.asarray(nd["weights"], dtype=float)
            else:
                feature[node] = int(nd["feature"])
            left[node] = walk(nd["left"])
            right[node] = walk(nd["right"])
        return node

    walk(doc["root"])
    return DecisionTree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                        np.array(right, dtype=np.int64), np.array(value), int(doc["n_features"]), n_classes,
                        int(doc.get("max_depth", 0)), weights, train)


def model_to_json(model, train_path=None, label_col=-1):
    if isinstance(model, KnnModel):
        path = train_path or model.train_path
        if path is None:
            raise ValueError("k-NN serialization needs the training-set path")
        body = {"kind": "knn", "k": model.k, "train_path": str(path), "label_col": label_col}
    elif isinstance(model, DecisionTree):
        body = {"kind": "dt", **_tree_doc(model)}
    elif isinstance(model, Forest):
        body = {"kind": "rf", "bootstrap": model.bootstrap, "seeds": list(model.seeds),
                "trees": [_tree_doc(t) for t in model.trees]}
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    if train_path is not None and "train_path" not in body:
        body["train_path"] = str(train_path)
        body["label_col"] = label_col
    train = getattr(model, "train", None)
    if train is not None:
        body["label_names"] = list(train.label_names)
    return {"format": FORMAT, "version": FORMAT_VERSION, **body}


def model_from_json(doc, train=None):
    if doc.get("format") != FORMAT:
        raise ValueError("not an nprobust model document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    if train is None and "train_path" in doc:
        train = load_csv(doc["train_path"], doc.get("label_col", -1))
    if train is not None and "label_names" in doc:
        # the CSV encodes labels by first occurrence, which need not match the model
        train = train.relabel(doc["label_names"])
    kind = doc["kind"]
    if kind == "knn":
        return KnnModel(train, int(doc["k"]), doc["train_path"])
    if kind == "dt":
        return _tree_from_doc(doc, train)
    if kind == "rf":
        trees = tuple(_tree_from_doc(t, train) for t in doc["trees"])
        return Forest(trees, tuple(doc.get("seeds", ())), bool(doc.get("bootstrap", True)), train)
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path, train_path=None, label_col=-1):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model, train_path, label_col), fh, indent=1)


def load_model(path, train=None):
    with open(path, encoding="utf-8") as fh:
        return model_from_json(json.load(fh), train)
