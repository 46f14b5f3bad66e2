"""Dataset container, CSV I/O, [0, 1] scaling, PCA and train/test splitting."""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import DataParseError, EmptyDatasetError
from .tolerances import JACOBI_MAX_SWEEPS, JACOBI_TOL


class Sample(NamedTuple):
    features: np.ndarray
    label: int


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled points; labels are encoded 1..C.

    ``label_names[j - 1]`` is the original spelling of label ``j``. An empty
    dataset is representable (pruning can produce one) but never loaded.
    """

    X: np.ndarray
    y: np.ndarray
    n_classes: int
    label_names: tuple = ()
    feature_names: tuple = field(default=())

    def __post_init__(self):
        X = _frozen(self.X, float)
        if X.ndim == 1:
            X = _frozen(X.reshape(-1, 1), float)
        if X.ndim == 2 and X.shape[0] == 0 and self.feature_names:
            X = _frozen(X.reshape(0, len(self.feature_names)), float)
        y = _frozen(self.y, np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError(f"features {X.shape} and labels {y.shape} disagree")
        if y.size and (y.min() < 1 or y.max() > self.n_classes):
            raise ValueError(f"labels must lie in 1..{self.n_classes}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if not self.label_names:
            object.__setattr__(self, "label_names", tuple(str(j) for j in range(1, self.n_classes + 1)))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def C(self):
        return self.n_classes

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return Sample(self.X[i], int(self.y[i]))

    def samples(self):
        return [self[i] for i in range(self.n)]

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.n_classes, self.label_names, self.feature_names)

    def with_features(self, X, feature_names=()):
        return Dataset(X, self.y, self.n_classes, self.label_names, feature_names)

    def append(self, X, y):
        X = np.asarray(X, dtype=float).reshape(-1, self.d)
        return Dataset(np.vstack([self.X, X]), np.concatenate([self.y, np.asarray(y, dtype=np.int64)]),
                       self.n_classes, self.label_names, self.feature_names)

    def encode_label(self, name):
        return self.label_names.index(str(name)) + 1

    def relabel(self, label_names):
        """The same points with labels encoded by position in ``label_names``."""
        label_names = tuple(str(n) for n in label_names)
        if label_names == self.label_names:
            return self
        missing = set(self.label_names) - set(label_names)
        if missing:
            raise ValueError(f"labels {sorted(missing)} not among {label_names}")
        code = np.array([0] + [label_names.index(n) + 1 for n in self.label_names], dtype=np.int64)
        return Dataset(self.X, code[self.y], len(label_names), label_names, self.feature_names)


def _is_float(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, label_col=-1):
    """Read a CSV of features plus one label column.

    ``label_col`` is a column index (negative counts from the end) or, when the
    file has a header row, a column name. A header is detected when some
    non-empty feature cell of the first row is not a number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(lineno, row) for lineno, row in enumerate(csv.reader(fh), start=1) if row]
    if not rows:
        raise EmptyDatasetError(f"{path}: empty file")

    first = rows[0][1]
    width = len(first)
    if isinstance(label_col, str) and not label_col.lstrip("-").isdigit():
        header = True
        if label_col not in first:
            raise ValueError(f"label column {label_col!r} not in header {first}")
        col = first.index(label_col)
    else:
        col = int(label_col)
        col = col + width if col < 0 else col
        if not 0 <= col < width:
            raise ValueError(f"label column {label_col} out of range for {width} columns")
        header = any(cell.strip() and not _is_float(cell) for j, cell in enumerate(first) if j != col)

    feature_names = tuple(c for j, c in enumerate(first) if j != col) if header else ()
    body = rows[1:] if header else rows
    if not body:
        raise EmptyDatasetError(f"{path}: no data rows")

    X = []
    raw_labels = []
    for lineno, row in body:
        if len(row) != width:
            raise DataParseError(lineno, f"expected {width} fields, found {len(row)}")
        feats = []
        for j, cell in enumerate(row):
            if j == col:
                continue
            cell = cell.strip()
            if not cell:
                raise DataParseError(lineno, f"empty field in column {j}")
            try:
                value = float(cell)
            except ValueError:
                raise DataParseError(lineno, f"non-numeric field {cell!r} in column {j}") from None
            if not math.isfinite(value):
                raise DataParseError(lineno, f"non-finite field {cell!r} in column {j}")
            feats.append(value)
        label = row[col].strip()
        if not label:
            raise DataParseError(lineno, "empty label")
        X.append(feats)
        raw_labels.append(label)

    names = list(dict.fromkeys(raw_labels))
    code = {name: i + 1 for i, name in enumerate(names)}
    y = [code[name] for name in raw_labels]
    return Dataset(np.array(X, dtype=float).reshape(len(X), width - 1), y, len(names),
                   tuple(names), feature_names)


def save_csv(ds, path):
    """Write ``ds`` with a header row; floats use their shortest round-trip repr."""
    names = ds.feature_names or tuple(f"x{j}" for j in range(ds.d))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + ["label"])
        for i in range(ds.n):
            w.writerow([repr(float(v)) for v in ds.X[i]] + [ds.label_names[ds.y[i] - 1]])


@dataclass(frozen=True)
class ScaleTable:
    mins: np.ndarray
    ranges: np.ndarray

    def apply(self, ds):
        safe = np.where(self.ranges > 0, self.ranges, 1.0)
        X = (ds.X - self.mins) / safe
        X[:, self.ranges == 0] = 0.0
        return ds.with_features(X, ds.feature_names)

    def to_json(self):
        return {str(j): {"min": float(self.mins[j]), "range": float(self.ranges[j])}
                for j in range(len(self.mins))}

    @classmethod
    def from_json(cls, doc):
        keys = sorted(doc, key=int)
        return cls(np.array([doc[k]["min"] for k in keys]), np.array([doc[k]["range"] for k in keys]))


def scale_features(ds):
    """Map every column affinely onto [0, 1]; constant columns become 0."""
    mins = ds.X.min(axis=0)
    ranges = ds.X.max(axis=0) - mins
    table = ScaleTable(mins, ranges)
    return table.apply(ds), table


def save_scale_table(table, path):
    Path(path).write_text(json.dumps(table.to_json(), indent=2, sort_keys=True))


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def d(self):
        return self.mean.shape[0]

    @property
    def p(self):
        return self.components.shape[0]


def pca_fit(ds, p):
    """Top-``p`` principal axes via cyclic Jacobi on the covariance matrix.

    Rows are ordered by decreasing eigenvalue; each row is signed so that its
    largest-magnitude entry is non-negative.
    """
    if not 1 <= p <= min(ds.n, ds.d):
        raise ValueError(f"target dimension {p} outside 1..{min(ds.n, ds.d)}")
    mean = ds.X.mean(axis=0)
    centered = ds.X - mean
    cov = centered.T @ centered / max(ds.n - 1, 1)
    cov = (cov + cov.T) / 2
    evals, evecs, _ = kernels.jacobi_eigh(cov, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    order = sorted(range(len(evals)), key=lambda j: (-evals[j], j))[:p]
    comps = evecs[:, order].T.copy()
    for row in comps:
        lead = int(np.argmax(np.abs(row)))
        if row[lead] < 0:
            row *= -1.0
    return PcaModel(_frozen(mean, float), _frozen(comps, float), _frozen(evals[order], float))


def pca_transform(model, ds):
    if ds.d != model.d:
        raise ValueError(f"dataset has {ds.d} features, model expects {model.d}")
    Z = (ds.X - model.mean) @ model.components.T
    return ds.with_features(Z, tuple(f"pc{j}" for j in range(model.p)))


def split(ds, test_count, seed):
    """Seeded shuffle, then the first ``test_count`` points become the test set."""
    if not 0 < test_count < ds.n:
        raise ValueError(f"test_count must be in 1..{ds.n - 1}, got {test_count}")
    perm = np.random.default_rng(seed).permutation(ds.n)
    return ds.subset(perm[test_count:]), ds.subset(perm[:test_count])
