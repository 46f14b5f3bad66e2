"""Convex polyhedral decompositions of k-NN, trees and tree ensembles.

A k-NN classifier is constant on each order-k Voronoi cell: for a k-subset U of
the training set, the cell is cut out by the bisectors between every point of
U and every point outside it. A tree is constant on the set of inputs reaching
each leaf, and an ensemble on each intersection of one leaf per tree.

All constraints are closed (``w . z <= b``), including the "went right" side
of a split, which is strictly ``>`` in the classifier. Regions therefore
overlap on measure-zero boundaries; the attacks re-check labels.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .classifiers import LEAF, OBLIQUE, DecisionTree, Forest, KnnModel
from .errors import DegenerateBisectorError
from .tolerances import DEDUP_TOL

_ZERO_NORMAL = 1e-12


@dataclass(frozen=True, eq=False)
class Halfspace:
    """The closed halfspace ``{z : w . z <= b}``."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if not np.any(np.abs(w) > _ZERO_NORMAL):
            raise DegenerateBisectorError("halfspace normal is zero")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    def contains(self, z, tol=1e-9):
        return float(self.w @ np.asarray(z, dtype=float)) - self.b <= tol


class Polyhedron:
    """Intersection of closed halfspaces, stored as ``A z <= b``.

    An empty constraint list is the whole space.
    """

    __slots__ = ("A", "b")

    def __init__(self, A, b, d=None):
        A = np.array(A, dtype=float, copy=True)
        if A.size == 0:
            if d is None:
                raise ValueError("dimension required for an unconstrained polyhedron")
            A = A.reshape(0, d)
        b = np.array(b, dtype=float, copy=True).reshape(-1)
        if A.ndim != 2 or A.shape[0] != b.shape[0]:
            raise ValueError(f"constraint matrix {A.shape} and offsets {b.shape} disagree")
        A.setflags(write=False)
        b.setflags(write=False)
        self.A = A
        self.b = b

    @classmethod
    def from_halfspaces(cls, halfspaces, d=None):
        halfspaces = list(halfspaces)
        if not halfspaces:
            return cls(np.zeros((0, d)), np.zeros(0), d)
        return cls(np.stack([h.w for h in halfspaces]), [h.b for h in halfspaces])

    @property
    def d(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def constraints(self):
        return [Halfspace(self.A[i], self.b[i]) for i in range(self.m)]

    def residuals(self, z):
        return self.A @ np.asarray(z, dtype=float) - self.b

    def contains(self, z, tol=1e-9):
        return self.m == 0 or bool(np.all(self.residuals(z) <= tol))

    def intersect(self, other):
        return Polyhedron(np.vstack([self.A, other.A]), np.concatenate([self.b, other.b]), self.d)

    def add(self, halfspace):
        return Polyhedron(np.vstack([self.A, halfspace.w[None, :]]), np.append(self.b, halfspace.b), self.d)

    def reduced(self):
        """Equivalent polyhedron with unit normals and no parallel duplicates.

        Constraints sharing a unit normal (within ``DEDUP_TOL``) collapse to the
        tightest one. Zero rows are dropped.
        """
        if self.m == 0:
            return self
        norms = np.linalg.norm(self.A, axis=1)
        keep = norms > _ZERO_NORMAL
        U = self.A[keep] / norms[keep, None]
        beta = self.b[keep] / norms[keep]
        key = np.round(U / DEDUP_TOL).astype(np.int64) if U.size else U
        _, inverse = np.unique(key, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        groups = {}
        for i, g in enumerate(inverse):
            if g not in groups or beta[i] < beta[groups[g]]:
                groups[g] = i
        rows = sorted(groups.values())
        return Polyhedron(U[rows], beta[rows], self.d)

    def __repr__(self):
        return f"Polyhedron(m={self.m}, d={self.d})"


@dataclass(frozen=True, eq=False)
class Region:
    """A decomposition cell: the classifier predicts ``label`` throughout.

    ``provenance`` is ``("knn", U)`` with U the sorted neighbor indices, or
    ``("leaves", (l_1, ..., l_T))`` with one leaf id per tree.
    """

    polyhedron: Polyhedron
    label: int
    provenance: tuple

    def to_json(self):
        kind, ids = self.provenance
        return {
            "provenance": {"kind": kind, "ids": [int(i) for i in ids]},
            "label": int(self.label),
            "constraints": [{"w": [float(v) for v in self.polyhedron.A[i]], "b": float(self.polyhedron.b[i])}
                            for i in range(self.polyhedron.m)],
        }


# k-NN ------------------------------------------------------------------------

def bisector(a, b):
    """Closed halfspace of points weakly nearer ``a`` than ``b`` (Euclidean)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w = b - a
    if not np.any(np.abs(w) > _ZERO_NORMAL):
        raise DegenerateBisectorError("bisector of coincident points")
    return Halfspace(w, (b @ b - a @ a) / 2)


def _check_subset(n, U):
    U = tuple(int(i) for i in U)
    if len(set(U)) != len(U) or not U or any(not 0 <= i < n for i in U):
        raise ValueError(f"invalid index subset {U} for {n} training points")
    return U


def knn_region(train, U):
    """Order-k Voronoi cell of the subset ``U``: ``k(n-k)`` bisector constraints.

    Rows are ordered by (point in U, point outside U). Bisectors between
    coincident training points are vacuous and omitted.
    """
    U = _check_subset(train.n, U)
    inside = np.array(U)
    mask = np.ones(train.n, dtype=bool)
    mask[inside] = False
    outside = np.flatnonzero(mask)
    Xin = train.X[inside]
    Xout = train.X[outside]
    A = (Xout[None, :, :] - Xin[:, None, :]).reshape(-1, train.d)
    sq_in = np.einsum("ij,ij->i", Xin, Xin)
    sq_out = np.einsum("ij,ij->i", Xout, Xout)
    b = ((sq_out[None, :] - sq_in[:, None]) / 2).reshape(-1)
    keep = np.any(np.abs(A) > _ZERO_NORMAL, axis=1)
    if not keep.all():
        A, b = A[keep], b[keep]
    return Polyhedron(A, b, train.d)


def knn_label(train, U, n_classes=None):
    c = n_classes or train.n_classes
    counts = np.bincount(train.y[np.asarray(U)], minlength=c + 1)[1:]
    return int(np.argmax(counts)) + 1


def enumerate_knn_regions(train, k):
    """All ``C(n, k)`` cells in lexicographic order of the index subsets."""
    if not 1 <= k <= train.n:
        raise ValueError(f"k={k} outside 1..{train.n}")
    for U in itertools.combinations(range(train.n), k):
        yield Region(knn_region(train, U), knn_label(train, U), ("knn", U))


# Trees -----------------------------------------------------------------------

def tree_leaf_region(t, leaf):
    """At most D constraints: ``w.z <= b`` for each split taken left, ``-w.z <= -b`` otherwise."""
    cache = t.__dict__.setdefault("_leaf_region_cache", {})
    if leaf not in cache:
        cache[leaf] = _build_leaf_region(t, leaf)
    return cache[leaf]


def _build_leaf_region(t, leaf):
    rows, offs = [], []
    for node, went_left in t.path(leaf):
        w, b = t.split_of(node)
        if went_left:
            rows.append(w)
            offs.append(b)
        else:
            rows.append(-w + 0.0)  # + 0.0 turns -0.0 into 0.0
            offs.append(-b)
    if not rows:
        return Polyhedron(np.zeros((0, t.n_features)), np.zeros(0), t.n_features)
    return Polyhedron(np.stack(rows), offs)


def _leaf_boxes(t):
    """Per leaf: (polyhedron, lower bounds, upper bounds) from its axis-aligned splits."""
    out = {}
    for leaf in t.leaves():
        lo = np.full(t.n_features, -np.inf)
        hi = np.full(t.n_features, np.inf)
        for node, went_left in t.path(leaf):
            f = t.feature[node]
            if f == OBLIQUE:
                continue
            if went_left:
                hi[f] = min(hi[f], t.threshold[node])
            else:
                lo[f] = max(lo[f], t.threshold[node])
        out[leaf] = (tree_leaf_region(t, leaf), lo, hi)
    return out


def _trees_of(f):
    if isinstance(f, Forest):
        return f.trees
    if isinstance(f, DecisionTree):
        return (f,)
    raise TypeError(f"expected a tree or forest, got {type(f).__name__}")


def enumerate_ensemble_regions(f):
    """Cross product of one leaf per tree, depth-first in leaf-id order.

    Partial tuples whose axis intervals are already empty are dropped, so every
    yielded tuple passed the prescreen; LP-infeasible ones may remain.
    """
    trees = _trees_of(f)
    boxes = [_leaf_boxes(t) for t in trees]
    d = trees[0].n_features

    def walk(level, lo, hi, chosen, score):
        if level == len(trees):
            polys = [boxes[i][leaf][0] for i, leaf in enumerate(chosen)]
            A = np.vstack([p.A for p in polys]) if polys else np.zeros((0, d))
            b = np.concatenate([p.b for p in polys]) if polys else np.zeros(0)
            yield Region(Polyhedron(A, b, d), int(np.argmax(score)) + 1, ("leaves", tuple(chosen)))
            return
        t = trees[level]
        for leaf in sorted(boxes[level]):
            _, llo, lhi = boxes[level][leaf]
            nlo = np.maximum(lo, llo)
            nhi = np.minimum(hi, lhi)
            if np.any(nlo > nhi):
                continue
            yield from walk(level + 1, nlo, nhi, chosen + [leaf], score + t.value[leaf])

    yield from walk(0, np.full(d, -np.inf), np.full(d, np.inf), [], np.zeros(trees[0].n_classes))


def leaf_tuple_region(f, leaves):
    trees = _trees_of(f)
    if len(leaves) != len(trees):
        raise ValueError("need one leaf per tree")
    polys = [tree_leaf_region(t, leaf) for t, leaf in zip(trees, leaves)]
    d = trees[0].n_features
    score = sum(t.value[leaf] for t, leaf in zip(trees, leaves))
    A = np.vstack([p.A for p in polys])
    b = np.concatenate([p.b for p in polys])
    return Region(Polyhedron(A, b, d), int(np.argmax(score)) + 1, ("leaves", tuple(int(v) for v in leaves)))


# Dispatch --------------------------------------------------------------------

def enumerate_regions(f):
    if isinstance(f, KnnModel):
        return enumerate_knn_regions(f.train, f.k)
    return enumerate_ensemble_regions(f)


def region_for(f, provenance):
    kind, ids = provenance
    if kind == "knn":
        return Region(knn_region(f.train, ids), knn_label(f.train, ids), ("knn", tuple(ids)))
    return leaf_tuple_region(f, ids)


def region_of(f, x):
    """The cell whose constraints ``f`` used to label ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (f.n_features,):
        raise ValueError(f"input has shape {x.shape}, expected ({f.n_features},)")
    if isinstance(f, KnnModel):
        U = tuple(sorted(int(i) for i in f.neighbors(x)))
        return region_for(f, ("knn", U))
    return leaf_tuple_region(f, [t.apply(x) for t in _trees_of(f)])


def max_constraints(f):
    """The decomposition's ``m``: ``k(n-k)`` for k-NN, ``T*D`` for ensembles."""
    if isinstance(f, KnnModel):
        return f.k * (f.train.n - f.k)
    trees = _trees_of(f)
    return len(trees) * max(t.depth() for t in trees)


__all__ = [
    "Halfspace", "Polyhedron", "Region", "bisector", "knn_region", "knn_label", "enumerate_knn_regions",
    "tree_leaf_region", "enumerate_ensemble_regions", "leaf_tuple_region", "enumerate_regions",
    "region_for", "region_of", "max_constraints", "LEAF",
]
