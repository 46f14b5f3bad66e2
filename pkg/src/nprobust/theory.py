"""Robust-classification theory on small discrete distributions.

A distribution is a finite support with a mass and a class posterior per
point. On such instances astuteness is a finite sum, the astuteness-optimal
robust regions can be found by exhaustive search, and both can be compared
against whole families of 1-NN classifiers.
"""

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .attacks import robustness_radius
from .classifiers import KnnModel
from .convexsolve import min_distance
from .data import Dataset
from .errors import ConstraintViolation, InstanceTooLarge
from .geometry import knn_region
from .norms import parse_norm

MAX_SUPPORT = 12
MAX_CLASSES = 3
RADIUS_TOL = 1e-9  # slack on rho >= r, absorbs solver round-off at exact ties
_OBJ_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteInstance:
    points: np.ndarray
    mass: np.ndarray
    posterior: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        mass = np.array(self.mass, dtype=float).reshape(-1)
        post = np.array(self.posterior, dtype=float)
        if post.ndim != 2 or pts.shape[0] != mass.shape[0] or post.shape[0] != mass.shape[0]:
            raise ValueError("points, mass and posterior disagree on the support size")
        if mass.min(initial=0.0) < 0 or abs(mass.sum() - 1.0) > 1e-12:
            raise ValueError("masses must be non-negative and sum to 1")
        if post.min(initial=0.0) < 0 or np.any(np.abs(post.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("posterior rows must be non-negative and sum to 1")
        if len({tuple(p) for p in pts}) != pts.shape[0]:
            raise ValueError("support points must be distinct")
        for a in (pts, mass, post):
            a.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "posterior", post)

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def n_classes(self):
        return self.posterior.shape[1]

    @property
    def d(self):
        return self.points.shape[1]

    def to_json(self):
        return {"points": self.points.tolist(), "mass": self.mass.tolist(), "posterior": self.posterior.tolist()}

    @classmethod
    def from_json(cls, doc):
        return cls(doc["points"], doc["mass"], doc["posterior"])


def load_instance(path):
    return DiscreteInstance.from_json(json.loads(Path(path).read_text()))


def random_instance(rng, size, n_classes, d=2, deterministic=False):
    """Uniform points in the unit cube with Dirichlet masses and posteriors."""
    rng = np.random.default_rng(rng)
    pts = rng.random((size, d))
    mass = rng.dirichlet(np.ones(size))
    mass = mass / mass.sum()
    if deterministic:
        post = np.eye(n_classes)[rng.integers(0, n_classes, size)]
    else:
        post = rng.dirichlet(np.ones(n_classes) * 0.5, size)
        post = post / post.sum(axis=1, keepdims=True)
    return DiscreteInstance(pts, mass, post)


@dataclass(frozen=True)
class RobustRegions:
    """Per-label support subsets; ``assignment[i]`` is 0 (unassigned) or a label."""

    sets: tuple
    objective: float
    assignment: tuple

    def to_json(self):
        return {"sets": [list(s) for s in self.sets], "objective": self.objective,
                "assignment": list(self.assignment)}


def _distances(X, p):
    return kernels.pairwise_distances(X, X, kernels.norm_code(parse_norm(p)))


# Astuteness ----------------------------------------------------------------------

def astuteness(f, inst, r, p):
    """Mass of support points that ``f`` labels correctly and robustly at radius ``r``."""
    total = 0.0
    for i in range(inst.size):
        x = inst.points[i]
        gain = inst.mass[i] * inst.posterior[i, f.predict(x) - 1]
        if gain == 0:
            continue
        if robustness_radius(f, x, p) >= r - RADIUS_TOL:
            total += gain
    return float(total)


def robust_sets(f, inst, r, p):
    """``S_j(f, r)``: support points predicted ``j`` with robustness radius at least ``r``."""
    sets = [[] for _ in range(inst.n_classes)]
    for i in range(inst.size):
        x = inst.points[i]
        if robustness_radius(f, x, p) >= r - RADIUS_TOL:
            sets[f.predict(x) - 1].append(i)
    return tuple(tuple(s) for s in sets)


def separation_violations(points, sets, r, p, tol=1e-8):
    """Cross-label pairs closer than ``2r`` (minus ``tol``)."""
    D = _distances(points, p)
    out = []
    for a, b in itertools.combinations(range(len(sets)), 2):
        for i in sets[a]:
            for j in sets[b]:
                if D[i, j] < 2 * r - tol:
                    out.append((i, j, float(D[i, j])))
    return out


# r-Optimal robust regions --------------------------------------------------------

def r_optimal_bruteforce(inst, r, p):
    """Exhaustive maximizer of the robust-region objective.

    Each support point goes to one label or to none, subject to cross-label
    distances of at least ``2r``. Branch and bound in lexicographic order of
    the assignment vector (0 = none), so ties resolve to the smallest vector.
    """
    s, C = inst.size, inst.n_classes
    if s > MAX_SUPPORT or C > MAX_CLASSES:
        raise InstanceTooLarge(f"support {s} / classes {C} exceed the {MAX_SUPPORT} / {MAX_CLASSES} caps")
    D = _distances(inst.points, p)
    close = D < 2 * r
    gain = inst.mass[:, None] * inst.posterior
    rest = np.concatenate([np.cumsum(gain.max(axis=1)[::-1])[::-1], [0.0]])

    best = [-math.inf, None]
    assign = [0] * s

    def walk(i, value):
        if i == s:
            if value > best[0] + _OBJ_TOL:
                best[0], best[1] = value, tuple(assign)
            return
        if value + rest[i] <= best[0] + _OBJ_TOL:
            return
        for j in range(C + 1):
            if j and any(assign[t] not in (0, j) and close[i, t] for t in range(i)):
                continue
            assign[i] = j
            walk(i + 1, value + (gain[i, j - 1] if j else 0.0))
        assign[i] = 0

    walk(0, 0.0)
    sets = tuple(tuple(i for i in range(s) if best[1][i] == j) for j in range(1, C + 1))
    return RobustRegions(sets, float(best[0]), best[1])


def r_optimal_classifier(inst, regions):
    """1-NN over the points of the robust regions, labeled by region.

    Under l2 this satisfies ``f(x) = j`` whenever ``x`` is within ``r`` of
    ``S_j``, which is all the r-Optimal classifier is required to do. With
    every region empty it is the constant classifier 1.
    """
    idx, lab = [], []
    for j, members in enumerate(regions.sets, start=1):
        idx.extend(members)
        lab.extend([j] * len(members))
    if not idx:
        idx, lab = [0], [1]
    order = np.argsort(idx, kind="stable")
    idx = np.asarray(idx)[order]
    lab = np.asarray(lab)[order]
    return KnnModel(Dataset(inst.points[idx], lab, inst.n_classes), 1)


# Finite-sample program ---------------------------------------------------------------

def finite_sample_objective(train, assignment, r, p):
    """Number of points kept in their own label's subset; the subsets must be over 2r apart."""
    sets = [tuple(int(i) for i in s) for s in assignment]
    if len(sets) > train.n_classes:
        raise ValueError("more subsets than labels")
    flat = [i for s in sets for i in s]
    if len(set(flat)) != len(flat):
        raise ValueError("subsets overlap")
    if not flat:
        return 0
    D = _distances(train.X, p)
    for a, b in itertools.combinations(range(len(sets)), 2):
        for i in sets[a]:
            for j in sets[b]:
                if D[i, j] <= 2 * r:
                    raise ConstraintViolation((i, j), float(D[i, j]))
    return int(sum(1 for j, s in enumerate(sets, start=1) for i in s if train.y[i] == j))


def finite_sample_bruteforce(train, r, p):
    """Largest subset whose cross-label pairs are all more than ``2r`` apart (``n <= 20``)."""
    n = train.n
    if n > 20:
        raise InstanceTooLarge(f"2^{n} subsets is too many")
    D = _distances(train.X, p)
    masks = np.arange(1 << n, dtype=np.int64)
    ok = np.ones(1 << n, dtype=bool)
    for i, j in zip(*np.nonzero(np.triu((D <= 2 * r) & (train.y[:, None] != train.y[None, :]), k=1))):
        ok &= ~(((masks >> i) & 1).astype(bool) & ((masks >> j) & 1).astype(bool))
    sizes = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        sizes += (masks >> i) & 1
    sizes[~ok] = -1
    best = int(np.argmax(sizes))
    return int(sizes[best]), tuple(i for i in range(n) if best >> i & 1)


# 1-NN comparison family --------------------------------------------------------------

def one_nn_family(inst, r, p, max_size=5):
    """Astuteness and robust sets of every labeled 1-NN over support subsets.

    For each subset ``T`` (size 1..max_size) the distances from every support
    point to every Voronoi cell of ``T`` are solved once and reused across all
    ``C^|T|`` labelings. Yields ``(T, labels, astuteness, robust, predicted)``
    per classifier, where ``robust`` flags support points with radius >= r.
    """
    p = parse_norm(p)
    s, C = inst.size, inst.n_classes
    X = inst.points
    for k in range(1, min(max_size, s) + 1):
        labelings = np.array(list(itertools.product(range(1, C + 1), repeat=k)), dtype=np.int64)
        for T in itertools.combinations(range(s), k):
            sub = Dataset(X[list(T)], np.ones(k, dtype=np.int64), C)
            cells = [knn_region(sub, (t,)) if k > 1 else None for t in range(k)]
            D = np.zeros((s, k))
            for t in range(k):
                for x in range(s):
                    D[x, t] = 0.0 if cells[t] is None else min_distance(cells[t], X[x], p).distance
            nn = np.array([KnnModel(sub, 1).neighbors(X[x])[0] for x in range(s)])
            fx = labelings[:, nn]                                     # (L, s)
            differ = labelings[:, None, :] != fx[:, :, None]           # (L, s, k)
            rho = np.where(differ, D[None, :, :], np.inf).min(axis=2)  # (L, s)
            robust = rho >= r - RADIUS_TOL
            gain = inst.mass[None, :] * inst.posterior[np.arange(s)[None, :], fx - 1]
            ast = (gain * robust).sum(axis=1)
            for li in range(len(labelings)):
                yield T, tuple(int(v) for v in labelings[li]), float(ast[li]), robust[li], fx[li]


def theorem2_check(inst, r, p=2, max_size=5):
    """Compare the r-Optimal classifier against the whole 1-NN family.

    Returns a summary dict. ``dominates`` holds when no family member is more
    astute than the r-Optimal classifier; ``feasibility_violations`` counts
    family members whose robust sets break the ``2r`` separation.
    """
    p = parse_norm(p)
    regions = r_optimal_bruteforce(inst, r, p)
    f_opt = r_optimal_classifier(inst, regions)
    opt_ast = astuteness(f_opt, inst, r, p)
    D = _distances(inst.points, p)
    close = [(i, j) for i, j in itertools.combinations(range(inst.size), 2) if D[i, j] < 2 * r - 1e-8]
    best, best_member, count, violations = -math.inf, None, 0, 0
    for T, labels, ast, robust, fx in one_nn_family(inst, r, p, max_size):
        count += 1
        if ast > best:
            best, best_member = ast, (T, labels)
        if any(robust[i] and robust[j] and fx[i] != fx[j] for i, j in close):
            violations += 1
    return {
        "norm": p,
        "r": r,
        "regions": regions.to_json(),
        "objective": regions.objective,
        "r_optimal_astuteness": opt_ast,
        "family_size": count,
        "family_best_astuteness": best,
        "family_best": {"subset": list(best_member[0]), "labels": list(best_member[1])} if best_member else None,
        "feasibility_violations": violations,
        "dominates": bool(opt_ast >= best - _OBJ_TOL) and opt_ast >= regions.objective - _OBJ_TOL,
    }


__all__ = [
    "DiscreteInstance", "RobustRegions", "load_instance", "random_instance", "astuteness", "robust_sets",
    "separation_violations", "r_optimal_bruteforce", "r_optimal_classifier", "finite_sample_objective",
    "finite_sample_bruteforce", "one_nn_family", "theorem2_check",
]
