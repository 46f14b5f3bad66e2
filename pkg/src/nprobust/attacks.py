"""Region-based attacks (exact and approximate) and the direct baseline.

Both region-based attacks solve ``min ||z - x||_p`` over convex cells of the
classifier's decomposition whose label differs from ``f(x)``. The exact
attack visits every such cell; the approximate one only the cells containing
the ``s'`` training points nearest to ``x`` with a different training label.

Cells are closed, so an optimum can sit on a boundary where the classifier's
own tie-breaking picks ``f(x)``. Such a point is nudged by ``eps_nudge``
towards the cell's Chebyshev center and re-checked. Under l-infinity the
minimizer is rarely unique; the candidate is first replaced by the optimal
point nearest to ``x`` in l2 so results do not depend on simplex pivoting.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .classifiers import KnnModel
from .convexsolve import canonical_linf_point, chebyshev_center, min_distance
from .errors import NoAdversarialExampleError, NoCandidateError
from .geometry import enumerate_regions, region_of
from .norms import lp_distances, lp_norm, norm_name, parse_norm
from .tolerances import DISTANCE_TOL, EPS_NUDGE, FEAS_TOL


@dataclass(frozen=True, eq=False)
class AdversarialExample:
    """Result of one attack on one input.

    ``perturbed`` is ``None`` (and ``distance`` infinite) when an attack ran
    but found nothing; only the direct baseline produces such results.
    ``solver_distance`` is the distance before any nudge.
    """

    original: np.ndarray
    perturbed: np.ndarray | None
    norm: float
    distance: float
    original_label: int
    adversarial_label: int | None
    provenance: tuple | None = None
    exact: bool = False
    solver_distance: float = math.nan
    nudged: bool = False
    info: dict = field(default_factory=dict)

    @property
    def success(self):
        return self.perturbed is not None

    def to_json(self):
        prov = None
        if self.provenance is not None:
            kind, ids = self.provenance
            prov = {"kind": kind, "ids": [int(i) for i in ids]}
        return {
            "original": [float(v) for v in self.original],
            "perturbed": None if self.perturbed is None else [float(v) for v in self.perturbed],
            "norm": norm_name(self.norm),
            "distance": _json_float(self.distance),
            "solver_distance": _json_float(self.solver_distance),
            "original_label": int(self.original_label),
            "adversarial_label": None if self.adversarial_label is None else int(self.adversarial_label),
            "provenance": prov,
            "exact": bool(self.exact),
            "nudged": bool(self.nudged),
            "success": self.success,
        }


def _json_float(v):
    # JSON has no infinity; failures are spelled out as null
    return float(v) if math.isfinite(v) else None


def _failure(x, p, label, **info):
    return AdversarialExample(x, None, p, math.inf, label, None, None, False, math.inf, False, info)


def _dual(p):
    return {1: math.inf, 2: 2, math.inf: 1}[p]


def _halfspace_bound(P, x, p):
    """Lower bound on the l_p distance from ``x`` to ``P``: the worst single halfspace."""
    if P.m == 0:
        return 0.0
    viol = P.A @ x - P.b
    q = _dual(p)
    if q == 1:
        scale = np.abs(P.A).sum(axis=1)
    elif q == 2:
        scale = np.linalg.norm(P.A, axis=1)
    else:
        scale = np.abs(P.A).max(axis=1)
    return float(max(0.0, np.max(viol / scale)))


def _canonical(P, x, z, p, distance):
    if p != math.inf or distance == 0:
        return z
    c = canonical_linf_point(P, x, distance)
    if c is None or lp_norm(x - c, p) > distance + DISTANCE_TOL or np.max(P.residuals(c), initial=0) > FEAS_TOL:
        return z
    return c


def _accept(f, x, fx, region, z, p, eps_nudge, want):
    """Verify a region optimum, nudging it off the boundary if needed.

    Returns ``(point, label, nudged)`` or ``None`` when the candidate is discarded.
    """
    label = f.predict(z)
    if want(label):
        return z, label, False
    center, radius = chebyshev_center(region.polyhedron, near=z)
    if radius <= 0:
        return None
    step = center - z
    size = lp_norm(step, p)
    if size == 0:
        return None
    z2 = z + min(1.0, eps_nudge / size) * step
    label = f.predict(z2)
    if want(label):
        return z2, label, True
    return None


def _search(f, x, p, regions, fx, want, eps_nudge, exact, chunk=4096):
    """Solve region programs and keep the nearest verified candidate.

    Regions are streamed in chunks; within a chunk they are visited in order
    of a cheap halfspace lower bound, and a region is skipped when its bound
    exceeds the best verified solver distance. Ties in solver distance go to
    the region that comes first in the stream.
    """
    best = None
    best_key = (math.inf, math.inf)
    seen = solved = 0
    it = iter(regions)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        bounds = [_halfspace_bound(r.polyhedron, x, p) for r in block]
        for j in sorted(range(len(block)), key=lambda j: (bounds[j], j)):
            if bounds[j] > best_key[0] + DISTANCE_TOL:
                break
            region = block[j]
            res = min_distance(region.polyhedron, x, p)
            solved += 1
            if not res.optimal:
                continue
            key = (res.distance, seen + j)
            if key >= best_key:
                continue
            z = _canonical(region.polyhedron, x, res.point, p, res.distance)
            got = _accept(f, x, fx, region, z, p, eps_nudge, want)
            if got is None:
                continue
            z, label, nudged = got
            best_key = key
            best = AdversarialExample(x, z, p, lp_norm(x - z, p), fx, label, region.provenance, exact,
                                      res.distance, nudged)
        seen += len(block)
    if best is not None:
        best.info.update(regions=seen, solved=solved)
    return best


def _prepare(f, x, p):
    x = np.array(x, dtype=float)
    if x.shape != (f.n_features,):
        raise ValueError(f"input has shape {x.shape}, expected ({f.n_features},)")
    return x, parse_norm(p), f.predict(x)


def rba_exact(f, x, p, target=None, eps_nudge=EPS_NUDGE):
    """Optimal adversarial example by searching every differently-labeled cell.

    With ``target`` only cells labeled ``target`` are searched. Raises
    :class:`NoAdversarialExampleError` when no such cell yields a point.
    """
    x, p, fx = _prepare(f, x, p)
    if target is not None:
        target = int(target)
        if target == fx:
            raise ValueError(f"target {target} equals the current prediction")
        keep = lambda label: label == target
    else:
        keep = lambda label: label != fx
    regions = (r for r in enumerate_regions(f) if keep(r.label))
    best = _search(f, x, p, regions, fx, keep, eps_nudge, exact=True)
    if best is None:
        raise NoAdversarialExampleError(f"no region with a label other than {fx} is reachable")
    return best


def _training_set(f):
    train = getattr(f, "train", None)
    if train is None:
        raise ValueError("the approximate attack needs the training set attached to the model")
    return train


def rba_approx(f, x, p, s_prime, eps_nudge=EPS_NUDGE):
    """Search only the cells of the ``s_prime`` nearest oppositely-labeled training points.

    Cells are deduplicated by provenance; a cell whose predicted label equals
    ``f(x)`` is discarded (possible for k > 1 and for ensembles).
    """
    if s_prime < 1:
        raise ValueError("s_prime must be >= 1")
    x, p, fx = _prepare(f, x, p)
    train = _training_set(f)
    opposite = np.flatnonzero(train.y != fx)
    if opposite.size == 0:
        raise NoCandidateError("no training point carries a label other than f(x)")
    dist = lp_distances(train.X[opposite], x, p)
    chosen = opposite[np.argsort(dist, kind="stable")[:s_prime]]
    seen = {}
    for i in chosen:
        region = region_of(f, train.X[i])
        if region.provenance not in seen and region.label != fx:
            seen[region.provenance] = region
    keep = lambda label: label != fx
    best = _search(f, x, p, seen.values(), fx, keep, eps_nudge, exact=False)
    if best is None:
        raise NoCandidateError(f"all {len(chosen)} candidate regions predict {fx}; raise s_prime")
    best.info["candidates"] = int(len(chosen))
    return best


def direct_attack(m, x, p, steps=100):
    """Walk from ``x`` towards the mean of its k nearest oppositely-labeled points.

    The first grid step ``t`` in ``1/steps, 2/steps, ..., 1`` that changes the
    prediction wins; if none does the result has ``success == False``.
    """
    if not isinstance(m, KnnModel):
        raise TypeError("the direct attack is defined for k-NN models")
    x, p, fx = _prepare(m, x, p)
    opposite = np.flatnonzero(m.train.y != fx)
    if opposite.size < m.k:
        raise ValueError(f"need {m.k} oppositely-labeled training points, found {opposite.size}")
    dist = lp_distances(m.train.X[opposite], x, p)
    nearest = opposite[np.argsort(dist, kind="stable")[: m.k]]
    center = m.train.X[nearest].mean(axis=0)
    ts = np.arange(1, steps + 1) / steps
    path = x + ts[:, None] * (center - x)
    labels = m.predict_batch(path)
    hits = np.flatnonzero(labels != fx)
    if hits.size == 0:
        return _failure(x, p, fx, center=center)
    z = path[hits[0]]
    d = lp_norm(x - z, p)
    return AdversarialExample(x, z, p, d, fx, int(labels[hits[0]]), ("knn", tuple(int(i) for i in nearest)),
                              False, d, False, {"t": float(ts[hits[0]])})


def verify_adversarial(f, ae):
    if ae.perturbed is None or ae.adversarial_label is None:
        return False
    fx = f.predict(ae.original)
    fz = f.predict(ae.perturbed)
    if fz != ae.adversarial_label or fz == fx:
        return False
    return abs(lp_norm(ae.original - ae.perturbed, ae.norm) - ae.distance) <= DISTANCE_TOL


def robustness_radius(f, x, p):
    """Distance to the nearest differently-labeled cell (before any nudge); +inf if none."""
    try:
        return rba_exact(f, x, p, eps_nudge=EPS_NUDGE).solver_distance
    except NoAdversarialExampleError:
        return math.inf


ATTACKS = ("rba-exact", "rba-approx", "direct")


def make_attack(method, p, s_prime=50, eps_nudge=EPS_NUDGE, target=None):
    """A callable ``(f, x) -> AdversarialExample`` for the named method."""
    p = parse_norm(p)
    if method == "rba-exact":
        return lambda f, x: rba_exact(f, x, p, target, eps_nudge)
    if method == "rba-approx":
        return lambda f, x: rba_approx(f, x, p, s_prime, eps_nudge)
    if method == "direct":
        return lambda f, x: direct_attack(f, x, p)
    raise ValueError(f"unknown attack {method!r}; choose from {', '.join(ATTACKS)}")


__all__ = [
    "AdversarialExample", "rba_exact", "rba_approx", "direct_attack", "verify_adversarial",
    "robustness_radius", "make_attack", "ATTACKS",
]
