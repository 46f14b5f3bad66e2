"""Nearest point of a polyhedron to a query point under l1, l2 and l-infinity.

The l-infinity and l1 problems are the linear programs

    min t          s.t.  z in P,  -t <= (z - x)_j <= t
    min sum_j t_j  s.t.  z in P,  -t_j <= (z - x)_j <= t_j

written in the shifted variable ``u = z - x``. Both have a handful of free
variables and many inequality rows, so they are handed to the two-phase
primal simplex in dual standard form (one tableau row per primal variable)
and the primal optimum is read off the simplex multipliers. The l2 problem
is a Euclidean projection computed by Dykstra's alternating projections and
then snapped onto its active face.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConvergenceError, SolverError
from .geometry import Polyhedron
from .norms import lp_norm, parse_norm
from .tolerances import (BLAND_AFTER, DYKSTRA_MAX_SWEEPS, DYKSTRA_TOL, FEAS_TOL, PIVOT_TOL,
                         SIMPLEX_MAX_ITER)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"


@dataclass(frozen=True, eq=False)
class NearestPointResult:
    point: np.ndarray | None
    distance: float
    status: str
    info: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status == OPTIMAL


def _infeasible(**info):
    return NearestPointResult(None, math.inf, INFEASIBLE, info)


# Simplex ---------------------------------------------------------------------

@dataclass
class StandardFormResult:
    status: str
    y: np.ndarray | None
    multipliers: np.ndarray | None
    phase1_objective: float
    tableau: np.ndarray
    basis: np.ndarray


def _run(T, basis, n_enter):
    status, _ = kernels.simplex_iterate(T, basis, n_enter, PIVOT_TOL, BLAND_AFTER, SIMPLEX_MAX_ITER)
    if status == kernels.ITERATION_LIMIT:
        raise SolverError(f"simplex hit {SIMPLEX_MAX_ITER} pivots", T.copy(), basis.copy())
    return status


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
            T[r, col] = 0.0
    basis[row] = col


def solve_standard_form(c, A, b, phase1_only=False):
    """Two-phase primal simplex for ``min c.y  s.t.  A y = b, y >= 0``.

    Returns a :class:`StandardFormResult` whose status is ``optimal``,
    ``infeasible`` or ``unbounded``. ``multipliers`` are the simplex
    multipliers of the equality rows at the optimum.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A * sign[:, None]
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b * sign
    T[m, :n] = -T[:m, :n].sum(axis=0)
    T[m, -1] = -T[:m, -1].sum()
    basis = np.arange(n, n + m, dtype=np.int64)

    _run(T, basis, n)
    phase1 = -T[m, -1]
    if phase1 > FEAS_TOL:
        return StandardFormResult(INFEASIBLE, None, None, phase1, T, basis)
    if phase1_only:
        y = np.zeros(n + m)
        y[basis] = T[:m, -1]
        return StandardFormResult(OPTIMAL, y[:n], None, phase1, T, basis)

    for r in range(m):
        if basis[r] >= n:
            cols = np.flatnonzero(np.abs(T[r, :n]) > PIVOT_TOL)
            if cols.size:
                _pivot(T, basis, r, int(cols[0]))
            # otherwise the row is redundant and its artificial stays at zero

    c = np.asarray(c, dtype=float)
    T[m, :] = 0.0
    T[m, :n] = c
    for r in range(m):
        if basis[r] < n and c[basis[r]] != 0.0:
            T[m] -= c[basis[r]] * T[r]
    if _run(T, basis, n) == kernels.UNBOUNDED:
        return StandardFormResult("unbounded", None, None, phase1, T, basis)

    y = np.zeros(n + m)
    y[basis] = np.maximum(T[:m, -1], 0.0)
    multipliers = -T[m, n:n + m] * sign
    return StandardFormResult(OPTIMAL, y[:n], multipliers, phase1, T, basis)


def solve_inequality_lp(c, A, b):
    """``min c.v  s.t.  A v <= b`` with ``v`` free, via its dual standard form.

    Returns ``(status, v)``. The dual is ``min b.y  s.t.  A^T y = -c, y >= 0``;
    its multipliers are an optimal ``v``. An unbounded dual certifies that
    ``A v <= b`` is empty.
    """
    A = np.asarray(A, dtype=float)
    res = solve_standard_form(np.asarray(b, dtype=float), A.T, -np.asarray(c, dtype=float))
    if res.status == OPTIMAL:
        return OPTIMAL, res.multipliers
    if res.status == "unbounded":
        return INFEASIBLE, None
    raise SolverError("dual program infeasible: primal objective unbounded below", res.tableau, res.basis)


def phase1_objective(P):
    """Minimum total violation of ``P``'s constraints (0 iff nonempty)."""
    P = P.reduced()
    if P.m == 0:
        return 0.0
    A = np.hstack([P.A, -P.A, np.eye(P.m)])
    return float(solve_standard_form(np.zeros(A.shape[1]), A, P.b, phase1_only=True).phase1_objective)


def feasible(P):
    return phase1_objective(P) <= FEAS_TOL


# Nearest points --------------------------------------------------------------

def _finish(P, x, z, p, **info):
    viol = float(np.max(P.residuals(z), initial=0.0))
    if viol > FEAS_TOL:
        raise SolverError(f"solution violates a constraint by {viol:.3g}")
    return NearestPointResult(z, lp_norm(x - z, p), OPTIMAL, {"max_violation": viol, **info})


def _confirm_infeasible(P):
    ph1 = phase1_objective(P)
    if ph1 <= FEAS_TOL:
        raise SolverError("dual unbounded but phase-1 finds a feasible point")
    return _infeasible(phase1_objective=ph1)


def min_linf(P, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (P.d,):
        raise ValueError(f"point has shape {x.shape}, polyhedron dimension is {P.d}")
    Pr = P.reduced()
    if Pr.m == 0 or np.all(Pr.residuals(x) <= 0.0):
        return _finish(P, x, x.copy(), math.inf)
    d = P.d
    eye = np.eye(d)
    ones = np.ones((d, 1))
    A = np.vstack([
        np.hstack([Pr.A, np.zeros((Pr.m, 1))]),
        np.hstack([eye, -ones]),
        np.hstack([-eye, -ones]),
    ])
    b = np.concatenate([Pr.b - Pr.A @ x, np.zeros(2 * d)])
    c = np.zeros(d + 1)
    c[-1] = 1.0
    status, v = solve_inequality_lp(c, A, b)
    if status == INFEASIBLE:
        return _confirm_infeasible(P)
    return _finish(P, x, x + v[:d], math.inf)


def min_l1(P, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (P.d,):
        raise ValueError(f"point has shape {x.shape}, polyhedron dimension is {P.d}")
    Pr = P.reduced()
    if Pr.m == 0 or np.all(Pr.residuals(x) <= 0.0):
        return _finish(P, x, x.copy(), 1)
    d = P.d
    eye = np.eye(d)
    A = np.vstack([
        np.hstack([Pr.A, np.zeros((Pr.m, d))]),
        np.hstack([eye, -eye]),
        np.hstack([-eye, -eye]),
    ])
    b = np.concatenate([Pr.b - Pr.A @ x, np.zeros(2 * d)])
    c = np.concatenate([np.zeros(d), np.ones(d)])
    status, v = solve_inequality_lp(c, A, b)
    if status == INFEASIBLE:
        return _confirm_infeasible(P)
    return _finish(P, x, x + v[:d], 1)


def _polish_projection(Pr, x, z):
    """Exact projection onto the face Dykstra converged to, when KKT certifies it."""
    active = list(np.flatnonzero(Pr.residuals(z) > -1e-7))
    while active:
        A_S = Pr.A[active]
        delta = np.linalg.lstsq(A_S, A_S @ x - Pr.b[active], rcond=None)[0]
        cand = x - delta
        lam = np.linalg.lstsq(A_S.T, delta, rcond=None)[0]
        if lam.min() >= -1e-12:
            if np.max(Pr.residuals(cand)) <= 1e-12 and np.linalg.norm(cand - z) <= 1e-4:
                return cand
            return None
        del active[int(np.argmin(lam))]
    return None


def nnls(E, f, max_iter=None):
    """Lawson-Hanson active-set solution of ``min ||E w - f||  s.t.  w >= 0``."""
    E = np.asarray(E, dtype=float)
    f = np.asarray(f, dtype=float)
    n = E.shape[1]
    max_iter = max_iter or 3 * n + 30
    w = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    tol = 1e-12 * max(1.0, float(np.abs(E).max(initial=0.0)))
    for _ in range(max_iter):
        grad = E.T @ (f - E @ w)
        cand = np.where(~passive & (grad > tol))[0]
        if cand.size == 0:
            return w
        passive[cand[np.argmax(grad[cand])]] = True
        while True:
            idx = np.flatnonzero(passive)
            s = np.zeros(n)
            s[idx] = np.linalg.lstsq(E[:, idx], f, rcond=None)[0]
            if s[idx].min() > 0:
                w = s
                break
            neg = idx[s[idx] <= 0]
            alpha = np.min(w[neg] / (w[neg] - s[neg]))
            w = w + alpha * (s - w)
            passive &= w > tol
            w[~passive] = 0.0
    raise ConvergenceError(f"NNLS did not converge in {max_iter} iterations")


def least_distance_projection(Pr, x):
    """Exact projection through the least-distance program and NNLS.

    With ``u = z - x`` the constraints read ``-A u >= A x - b``; the minimum
    norm ``u`` is recovered from the NNLS residual. Returns ``None`` when the
    residual vanishes, i.e. ``P`` is empty.
    """
    h = Pr.A @ x - Pr.b
    E = np.vstack([-Pr.A.T, h[None, :]])
    f = np.zeros(Pr.d + 1)
    f[-1] = 1.0
    r = E @ nnls(E, f) - f
    if abs(r[-1]) < 1e-12:
        return None
    return x - r[:-1] / r[-1]


def min_l2(P, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (P.d,):
        raise ValueError(f"point has shape {x.shape}, polyhedron dimension is {P.d}")
    Pr = P.reduced()
    if Pr.m == 0 or np.all(Pr.residuals(x) <= 0.0):
        return _finish(P, x, x.copy(), 2)
    ph1 = phase1_objective(Pr)
    if ph1 > FEAS_TOL:
        return _infeasible(phase1_objective=ph1)
    z, sweeps, converged = kernels.dykstra_project(Pr.A, Pr.b, x, DYKSTRA_TOL, DYKSTRA_MAX_SWEEPS)
    polished = _polish_projection(Pr, x, z) if converged else None
    if polished is not None:
        return _finish(P, x, polished, 2, sweeps=sweeps, method="dykstra")
    # Dykstra stalls on thin (lower-dimensional) polyhedra; fall back to the exact route.
    exact = least_distance_projection(Pr, x)
    if exact is None:
        if not converged:
            raise ConvergenceError(f"Dykstra did not converge in {DYKSTRA_MAX_SWEEPS} sweeps")
        return _finish(P, x, z, 2, sweeps=sweeps, method="dykstra-unpolished")
    return _finish(P, x, exact, 2, sweeps=sweeps, method="least-distance")


def min_distance(P, x, p):
    p = parse_norm(p)
    if p == 1:
        return min_l1(P, x)
    if p == 2:
        return min_l2(P, x)
    return min_linf(P, x)


def chebyshev_center(P, cap=1.0, near=None):
    """Center and radius of the largest Euclidean ball in ``P`` (radius capped).

    The radius is negative when ``P`` has empty interior. Centers are rarely
    unique (any unbounded region has many); with ``near`` the one closest to
    ``near`` in l1 is returned, which keeps nudge directions reproducible.
    """
    Pr = P.reduced()
    d = P.d
    if Pr.m == 0:
        return (np.zeros(d) if near is None else np.asarray(near, dtype=float).copy()), cap
    A = np.vstack([np.hstack([Pr.A, np.ones((Pr.m, 1))]), np.append(np.zeros(d), 1.0)[None, :]])
    b = np.append(Pr.b, cap)
    c = np.zeros(d + 1)
    c[-1] = -1.0
    status, v = solve_inequality_lp(c, A, b)
    if status != OPTIMAL:
        raise SolverError("Chebyshev-center program infeasible")
    center, radius = v[:d], float(v[d])
    if near is None or radius <= 0:
        return center, radius
    # second stage: min ||c - near||_1 over centers of a (slightly shrunk) maximal ball
    near = np.asarray(near, dtype=float)
    r = radius * (1 - 1e-9)
    eye = np.eye(d)
    A2 = np.vstack([np.hstack([Pr.A, np.zeros((Pr.m, d))]), np.hstack([eye, -eye]), np.hstack([-eye, -eye])])
    b2 = np.concatenate([Pr.b - r, near, -near])
    status, v2 = solve_inequality_lp(np.concatenate([np.zeros(d), np.ones(d)]), A2, b2)
    if status != OPTIMAL:
        return center, radius
    return v2[:d], radius


def canonical_linf_point(P, x, distance):
    """The l2-nearest point to ``x`` among the l-infinity minimizers over ``P``.

    Simplex stops at an arbitrary optimal vertex; projecting onto
    ``P`` intersected with the optimal box picks a unique one. Returns
    ``None`` if that projection fails.
    """
    x = np.asarray(x, dtype=float)
    d = P.d
    box = Polyhedron(np.vstack([P.A, np.eye(d), -np.eye(d)]),
                     np.concatenate([P.b, x + distance, distance - x]), d)
    try:
        res = min_l2(box, x)
    except SolverError:
        return None
    return res.point if res.optimal else None


# Brute-force oracle ------------------------------------------------------------

def _vertex_min(A, b, objective, q):
    """Minimum of ``objective . v`` over basic feasible points of ``A v <= b``."""
    best = math.inf
    best_v = None
    combos = np.array(list(itertools.combinations(range(A.shape[0]), q)), dtype=np.int64)
    for s in range(0, len(combos), 20000):
        block = combos[s:s + 20000]
        mats = A[block]
        rhs = b[block]
        dets = np.linalg.det(mats)
        ok = np.abs(dets) > 1e-10
        if not ok.any():
            continue
        sols = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
        feas = np.all(sols @ A.T - b <= 1e-9, axis=1)
        if not feas.any():
            continue
        vals = sols[feas] @ objective
        i = int(np.argmin(vals))
        if vals[i] < best:
            best = float(vals[i])
            best_v = sols[feas][i]
    return best, best_v


def oracle_nearest_point(P, x, p):
    """Exhaustive nearest point for tiny instances (``d <= 3``, ``m <= 12``).

    l1 and l-infinity enumerate every vertex of the lifted programs (which are
    pointed, so an optimal vertex exists); l2 projects onto the affine hull of
    every subset of at most ``d`` constraints and keeps the feasible ones.
    Independent of the simplex and Dykstra code paths.
    """
    x = np.asarray(x, dtype=float)
    p = parse_norm(p)
    d, m = P.d, P.m
    if d > 3 or m > 12:
        raise ValueError(f"oracle limited to d <= 3 and m <= 12, got d={d}, m={m}")
    if x.shape != (d,):
        raise ValueError("dimension mismatch")
    W, b = P.A, P.b
    eye = np.eye(d)
    if p == 2:
        best, best_z = math.inf, None
        for q in range(0, d + 1):
            for S in itertools.combinations(range(m), q):
                if q == 0:
                    z = x.copy()
                else:
                    A_S = W[list(S)]
                    if np.linalg.matrix_rank(A_S) < q:
                        continue
                    z = x - A_S.T @ np.linalg.solve(A_S @ A_S.T, A_S @ x - b[list(S)])
                if m == 0 or np.all(W @ z - b <= 1e-9):
                    dist = float(np.linalg.norm(x - z))
                    if dist < best:
                        best, best_z = dist, z
        if best_z is None:
            return _infeasible()
        return NearestPointResult(best_z, best, OPTIMAL)

    if p == math.inf:
        ones = np.ones((d, 1))
        A = np.vstack([np.hstack([W, np.zeros((m, 1))]), np.hstack([eye, -ones]), np.hstack([-eye, -ones])])
        rhs = np.concatenate([b, x, -x])
        objective = np.append(np.zeros(d), 1.0)
        val, v = _vertex_min(A, rhs, objective, d + 1)
    else:
        A = np.vstack([np.hstack([W, np.zeros((m, d))]), np.hstack([eye, -eye]), np.hstack([-eye, -eye])])
        rhs = np.concatenate([b, x, -x])
        objective = np.append(np.zeros(d), np.ones(d))
        val, v = _vertex_min(A, rhs, objective, 2 * d)
    if v is None:
        return _infeasible()
    z = v[:d]
    return NearestPointResult(z, lp_norm(x - z, p), OPTIMAL, {"objective": val})


__all__ = [
    "NearestPointResult", "Polyhedron", "min_linf", "min_l1", "min_l2", "min_distance", "feasible",
    "phase1_objective", "chebyshev_center", "canonical_linf_point", "nnls", "least_distance_projection",
    "oracle_nearest_point", "solve_standard_form", "solve_inequality_lp", "OPTIMAL", "INFEASIBLE",
]
