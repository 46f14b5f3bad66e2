"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` must agree with them.
"""

import math

import numpy as np

OPTIMAL, UNBOUNDED, ITERATION_LIMIT = 0, 1, 2


def simplex_iterate(T, basis, n_enter, pivot_tol, bland_after, max_iter):
    """Run primal simplex pivots on a tableau in place.

    ``T`` has one row per constraint followed by the reduced-cost row; its
    last column is the right-hand side. Only columns ``< n_enter`` may enter.
    Dantzig's rule is used until ``bland_after`` degenerate pivots have been
    made, then Bland's rule for the rest of the call.

    Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    iterations = 0
    degenerate = 0
    use_bland = False
    while True:
        costs = T[m, :n_enter]
        if use_bland:
            candidates = np.flatnonzero(costs < -pivot_tol)
            if candidates.size == 0:
                return OPTIMAL, iterations
            col = int(candidates[0])
        else:
            col = int(np.argmin(costs)) if n_enter else 0
            if n_enter == 0 or costs[col] >= -pivot_tol:
                return OPTIMAL, iterations

        column = T[:m, col]
        row = -1
        best = 0.0
        for i in range(m):
            a = column[i]
            if a > pivot_tol:
                ratio = max(T[i, rhs], 0.0) / a
                if row < 0 or ratio < best or (ratio == best and basis[i] < basis[row]):
                    row = i
                    best = ratio
        if row < 0:
            return UNBOUNDED, iterations
        if T[row, rhs] <= pivot_tol:
            degenerate += 1
            if degenerate >= bland_after:
                use_bland = True

        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        nz = np.flatnonzero(factors)
        if nz.size:
            T[nz] -= np.outer(factors[nz], T[row])
            T[nz, col] = 0.0
        basis[row] = col

        iterations += 1
        if iterations >= max_iter:
            return ITERATION_LIMIT, iterations


def dykstra_project(A, b, x, tol, max_sweeps):
    """Dykstra's alternating projections onto ``{z : A z <= b}``.

    Stops once a sweep moves ``z`` by less than ``tol`` and every constraint
    holds to within ``tol`` (scaled by its row norm); a small move alone can
    be a stall. Returns ``(z, sweeps, converged)``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, d = A.shape
    norms = np.einsum("ij,ij->i", A, A)
    z = np.array(x, dtype=float, copy=True)
    incr = np.zeros((m, d))
    rows = [A[i] for i in range(m)]
    for sweep in range(1, max_sweeps + 1):
        start = z.copy()
        for i in range(m):
            y = z + incr[i]
            viol = float(rows[i] @ y) - b[i]
            if viol > 0.0:
                z = y - (viol / norms[i]) * rows[i]
            else:
                z = y
            incr[i] = y - z
        if math.sqrt(float(np.dot(z - start, z - start))) < tol:
            if m == 0 or float(np.max((A @ z - b) / np.sqrt(norms))) <= tol:
                return z, sweep, True
    return z, max_sweeps, False


def jacobi_eigh(S, tol, max_sweeps):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors_as_columns, sweeps)`` unsorted.
    """
    S = np.array(S, dtype=float, copy=True)
    d = S.shape[0]
    V = np.eye(d)
    sweeps = 0
    while sweeps < max_sweeps:
        off = math.sqrt(max(float(np.sum(S * S) - np.sum(np.diag(S) ** 2)), 0.0))
        if off < tol:
            break
        sweeps += 1
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = S[p, q]
                if apq == 0.0:
                    continue
                theta = (S[q, q] - S[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                sp = S[:, p].copy()
                sq = S[:, q].copy()
                S[:, p] = c * sp - s * sq
                S[:, q] = s * sp + c * sq
                rp = S[p, :].copy()
                rq = S[q, :].copy()
                S[p, :] = c * rp - s * rq
                S[q, :] = s * rp + c * rq
                S[p, q] = S[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(S).copy(), V, sweeps


def pairwise_distances(X, Y, p):
    """All-pairs l_p distances; ``p`` is 1, 2 or 0 (meaning infinity)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    out = np.empty((X.shape[0], Y.shape[0]))
    chunk = max(1, 2_000_000 // max(1, Y.shape[0] * max(1, X.shape[1])))
    for start in range(0, X.shape[0], chunk):
        diff = np.abs(X[start:start + chunk, None, :] - Y[None, :, :])
        if p == 1:
            out[start:start + chunk] = diff.sum(axis=2)
        elif p == 2:
            out[start:start + chunk] = np.sqrt((diff * diff).sum(axis=2))
        else:
            out[start:start + chunk] = diff.max(axis=2, initial=0.0)
    return out
