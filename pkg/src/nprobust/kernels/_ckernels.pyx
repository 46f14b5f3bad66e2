# cython: language_level=3
"""Compiled versions of the kernels in ``_pykernels``.

Signatures and return values match the numpy reference exactly; the inner
loops release the GIL so per-point attacks can run on a thread pool.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, copysign

cnp.import_array()

DEF OPTIMAL = 0
DEF UNBOUNDED = 1
DEF ITERATION_LIMIT = 2


cdef inline void _pivot(double[:, ::1] T, long[::1] basis, Py_ssize_t row,
                        Py_ssize_t col) noexcept nogil:
    cdef Py_ssize_t r, j
    cdef Py_ssize_t nrow = T.shape[0]
    cdef Py_ssize_t ncol = T.shape[1]
    cdef double piv = T[row, col]
    cdef double f
    for j in range(ncol):
        T[row, j] /= piv
    for r in range(nrow):
        if r == row:
            continue
        f = T[r, col]
        if f == 0.0:
            continue
        for j in range(ncol):
            T[r, j] -= f * T[row, j]
        T[r, col] = 0.0
    basis[row] = col


def simplex_iterate(double[:, ::1] T, long[::1] basis, Py_ssize_t n_enter,
                    double pivot_tol, Py_ssize_t bland_after, Py_ssize_t max_iter):
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t rhs = T.shape[1] - 1
    cdef Py_ssize_t iterations = 0, degenerate = 0
    cdef bint use_bland = False
    cdef Py_ssize_t i, j, col, row
    cdef double best, ratio, a, cmin
    cdef int status = OPTIMAL
    with nogil:
        while True:
            col = -1
            if use_bland:
                for j in range(n_enter):
                    if T[m, j] < -pivot_tol:
                        col = j
                        break
            else:
                cmin = -pivot_tol
                for j in range(n_enter):
                    if T[m, j] < cmin:
                        cmin = T[m, j]
                        col = j
            if col < 0:
                status = OPTIMAL
                break

            row = -1
            best = 0.0
            for i in range(m):
                a = T[i, col]
                if a > pivot_tol:
                    ratio = T[i, rhs]
                    if ratio < 0.0:
                        ratio = 0.0
                    ratio = ratio / a
                    if row < 0 or ratio < best or (ratio == best and basis[i] < basis[row]):
                        row = i
                        best = ratio
            if row < 0:
                status = UNBOUNDED
                break
            if T[row, rhs] <= pivot_tol:
                degenerate += 1
                if degenerate >= bland_after:
                    use_bland = True

            _pivot(T, basis, row, col)
            iterations += 1
            if iterations >= max_iter:
                status = ITERATION_LIMIT
                break
    return status, iterations


def dykstra_project(A_in, b_in, x_in, double tol, Py_ssize_t max_sweeps):
    cdef const double[:, ::1] A = np.ascontiguousarray(A_in, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t d = A.shape[1]
    z_arr = np.array(x_in, dtype=np.float64, copy=True)
    cdef double[::1] z = z_arr
    cdef double[:, ::1] incr = np.zeros((m, d))
    cdef double[::1] norms = np.empty(m)
    cdef double[::1] start = np.empty(d)
    cdef double[::1] y = np.empty(d)
    cdef Py_ssize_t i, j, sweep
    cdef double viol, move, diff, scale, worst
    cdef bint converged = False
    cdef Py_ssize_t sweeps_done = max_sweeps
    with nogil:
        for i in range(m):
            norms[i] = 0.0
            for j in range(d):
                norms[i] += A[i, j] * A[i, j]
        for sweep in range(1, max_sweeps + 1):
            for j in range(d):
                start[j] = z[j]
            for i in range(m):
                viol = -b[i]
                for j in range(d):
                    y[j] = z[j] + incr[i, j]
                    viol += A[i, j] * y[j]
                if viol > 0.0:
                    scale = viol / norms[i]
                    for j in range(d):
                        z[j] = y[j] - scale * A[i, j]
                else:
                    for j in range(d):
                        z[j] = y[j]
                for j in range(d):
                    incr[i, j] = y[j] - z[j]
            move = 0.0
            for j in range(d):
                diff = z[j] - start[j]
                move += diff * diff
            if sqrt(move) < tol:
                worst = 0.0
                for i in range(m):
                    viol = -b[i]
                    for j in range(d):
                        viol += A[i, j] * z[j]
                    viol /= sqrt(norms[i])
                    if viol > worst:
                        worst = viol
                if worst <= tol:
                    converged = True
                    sweeps_done = sweep
                    break
    return z_arr, sweeps_done, bool(converged)


def jacobi_eigh(S_in, double tol, Py_ssize_t max_sweeps):
    S_arr = np.array(S_in, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] S = S_arr
    cdef Py_ssize_t d = S.shape[0]
    V_arr = np.eye(d)
    cdef double[:, ::1] V = V_arr
    cdef Py_ssize_t p, q, k, sweeps = 0
    cdef double off, apq, theta, t, c, s, xp, xq
    with nogil:
        while sweeps < max_sweeps:
            off = 0.0
            for p in range(d):
                for q in range(d):
                    if p != q:
                        off += S[p, q] * S[p, q]
            if sqrt(off) < tol:
                break
            sweeps += 1
            for p in range(d - 1):
                for q in range(p + 1, d):
                    apq = S[p, q]
                    if apq == 0.0:
                        continue
                    theta = (S[q, q] - S[p, p]) / (2.0 * apq)
                    t = copysign(1.0, theta) / (fabs(theta) + sqrt(theta * theta + 1.0))
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(d):
                        xp = S[k, p]
                        xq = S[k, q]
                        S[k, p] = c * xp - s * xq
                        S[k, q] = s * xp + c * xq
                    for k in range(d):
                        xp = S[p, k]
                        xq = S[q, k]
                        S[p, k] = c * xp - s * xq
                        S[q, k] = s * xp + c * xq
                    S[p, q] = 0.0
                    S[q, p] = 0.0
                    for k in range(d):
                        xp = V[k, p]
                        xq = V[k, q]
                        V[k, p] = c * xp - s * xq
                        V[k, q] = s * xp + c * xq
    return np.diag(S_arr).copy(), V_arr, sweeps


def pairwise_distances(X_in, Y_in, int p):
    cdef const double[:, ::1] X = np.ascontiguousarray(X_in, dtype=np.float64)
    cdef const double[:, ::1] Y = np.ascontiguousarray(Y_in, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], m = Y.shape[0], d = X.shape[1]
    out_arr = np.empty((n, m))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    with nogil:
        for i in range(n):
            for j in range(m):
                acc = 0.0
                for k in range(d):
                    diff = fabs(X[i, k] - Y[j, k])
                    if p == 1:
                        acc += diff
                    elif p == 2:
                        acc += diff * diff
                    elif diff > acc:
                        acc = diff
                if p == 2:
                    acc = sqrt(acc)
                out[i, j] = acc
    return out_arr
