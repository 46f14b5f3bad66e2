"""Time the compiled kernels against the numpy reference.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel is run on the same inputs under every importable backend; the
table reports the best-of-N wall time and the speedup over the reference.
"""

import argparse
import time

import numpy as np

from nprobust import kernels
from nprobust.tolerances import BLAND_AFTER, DYKSTRA_TOL, JACOBI_MAX_SWEEPS, JACOBI_TOL, PIVOT_TOL


def _simplex_case(rng, m=60, n=120):
    # phase-1 tableau of a random feasible standard-form system
    A = rng.standard_normal((m, n))
    y0 = rng.random(n)
    b = A @ y0
    sign = np.where(b < 0, -1.0, 1.0)
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A * sign[:, None]
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b * sign
    T[m, :n] = -T[:m, :n].sum(axis=0)
    T[m, -1] = -T[:m, -1].sum()
    basis = np.arange(n, n + m, dtype=np.int64)

    def run(mod):
        mod.simplex_iterate(T.copy(), basis.copy(), n, PIVOT_TOL, BLAND_AFTER, 50_000)
    return run


def _dykstra_case(rng, m=300, d=10):
    A = rng.standard_normal((m, d))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    b = rng.random(m) + 0.1
    x = rng.standard_normal(d) * 5

    def run(mod):
        mod.dykstra_project(A, b, x, DYKSTRA_TOL, 2_000)
    return run


def _jacobi_case(rng, d=40):
    M = rng.standard_normal((d, d))
    S = M @ M.T

    def run(mod):
        mod.jacobi_eigh(S, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    return run


def _pairwise_case(rng, n=800, d=25):
    X = rng.random((n, d))

    def run(mod):
        mod.pairwise_distances(X, X, 0)
    return run


CASES = {
    "simplex 60x180": _simplex_case,
    "dykstra m=300 d=10": _dykstra_case,
    "jacobi d=40": _jacobi_case,
    "pairwise linf 800x800x25": _pairwise_case,
}


def best_time(fn, mod, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(mod)
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    print(f"{'kernel':<28}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for label, make in CASES.items():
        fn = make(np.random.default_rng(args.seed))
        times = {name: best_time(fn, mod, args.repeat) for name, mod in backends.items()}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:<28}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times.values()) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
