"""Numerical tolerances shared by the solvers, geometry and attacks.

Features are expected in [0, 1], so these are absolute tolerances.
"""

#: A point satisfies ``w.z <= b`` when ``w.z - b <= FEAS_TOL``.
FEAS_TOL = 1e-7
#: Parallel constraints whose unit normals and offsets agree within this are merged.
DEDUP_TOL = 1e-10
#: Smallest tableau entry accepted as a pivot.
PIVOT_TOL = 1e-9
#: Degenerate pivots tolerated before switching to Bland's rule.
BLAND_AFTER = 500
#: Hard cap on simplex pivots per phase.
SIMPLEX_MAX_ITER = 50_000
#: Dykstra stops when one full sweep moves the iterate less than this.
DYKSTRA_TOL = 1e-9
DYKSTRA_MAX_SWEEPS = 10_000
#: Jacobi stops when the off-diagonal Frobenius norm drops below this.
JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100
#: Step taken into a region's interior when a boundary optimum fails verification.
EPS_NUDGE = 1e-6
#: Tolerance for comparing a stored distance against its recomputation.
DISTANCE_TOL = 1e-9
