"""Hot kernels with a compiled fast path.

The Cython extension is used when it was built; otherwise, or when
``NPROBUST_PURE_PYTHON=1`` is set, the numpy reference in ``_pykernels`` is
used. ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels

OPTIMAL = _pykernels.OPTIMAL
UNBOUNDED = _pykernels.UNBOUNDED
ITERATION_LIMIT = _pykernels.ITERATION_LIMIT

_compiled = None
if os.environ.get("NPROBUST_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _pykernels
BACKEND = "cython" if _compiled is not None else "python"

simplex_iterate = _impl.simplex_iterate
dykstra_project = _impl.dykstra_project
jacobi_eigh = _impl.jacobi_eigh
pairwise_distances = _impl.pairwise_distances


def available_backends():
    """Map backend name to module for every importable implementation."""
    out = {"python": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    else:
        try:
            from . import _ckernels
            out["cython"] = _ckernels
        except ImportError:
            pass
    return out


def norm_code(p):
    """Kernel encoding of an l_p norm: 1, 2, or 0 for infinity."""
    if p in (1, "1", "l1"):
        return 1
    if p in (2, "2", "l2"):
        return 2
    if p in (float("inf"), "inf", "linf", 0):
        return 0
    raise ValueError(f"unsupported norm {p!r}")
