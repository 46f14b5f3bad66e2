"""Parsing and evaluation of the l1, l2 and l-infinity norms."""

import math

import numpy as np

_ALIASES = {
    "l1": 1, "1": 1, 1: 1,
    "l2": 2, "2": 2, 2: 2,
    "linf": math.inf, "inf": math.inf, "l_inf": math.inf, math.inf: math.inf,
}


def parse_norm(p):
    """Return 1, 2 or ``math.inf`` for any accepted spelling of a norm."""
    key = p.lower() if isinstance(p, str) else p
    try:
        return _ALIASES[key]
    except (KeyError, TypeError):
        raise ValueError(f"unsupported norm {p!r}; use l1, l2 or linf") from None


def norm_name(p):
    return {1: "l1", 2: "l2", math.inf: "linf"}[parse_norm(p)]


def lp_norm(v, p):
    v = np.asarray(v, dtype=float)
    p = parse_norm(p)
    if v.size == 0:
        return 0.0
    if p == 1:
        return float(np.abs(v).sum())
    if p == 2:
        return float(np.sqrt(np.dot(v, v)))
    return float(np.abs(v).max())


def lp_distances(X, x, p):
    """Distances from every row of ``X`` to ``x``."""
    diff = np.abs(np.asarray(X, dtype=float) - np.asarray(x, dtype=float))
    p = parse_norm(p)
    if p == 1:
        return diff.sum(axis=1)
    if p == 2:
        return np.sqrt((diff * diff).sum(axis=1))
    return diff.max(axis=1, initial=0.0)
