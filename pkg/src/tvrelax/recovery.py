"""Primal recovery from a dual field and level-set thresholding."""
from __future__ import annotations

import numpy as np

from .grid import div


def recover_from_slack(w, eps, c):
    """Piecewise-linear primal value as a function of ``w = div q - g``.

    Knots sit at ``-eps-2c, -eps, eps, eps+2c``; knot values are assigned to
    the flat branches so that plateau cells come out exactly 0 or 1.
    """
    w = np.asarray(w, dtype=float)
    lo, hi = eps + 2 * c, eps
    conds = [
        w < -lo,
        w <= -hi,
        w < hi,
        w <= lo,
    ]
    vals = [
        (w + eps + 2 * c) / (2 * eps),
        np.zeros_like(w),
        (w + eps) / (2 * eps),
        np.ones_like(w),
    ]
    return np.select(conds, vals, default=(w + eps - 2 * c) / (2 * eps))


def recover_u(q, g, p, h=1.0):
    """Primal field u associated with dual field ``q`` and data ``g``."""
    g = np.asarray(g, dtype=float)
    q = np.asarray(q, dtype=float)
    if q.shape[1:] != g.shape:
        raise ValueError(f"grid mismatch: q {q.shape} vs g {g.shape}")
    return recover_from_slack(div(q, h) - g, p.eps, p.c)


def threshold(u, t=0.5):
    """Indicator of the strict superlevel set ``{u > t}``."""
    if not 0 < t < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {t}")
    return (np.asarray(u) > t).astype(float)


def binary_fraction(u, tol=1e-6):
    """Share of cells within ``tol`` of 0 or 1."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    u = np.asarray(u, dtype=float)
    dist = np.minimum(np.abs(u), np.abs(u - 1.0))
    return float(np.mean(dist <= tol))
