"""Exhaustive minimization over binary fields on tiny grids.

Configuration ``k`` sets cell ``j`` (row-major) to bit ``j`` of ``k``.
Ties are resolved in favour of the smallest ``k``.
"""
from __future__ import annotations

import numpy as np

from .grid import GridSpec

MAX_CELLS = 20
_CHUNK = 1 << 14


def _energies(codes, g, beta, grid):
    """Primal energies of the configurations encoded by ``codes``."""
    n = grid.n
    bits = ((codes[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(float)
    u = bits.reshape((len(codes),) + grid.dims)
    e = bits @ g.ravel() * grid.cell_volume
    jumps = np.zeros(len(codes))
    for axis in range(grid.ndim):
        d = np.abs(np.diff(u, axis=axis + 1)) / grid.spacing[axis]
        jumps += d.reshape(len(codes), -1).sum(axis=1)
    return e + beta * jumps * grid.cell_volume, bits


def _search(g, beta, h, keep=None):
    g = np.asarray(g, dtype=float)
    grid = GridSpec.like(g, h)
    if grid.n > MAX_CELLS:
        raise ValueError(f"brute force limited to {MAX_CELLS} cells, grid has {grid.n}")
    best_e, best_k = np.inf, -1
    total = 1 << grid.n
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        e, bits = _energies(codes, g, beta, grid)
        if keep is not None:
            e = np.where(keep(bits.sum(axis=1) * grid.cell_volume), e, np.inf)
        j = int(np.argmin(e))
        if e[j] < best_e:
            best_e, best_k = float(e[j]), int(codes[j])
    if best_k < 0:
        raise ValueError("no feasible binary configuration")
    u = ((best_k >> np.arange(grid.n)) & 1).astype(float).reshape(grid.dims)
    return u, best_e


def brute_force_min(g, beta, h=1.0):
    """Binary minimizer of ``sum g u h^d + beta TV(u)`` and its energy."""
    return _search(g, beta, h)


def brute_force_volume(g, beta, volume, vol_tol, h=1.0):
    """Binary minimizer subject to ``|sum u h^d - volume| <= vol_tol``."""
    return _search(g, beta, h, keep=lambda vol: np.abs(vol - volume) <= vol_tol)
