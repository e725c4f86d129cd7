"""Regular-grid containers and discrete differential operators.

Fields are plain numpy arrays in row-major (C) order:

* a scalar field on a grid with extents ``dims`` has shape ``dims``;
* a vector field has shape ``(d, *dims)``, slot ``i`` holding the
  derivative along axis ``i``.

The gradient uses forward differences with a zero difference at the far
face of every axis, and ``div`` is its negative adjoint with respect to
the plain (unweighted) sum inner product, ``div = -grad^T``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp


def spacing_tuple(h, ndim):
    """Broadcast a scalar or per-axis spacing to a tuple of length ``ndim``."""
    if np.ndim(h) == 0:
        hs = (float(h),) * ndim
    else:
        hs = tuple(float(x) for x in h)
    if len(hs) != ndim:
        raise ValueError(f"spacing has {len(hs)} entries for a {ndim}-d grid")
    if any(not np.isfinite(x) or x <= 0 for x in hs):
        raise ValueError(f"grid spacing must be positive, got {hs}")
    return hs


@dataclass(frozen=True)
class GridSpec:
    """Extents and cell widths of a 1-d or 2-d regular grid."""

    dims: tuple
    spacing: tuple = None

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) not in (1, 2):
            raise ValueError(f"only 1-d and 2-d grids are supported, got dims={dims}")
        if any(n < 2 for n in dims):
            raise ValueError(f"every extent must be >= 2, got dims={dims}")
        object.__setattr__(self, "dims", dims)
        h = 1.0 if self.spacing is None else self.spacing
        object.__setattr__(self, "spacing", spacing_tuple(h, len(dims)))

    @classmethod
    def like(cls, u, h=1.0):
        u = np.asarray(u)
        return cls(u.shape, spacing_tuple(h, u.ndim))

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def n(self):
        return int(np.prod(self.dims))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def volume(self):
        """|Omega| = n * h^d."""
        return self.n * self.cell_volume

    def zeros(self):
        return np.zeros(self.dims)

    def zeros_vector(self):
        return np.zeros((self.ndim,) + self.dims)

    def check_scalar(self, u, name="field"):
        u = np.asarray(u, dtype=float)
        if u.shape != self.dims:
            raise ValueError(f"{name} has shape {u.shape}, grid expects {self.dims}")
        return u

    def check_vector(self, p, name="vector field"):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.ndim,) + self.dims:
            raise ValueError(
                f"{name} has shape {p.shape}, grid expects {(self.ndim,) + self.dims}"
            )
        return p


def _check_scalar(u):
    u = np.asarray(u, dtype=float)
    if u.ndim not in (1, 2):
        raise ValueError(f"scalar field must be 1-d or 2-d, got shape {u.shape}")
    return u


def grad(u, h=1.0):
    """Forward-difference gradient; zero at the far face of each axis."""
    u = _check_scalar(u)
    hs = spacing_tuple(h, u.ndim)
    out = np.zeros((u.ndim,) + u.shape)
    for i in range(u.ndim):
        lead = [slice(None)] * u.ndim
        lead[i] = slice(0, -1)
        out[(i,) + tuple(lead)] = np.diff(u, axis=i) / hs[i]
    return out


def div(p, h=1.0):
    """Discrete divergence, the negative adjoint of :func:`grad`."""
    p = np.asarray(p, dtype=float)
    ndim = p.ndim - 1
    if ndim not in (1, 2) or p.shape[0] != ndim:
        raise ValueError(f"vector field must have shape (d, *dims), got {p.shape}")
    hs = spacing_tuple(h, ndim)
    out = np.zeros(p.shape[1:])
    for i in range(ndim):
        pi = p[i]
        n = pi.shape[i]

        def sl(a, b):
            s = [slice(None)] * ndim
            s[i] = slice(a, b)
            return tuple(s)

        # interior: p_j - p_{j-1}; first cell: p_0; last cell: -p_{n-2}
        acc = np.zeros_like(pi)
        acc[sl(0, n - 1)] += pi[sl(0, n - 1)]
        acc[sl(1, n)] -= pi[sl(0, n - 1)]
        out += acc / hs[i]
    return out


def laplacian_dirichlet(u, h=1.0):
    """Five-point (three-point in 1-d) Laplacian with zero ghost values."""
    u = _check_scalar(u)
    hs = spacing_tuple(h, u.ndim)
    out = np.zeros_like(u)
    for i in range(u.ndim):
        padded = np.pad(u, [(1, 1) if j == i else (0, 0) for j in range(u.ndim)])
        lo = [slice(None)] * u.ndim
        hi = [slice(None)] * u.ndim
        lo[i] = slice(0, -2)
        hi[i] = slice(2, None)
        out += (padded[tuple(lo)] + padded[tuple(hi)] - 2.0 * u) / hs[i] ** 2
    return out


def vector_laplacian(q, h=1.0):
    """Apply :func:`laplacian_dirichlet` to every component of ``q``."""
    q = np.asarray(q, dtype=float)
    return np.stack([laplacian_dirichlet(qi, h) for qi in q])


def inner(a, b):
    """Plain sum-of-products inner product."""
    return float(np.sum(np.asarray(a) * np.asarray(b)))


# Sparse assembly, used for factorizations and as dense-test oracles.

def _diff_1d(n):
    main = -np.ones(n)
    main[-1] = 0.0
    upper = np.ones(n - 1)
    return sp.diags([main, upper], [0, 1], shape=(n, n), format="csr")


def _lap_1d(n):
    return sp.diags(
        [np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="csr"
    )


def _axis_kron(mats_1d, dims, axis):
    """Kronecker product placing ``mats_1d`` on ``axis`` and identities elsewhere."""
    out = None
    for j, n in enumerate(dims):
        factor = mats_1d if j == axis else sp.identity(n, format="csr")
        out = factor if out is None else sp.kron(out, factor, format="csr")
    return out


@lru_cache(maxsize=32)
def grad_matrix(dims, spacing):
    """Sparse ``(d*n, n)`` matrix of :func:`grad` acting on raveled fields."""
    dims = tuple(dims)
    hs = spacing_tuple(spacing, len(dims))
    blocks = [_axis_kron(_diff_1d(dims[i]), dims, i) / hs[i] for i in range(len(dims))]
    return sp.vstack(blocks, format="csr")


@lru_cache(maxsize=32)
def dirichlet_laplacian_matrix(dims, spacing):
    """Sparse ``(n, n)`` matrix of :func:`laplacian_dirichlet`."""
    dims = tuple(dims)
    hs = spacing_tuple(spacing, len(dims))
    out = None
    for i in range(len(dims)):
        term = _axis_kron(_lap_1d(dims[i]), dims, i) / hs[i] ** 2
        out = term if out is None else out + term
    return out.tocsc()
