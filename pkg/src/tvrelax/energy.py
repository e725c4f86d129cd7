"""Objective functionals: discrete TV, the primal problems and their duals.

Integrals are cell sums scaled by the cell volume ``h^d``. The clamp
bracket shared by the dual objectives is

    B(w) = |min(w+eps+2c, 0)|^2 + |max(w+eps, 0)|^2
           + |max(w-eps-2c, 0)|^2 - |max(w-eps, 0)|^2,

evaluated at ``w = div q - g``; ``B(w) / (4 eps)`` is the convex
conjugate of the penalized data term.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .grid import GridSpec, div, grad, vector_laplacian


@dataclass(frozen=True)
class SolverParams:
    """Scalar knobs of the relaxed problem and of the Newton solver.

    ``gamma`` and ``div_weight`` are taken in the scaling used by the
    smoothed dual solved by :func:`tvrelax.ssn.solve`, where they appear
    multiplied by ``2*eps`` relative to the regularized dual evaluated by
    :func:`dual_energy`. Defaults are the values used for the denoising
    experiments (``c=100, eps=1e-7, gamma=0.1, alpha=1e3, t=0.5``).

    ``line_search`` enables Armijo backtracking on the smoothed dual when a
    full Newton step fails to decrease it. Setting ``alpha_max`` makes the
    solver repeat the Newton iteration with ``alpha`` multiplied by
    ``alpha_growth`` until ``alpha_max``, warm-starting each stage.
    """

    beta: float = 1e-3
    c: float = 100.0
    eps: float = 1e-7
    gamma: float = 0.1
    alpha: float = 1e3
    div_weight: float = 0.0
    threshold_t: float = 0.5
    newton_reduction: float = 1e-8
    newton_stall: float = 1e-8
    newton_max_iters: int = 100
    pcg_base_tol: float = 1e-3
    pcg_max_iters: int = 1000
    preconditioner: str = "cholesky"
    line_search: bool = True
    alpha_max: float = None
    alpha_growth: float = 10.0

    def __post_init__(self):
        for name in ("beta", "c", "eps", "alpha"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be > 0, got {v}")
        for name in ("gamma", "div_weight"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be >= 0, got {v}")
        if not 0 < self.threshold_t < 1:
            raise ValueError(f"threshold_t must lie in (0, 1), got {self.threshold_t}")
        if self.newton_max_iters < 1 or self.pcg_max_iters < 1:
            raise ValueError("iteration caps must be positive")
        if self.preconditioner not in ("cholesky", "jacobi"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.alpha_max is not None and self.alpha_max < self.alpha:
            raise ValueError("alpha_max must be >= alpha")
        if self.alpha_growth <= 1:
            raise ValueError("alpha_growth must exceed 1")

    def alpha_schedule(self):
        """Smoothing weights visited by the solver, ending at ``alpha_max``."""
        if self.alpha_max is None:
            return [self.alpha]
        out = [self.alpha]
        while out[-1] < self.alpha_max:
            out.append(min(out[-1] * self.alpha_growth, self.alpha_max))
        return out

    def to_dict(self):
        return asdict(self)


def _same_grid(u, g):
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    if u.shape != g.shape:
        raise ValueError(f"grid mismatch: {u.shape} vs {g.shape}")
    return u, g


def tv(u, h=1.0):
    """Anisotropic discrete total variation ``sum |grad u|_1 * h^d``."""
    grid = GridSpec.like(u, h)
    return float(np.abs(grad(u, grid.spacing)).sum() * grid.cell_volume)


def primal_energy(u, g, beta, h=1.0):
    u, g = _same_grid(u, g)
    grid = GridSpec.like(u, h)
    return float(np.sum(g * u) * grid.cell_volume + beta * tv(u, grid.spacing))


def box_penalty(u):
    """Cellwise exact penalty ``max(0, 2|u - 1/2| - 1)``."""
    return np.maximum(0.0, 2.0 * np.abs(np.asarray(u) - 0.5) - 1.0)


def penalized_energy(u, g, p: SolverParams, h=1.0):
    """Objective of the penalized primal problem (P)."""
    u, g = _same_grid(u, g)
    dv = GridSpec.like(u, h).cell_volume
    extra = p.c * box_penalty(u) + 0.5 * p.eps * ((u - 1.0) ** 2 + u**2)
    return primal_energy(u, g, p.beta, h) + float(extra.sum() * dv)


def clamp_bracket(w, eps, c):
    """Cellwise value of the four-clamp bracket ``B(w)``.

    Evaluated branchwise; on the upper plateau the two large squares cancel
    to ``4 eps w`` and are never formed explicitly.
    """
    w = np.asarray(w, dtype=float)
    knot = eps + 2 * c
    return np.select(
        [w < -knot, w <= -eps, w < eps, w <= knot],
        [(w + knot) ** 2, np.zeros_like(w), (w + eps) ** 2, 4 * eps * w],
        default=4 * eps * w + (w - knot) ** 2,
    )


def clamp_bracket_derivative(w, eps, c):
    """Half the derivative of ``B``; equals ``2*eps`` times the recovered u."""
    return (
        np.minimum(w + eps + 2 * c, 0.0)
        + np.maximum(w + eps, 0.0)
        + np.maximum(w - eps - 2 * c, 0.0)
        - np.maximum(w - eps, 0.0)
    )


def dual_energy(q, g, p: SolverParams, h=1.0):
    """Regularized dual objective.

    ``p.gamma`` is used literally as the weight of ``(gamma/2)|div q - g|^2``;
    pass ``gamma=0`` for the unregularized dual. The kernel term
    ``(div_weight/2)|P_div q|^2`` is added when ``div_weight > 0``.
    """
    g = np.asarray(g, dtype=float)
    grid = GridSpec.like(g, h)
    q = grid.check_vector(q, "q")
    dv = grid.cell_volume
    w = div(q, grid.spacing) - g
    val = 0.5 * p.gamma * np.sum(w**2) + np.sum(clamp_bracket(w, p.eps, p.c)) / (4 * p.eps)
    if p.div_weight > 0:
        from .ssn import p_div_apply

        val += 0.5 * p.div_weight * np.sum(p_div_apply(q, grid.spacing) ** 2)
    return float(val * dv - 0.5 * p.eps * grid.volume)


def smoothed_dual_energy(q, g, p: SolverParams, h=1.0):
    """Objective of the smoothed, unconstrained dual minimized by the Newton solver.

    Its gradient with respect to the cell-volume weighted inner product is
    :func:`tvrelax.ssn.residual`.
    """
    g = np.asarray(g, dtype=float)
    grid = GridSpec.like(g, h)
    q = grid.check_vector(q, "q")
    w = div(q, grid.spacing) - g
    val = 0.5 * p.gamma * np.sum(w**2) + 0.5 * np.sum(clamp_bracket(w, p.eps, p.c))
    if p.div_weight > 0:
        from .ssn import p_div_apply

        val += 0.5 * p.div_weight * np.sum(p_div_apply(q, grid.spacing) ** 2)
    val -= 0.5 / p.alpha * np.sum(vector_laplacian(q, grid.spacing) * q)
    val += 0.5 * p.alpha * np.sum(np.maximum(0.0, q - p.beta) ** 2)
    val += 0.5 * p.alpha * np.sum(np.minimum(0.0, q + p.beta) ** 2)
    return float(val * grid.cell_volume)


def duality_gap(u, q, g, p: SolverParams, h=1.0):
    """``penalized_energy(u) + dual_energy(q)``; nonnegative for feasible q when gamma = 0."""
    return penalized_energy(u, g, p, h) + dual_energy(q, g, p, h)
