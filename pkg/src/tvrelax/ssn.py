"""Inexact semismooth Newton solver for the smoothed box-constrained dual.

The solver minimizes, over vector fields q with zero boundary values,

    gamma/2 |w|^2 + 1/2 B(w) + lam/2 |P_div q|^2 + 1/(2 alpha) |grad q|^2
      + alpha/2 |max(0, q - beta)|^2 + alpha/2 |min(0, q + beta)|^2,

with ``w = div q - g`` and ``B`` the clamp bracket of
:mod:`tvrelax.energy`. Each Newton step solves the generalized Jacobian
system by preconditioned CG with a tolerance tied to the residual decrease.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .energy import (
    SolverParams,
    clamp_bracket_derivative,
    duality_gap,
    smoothed_dual_energy,
)
from .grid import (
    GridSpec,
    dirichlet_laplacian_matrix,
    div,
    grad,
    grad_matrix,
    spacing_tuple,
    vector_laplacian,
)
from .recovery import binary_fraction, recover_u

log = logging.getLogger(__name__)


class PCGBreakdown(ArithmeticError):
    """Raised when CG meets a direction of nonpositive curvature."""


@dataclass
class ActiveSets:
    """Cellwise masks of the generalized derivative.

    ``a1``..``a4`` live on cells and are keyed on ``w = div q - g``;
    ``a5``, ``a6`` live on the components of q.
    """

    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    a4: np.ndarray
    a5: np.ndarray
    a6: np.ndarray

    def slack_weight(self, gamma):
        """Diagonal ``gamma + chi_1 + chi_2 + chi_3 - chi_4`` (always >= gamma)."""
        return (
            gamma
            + self.a1.astype(float)
            + self.a2.astype(float)
            + self.a3.astype(float)
            - self.a4.astype(float)
        )

    @property
    def box(self):
        return self.a5 | self.a6


def active_sets(q, g, p: SolverParams, h=1.0):
    w = div(q, h) - np.asarray(g, dtype=float)
    q = np.asarray(q, dtype=float)
    return ActiveSets(
        a1=w < -p.eps - 2 * p.c,
        a2=w > -p.eps,
        a3=w > p.eps + 2 * p.c,
        a4=w > p.eps,
        a5=q > p.beta,
        a6=q < -p.beta,
    )


def residual(q, g, p: SolverParams, h=1.0):
    """Gradient of the smoothed dual objective (zero exactly at its minimizer)."""
    g = np.asarray(g, dtype=float)
    grid = GridSpec.like(g, h)
    q = grid.check_vector(q, "q")
    hs = grid.spacing
    w = div(q, hs) - g
    bracket = p.gamma * w + clamp_bracket_derivative(w, p.eps, p.c)
    out = -grad(bracket, hs) - vector_laplacian(q, hs) / p.alpha
    out += np.maximum(0.0, p.alpha * (q - p.beta)) + np.minimum(0.0, p.alpha * (q + p.beta))
    if p.div_weight > 0:
        out += p.div_weight * p_div_apply(q, hs)
    return out


def newton_apply(ds: ActiveSets, dq, p: SolverParams, h=1.0):
    """Matrix-free generalized Jacobian of :func:`residual` applied to ``dq``."""
    dq = np.asarray(dq, dtype=float)
    hs = spacing_tuple(h, dq.ndim - 1)
    out = -grad(ds.slack_weight(p.gamma) * div(dq, hs), hs)
    out -= vector_laplacian(dq, hs) / p.alpha
    out += p.alpha * ds.box * dq
    if p.div_weight > 0:
        out += p.div_weight * p_div_apply(dq, hs)
    return out


def pcg(apply, rhs, precond=None, tol=1e-10, max_iters=1000):
    """Preconditioned conjugate gradients from a zero initial guess.

    Stops once ``|rhs - A x| <= tol * |rhs|``. Returns ``(x, iterations)``.
    """
    rhs = np.asarray(rhs, dtype=float)
    x = np.zeros_like(rhs)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return x, 0
    r = rhs.copy()
    z = precond(r) if precond is not None else r.copy()
    rz = np.vdot(r, z)
    if rz <= 0:
        raise PCGBreakdown("preconditioner is not positive definite")
    d = z.copy()
    for it in range(1, max_iters + 1):
        ad = apply(d)
        curv = np.vdot(d, ad)
        if not curv > 0:
            raise PCGBreakdown(f"nonpositive curvature {curv:.3e} at CG iteration {it}")
        step = rz / curv
        x += step * d
        r -= step * ad
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it
        z = precond(r) if precond is not None else r
        rz_new = np.vdot(r, z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    return x, max_iters


@lru_cache(maxsize=16)
def _projection_factor(dims, spacing):
    # Graph Laplacian G^T G of the forward-difference gradient with the first
    # cell pinned; the remaining block is SPD on a connected grid.
    gmat = grad_matrix(dims, spacing)[:, 1:].tocsc()
    k = (gmat.T @ gmat).tocsc()
    return gmat, spla.splu(k)


def p_div_apply(q, h=1.0):
    """Orthogonal projection onto discretely divergence-free vector fields.

    Returns ``q - grad(phi)`` with ``div(grad(phi)) = div(q)``.
    """
    q = np.asarray(q, dtype=float)
    dims = q.shape[1:]
    spacing = spacing_tuple(h, len(dims))
    gmat, lu = _projection_factor(dims, spacing)
    phi = lu.solve(gmat.T @ q.ravel())
    if not np.all(np.isfinite(phi)):
        raise ArithmeticError("Poisson solve for the divergence projection failed")
    return (q.ravel() - gmat @ phi).reshape(q.shape)


class BoxLaplacePreconditioner:
    """Inverse of ``(1/alpha)(-Laplacian) + alpha * chi_box`` per component.

    Factorizations are cached and redone only for components whose box mask
    changed since the previous Newton step.
    """

    def __init__(self, grid: GridSpec, p: SolverParams):
        self.grid = grid
        self.p = p
        self._neg_lap = -dirichlet_laplacian_matrix(grid.dims, grid.spacing) / p.alpha
        self._masks = [None] * grid.ndim
        self._factors = [None] * grid.ndim
        self.factorizations = 0

    def update(self, ds: ActiveSets):
        box = ds.box
        for i in range(self.grid.ndim):
            mask = box[i].ravel()
            if self._masks[i] is not None and np.array_equal(mask, self._masks[i]):
                continue
            mat = (self._neg_lap + sp.diags(self.p.alpha * mask.astype(float))).tocsc()
            self._factors[i] = spla.splu(mat)
            self._masks[i] = mask.copy()
            self.factorizations += 1

    def __call__(self, r):
        out = np.empty_like(r)
        for i in range(self.grid.ndim):
            out[i] = self._factors[i].solve(r[i].ravel()).reshape(self.grid.dims)
        return out


class JacobiPreconditioner:
    """Inverse diagonal of the Newton operator (the projection term is omitted)."""

    def __init__(self, grid: GridSpec, p: SolverParams):
        self.grid = grid
        self.p = p
        gm = grad_matrix(grid.dims, grid.spacing)
        self._g2 = gm.multiply(gm).tocsr()
        self._lap_diag = sum(2.0 / hi**2 for hi in grid.spacing) / p.alpha
        self._inv = None

    def update(self, ds: ActiveSets):
        diag = self._g2 @ ds.slack_weight(self.p.gamma).ravel()
        diag = diag.reshape((self.grid.ndim,) + self.grid.dims)
        diag += self._lap_diag + self.p.alpha * ds.box
        self._inv = 1.0 / diag

    def __call__(self, r):
        return self._inv * r


@dataclass
class SolveReport:
    residual_history: list = field(default_factory=list)
    newton_iters: int = 0
    pcg_iters: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)
    alpha_stages: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    final_gap: float = float("nan")
    binary_fraction: float = float("nan")
    wall_time: float = 0.0

    def to_dict(self):
        return asdict(self)

    def csv_rows(self):
        """Rows ``(iter, residual, pcg_iters)``; iteration 0 has no CG work."""
        pcg_counts = [0] + list(self.pcg_iters)
        return [(k, r, pcg_counts[k]) for k, r in enumerate(self.residual_history)]


def make_preconditioner(grid, p):
    if p.preconditioner == "jacobi":
        return JacobiPreconditioner(grid, p)
    return BoxLaplacePreconditioner(grid, p)


_ARMIJO = 1e-4
_MIN_STEP = 2.0**-30


def _step_length(q, dq, r, g, p, hs, dv):
    """Armijo backtracking on the smoothed dual, full step first."""
    e0 = smoothed_dual_energy(q, g, p, hs)
    slope = dv * float(np.vdot(r, dq))
    s = 1.0
    while s >= _MIN_STEP:
        if smoothed_dual_energy(q + s * dq, g, p, hs) <= e0 + _ARMIJO * s * slope:
            return s
        s *= 0.5
    # no acceptable step: fall back to the plain Newton update
    return 1.0


def _newton_stage(q, g, p, grid, report):
    hs = grid.spacing
    r = residual(q, g, p, hs)
    res = res0 = np.linalg.norm(r)
    if res0 == 0.0:
        return q, True, "reduction", 0
    precond = make_preconditioner(grid, p)
    budget = p.newton_max_iters - report.newton_iters
    for k in range(budget):
        ds = active_sets(q, g, p, hs)
        precond.update(ds)
        ratio = res / res0
        tol = p.pcg_base_tol * min(ratio**1.5, ratio)
        dq, its = pcg(
            lambda x: newton_apply(ds, x, p, hs), -r, precond, tol, p.pcg_max_iters
        )
        s = _step_length(q, dq, r, g, p, hs, grid.cell_volume) if p.line_search else 1.0
        q = q + s * dq
        r = residual(q, g, p, hs)
        prev, res = res, np.linalg.norm(r)
        report.residual_history.append(float(res))
        report.pcg_iters.append(int(its))
        report.step_sizes.append(float(s))
        report.newton_iters += 1
        log.debug("newton %d: residual %.3e, pcg %d, step %g", report.newton_iters, res, its, s)
        if res <= p.newton_reduction * res0:
            return q, True, "reduction", k + 1
        if abs(res - prev) < p.newton_stall:
            return q, True, "stall", k + 1
    return q, False, "max_iters", budget


def solve(g, p: SolverParams, q0=None, h=1.0):
    """Run the inexact semismooth Newton iteration.

    Stops when the residual norm drops below ``newton_reduction`` times its
    initial value, when two successive residual norms differ by less than
    ``newton_stall``, or after ``newton_max_iters`` steps in total. With
    ``p.alpha_max`` set, the iteration is repeated for every weight of
    ``p.alpha_schedule()``, each stage warm-started from the previous one.
    ``residual_history`` runs across stages (its last entry is re-evaluated
    under the new weight when a stage starts) and ``alpha_stages`` records
    ``[alpha, iterations]`` per stage.

    Returns the final dual field and a :class:`SolveReport`.
    """
    t0 = time.perf_counter()
    g = np.asarray(g, dtype=float)
    grid = GridSpec.like(g, h)
    hs = grid.spacing
    q = grid.zeros_vector() if q0 is None else grid.check_vector(q0, "q0").copy()
    if not np.all(np.isfinite(g)):
        raise ValueError("g contains non-finite values")

    report = SolveReport(residual_history=[float(np.linalg.norm(residual(q, g, p, hs)))])
    stage_p = p
    for alpha in p.alpha_schedule():
        stage_p = replace(p, alpha=alpha, alpha_max=None)
        if report.alpha_stages:
            # the objective changed; restart the reference residual
            report.residual_history[-1] = float(np.linalg.norm(residual(q, g, stage_p, hs)))
        q, ok, reason, its = _newton_stage(q, g, stage_p, grid, report)
        report.alpha_stages.append([float(alpha), int(its)])
        report.converged, report.reason = ok, reason
        if not ok:
            break

    u = recover_u(q, g, p, hs)
    report.binary_fraction = binary_fraction(u, 1e-6)
    q_box = np.clip(q, -p.beta, p.beta)
    report.final_gap = duality_gap(u, q_box, g, replace(p, gamma=0.0, div_weight=0.0), hs)
    report.wall_time = time.perf_counter() - t0
    return q, report
