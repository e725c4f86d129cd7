"""Application drivers built on the relaxed binary TV solver.

* binary denoising: ``min 1/2 |u - f|^2 + beta TV(u)`` over binary u, which
  is the linear problem with ``g = 1/2 - f``;
* two-phase piecewise-constant segmentation, alternating the region means
  and a binary TV problem with ``g = (c1 - f)^2 - (c2 - f)^2``;
* ``2^M``-phase labeling with M indicator fields, updated one at a time.

Images default to the unit-square spacing ``h = 1 / max(shape)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .energy import SolverParams, primal_energy, tv
from .grid import GridSpec
from .recovery import recover_u, threshold
from .ssn import SolveReport, solve

log = logging.getLogger(__name__)

MAX_LABEL_FIELDS = 8


class DegenerateInputError(ValueError):
    """Input data cannot be split into distinct phases (e.g. a constant image)."""


def image_spacing(shape):
    """Spacing that maps the grid onto a unit-length domain along its longest axis."""
    return 1.0 / max(shape)


def _spacing(f, h):
    return image_spacing(np.shape(f)) if h is None else h


@dataclass
class DenoiseResult:
    u: np.ndarray
    q: np.ndarray
    relaxed: np.ndarray
    report: SolveReport
    energy: float


def denoise(f, p: SolverParams, h=None, q0=None):
    """Binary denoising with full solver output.

    ``energy`` is the objective ``sum (1/2 - f) u h^d + beta TV(u)`` of the
    thresholded field.
    """
    f = np.asarray(f, dtype=float)
    h = _spacing(f, h)
    g = 0.5 - f
    q, rep = solve(g, p, q0=q0, h=h)
    relaxed = recover_u(q, g, p, h)
    u = threshold(relaxed, p.threshold_t)
    return DenoiseResult(u, q, relaxed, rep, primal_energy(u, g, p.beta, h))


def denoise_binary(f, p: SolverParams, h=None):
    """Binary field closest to ``f`` in the TV-regularized least-squares sense."""
    return denoise(f, p, h).u


def initial_labels(f, m):
    """Phase index per cell from uniform quantization of ``f`` into ``2^m`` bins.

    Bin edges are ``k / 2^m``; with ``m = 1`` this is the superlevel set
    ``{f > 1/2}``. When every cell lands in one bin, ``f`` is first rescaled
    to [0, 1].
    """
    f = np.asarray(f, dtype=float)
    lo, hi = float(f.min()), float(f.max())
    if hi - lo <= 0:
        raise DegenerateInputError("constant data has no phases to separate")
    edges = np.arange(1, 2**m) / 2**m
    labels = np.searchsorted(edges, f, side="left")
    if np.all(labels == labels.flat[0]):
        labels = np.searchsorted(edges, (f - lo) / (hi - lo), side="left")
    return labels


def labels_to_indicators(labels, m):
    """Split phase indices into ``m`` binary fields; bit ``i`` drives field ``i``."""
    labels = np.asarray(labels)
    return np.stack([((labels >> i) & 1).astype(float) for i in range(m)])


def indicator_products(indicators):
    """``Z_b(u)`` for every bit pattern ``b``, stacked along axis 0."""
    m = len(indicators)
    out = []
    for b in range(2**m):
        z = np.ones_like(indicators[0])
        for i in range(m):
            z = z * (indicators[i] if (b >> i) & 1 else 1.0 - indicators[i])
        out.append(z)
    return np.stack(out)


def _phase_means(weights, f, previous):
    """Weighted means of ``f``; phases with zero weight keep ``previous``."""
    mass = weights.reshape(len(weights), -1).sum(axis=1)
    sums = (weights * f).reshape(len(weights), -1).sum(axis=1)
    empty = mass <= 0
    means = np.where(empty, previous, sums / np.where(empty, 1.0, mass))
    return means, empty


# two-phase segmentation

@dataclass
class SegmentationState:
    u: np.ndarray
    c1: float
    c2: float
    outer_iters: int = 0
    converged: bool = False
    objective_history: list = field(default_factory=list)
    change_history: list = field(default_factory=list)
    empty_phase: bool = False
    reports: list = field(default_factory=list)

    def piecewise_image(self):
        return np.where(self.u > 0, self.c1, self.c2)


def segmentation_objective(u, f, c1, c2, beta, h=1.0):
    """``sum [u (c1 - f)^2 + (1 - u)(c2 - f)^2] h^d + beta TV(u)``."""
    dv = GridSpec.like(f, h).cell_volume
    data = u * (c1 - f) ** 2 + (1 - u) * (c2 - f) ** 2
    return float(data.sum() * dv + beta * tv(u, h))


def chan_vese(f, p: SolverParams, u0=None, h=None, max_outer=50, tol=1e-4):
    """Two-phase piecewise-constant segmentation.

    Parameters
    ----------
    f : ndarray
        Image data.
    p : SolverParams
        Parameters of every binary TV subproblem.
    u0 : ndarray, optional
        Binary initial segmentation; defaults to ``{f > 1/2}``.
    h : float, optional
        Grid spacing, by default ``1 / max(f.shape)``.
    max_outer : int
        Cap on the number of u-updates.
    tol : float
        Stop once ``|u^k - u^{k-1}|_1 <= tol |Omega|``.

    Returns
    -------
    SegmentationState
        ``c1`` is the mean of ``f`` where ``u = 1``.
    """
    f = np.asarray(f, dtype=float)
    h = _spacing(f, h)
    grid = GridSpec.like(f, h)
    if f.max() - f.min() <= 0:
        raise DegenerateInputError("constant data has no phases to separate")
    if u0 is None:
        u = (initial_labels(f, 1) > 0).astype(float)
    else:
        u = threshold(grid.check_scalar(u0, "u0"), 0.5)

    means, empty = _phase_means(np.stack([u, 1 - u]), f, np.array([f.max(), f.min()]))
    state = SegmentationState(u=u, c1=float(means[0]), c2=float(means[1]))
    state.empty_phase = bool(empty.any())
    state.objective_history.append(segmentation_objective(u, f, state.c1, state.c2, p.beta, h))
    q = None
    for k in range(max_outer):
        g = (state.c1 - f) ** 2 - (state.c2 - f) ** 2
        q, rep = solve(g, p, q0=q, h=h)
        state.reports.append(rep)
        u_new = threshold(recover_u(q, g, p, h), p.threshold_t)
        change = float(np.abs(u_new - state.u).sum() * grid.cell_volume)
        means, empty = _phase_means(
            np.stack([u_new, 1 - u_new]), f, np.array([state.c1, state.c2])
        )
        state.u, state.c1, state.c2 = u_new, float(means[0]), float(means[1])
        state.empty_phase |= bool(empty.any())
        state.outer_iters = k + 1
        state.change_history.append(change)
        state.objective_history.append(
            segmentation_objective(state.u, f, state.c1, state.c2, p.beta, h)
        )
        log.debug("segmentation %d: change %.3e, c = (%g, %g)", k + 1, change, state.c1, state.c2)
        if change <= tol * grid.volume:
            state.converged = True
            break
    if state.c1 == state.c2:
        raise DegenerateInputError("both phases ended with the same mean")
    return state


# multi-phase labeling

@dataclass
class LabelState:
    m: int
    indicators: np.ndarray
    constants: np.ndarray
    piecewise_image: np.ndarray = None
    sweeps: int = 0
    converged: bool = False
    objective_history: list = field(default_factory=list)
    change_history: list = field(default_factory=list)
    empty_phases: np.ndarray = None
    reports: list = field(default_factory=list)

    def labels(self):
        """Phase index per cell, ``sum_i u_i 2^i``."""
        return sum((self.indicators[i] > 0.5).astype(int) << i for i in range(self.m))


def assemble_piecewise(indicators, constants):
    """``f^pc = sum_b c_b Z_b(u)``."""
    return np.tensordot(constants, indicator_products(indicators), axes=1)


def labeling_objective(indicators, constants, f, beta, h=1.0):
    """``sum_b sum Z_b(u) (c_b - f)^2 h^d + beta sum_i TV(u_i)``."""
    dv = GridSpec.like(f, h).cell_volume
    z = indicator_products(indicators)
    data = sum(float((z[b] * (constants[b] - f) ** 2).sum()) for b in range(len(constants)))
    return data * dv + beta * sum(tv(u, h) for u in indicators)


def label_gradient(state: LabelState, f, i):
    """Coefficient of ``u_i`` in the labeling data term, other fields fixed.

    ``i`` counts from 1 to ``M``. The result is
    ``sum_{b_i=1} prod_{j!=i} z_{b_j}(u_j) (c_b - f)^2 - sum_{b_i=0} (same)``.
    """
    m = state.m
    if not 1 <= i <= m:
        raise IndexError(f"field index must lie in 1..{m}, got {i}")
    f = np.asarray(f, dtype=float)
    k = i - 1
    g = np.zeros_like(f)
    for b in range(2**m):
        weight = np.ones_like(f)
        for j in range(m):
            if j != k:
                uj = state.indicators[j]
                weight = weight * (uj if (b >> j) & 1 else 1.0 - uj)
        term = weight * (state.constants[b] - f) ** 2
        g = g + term if (b >> k) & 1 else g - term
    return g


def _initial_constants(f, m):
    lo, hi = float(f.min()), float(f.max())
    return lo + (np.arange(2**m) + 0.5) / 2**m * (hi - lo)


def multilabel(f, p: SolverParams, m, u0=None, h=None, max_sweeps=30, tol=1e-4):
    """``2^m``-phase piecewise-constant labeling by Gauss-Seidel sweeps.

    Each sweep solves the binary TV problem for ``u_1, ..., u_m`` in turn
    with the current values of the other fields, thresholds it, and then
    recomputes all phase constants. Empty phases keep their constant and
    are flagged in ``empty_phases``.
    """
    f = np.asarray(f, dtype=float)
    h = _spacing(f, h)
    grid = GridSpec.like(f, h)
    if not 1 <= m <= MAX_LABEL_FIELDS:
        raise ValueError(f"number of indicator fields must lie in 1..{MAX_LABEL_FIELDS}, got {m}")
    if f.max() - f.min() <= 0:
        raise DegenerateInputError("constant data has no phases to separate")
    if u0 is None:
        indicators = labels_to_indicators(initial_labels(f, m), m)
    else:
        u0 = np.asarray(u0, dtype=float)
        if u0.shape != (m,) + f.shape:
            raise ValueError(f"u0 has shape {u0.shape}, expected {(m,) + f.shape}")
        indicators = threshold(u0, 0.5)

    constants, empty = _phase_means(indicator_products(indicators), f, _initial_constants(f, m))
    state = LabelState(m=m, indicators=indicators, constants=constants, empty_phases=empty)
    state.objective_history.append(labeling_objective(indicators, constants, f, p.beta, h))
    qs = [None] * m
    for k in range(max_sweeps):
        change = 0.0
        for i in range(1, m + 1):
            g = label_gradient(state, f, i)
            qs[i - 1], rep = solve(g, p, q0=qs[i - 1], h=h)
            state.reports.append(rep)
            u_new = threshold(recover_u(qs[i - 1], g, p, h), p.threshold_t)
            change += float(np.abs(u_new - state.indicators[i - 1]).sum() * grid.cell_volume)
            state.indicators = state.indicators.copy()
            state.indicators[i - 1] = u_new
        state.constants, empty = _phase_means(
            indicator_products(state.indicators), f, state.constants
        )
        state.empty_phases = state.empty_phases | empty
        state.sweeps = k + 1
        state.change_history.append(change)
        state.objective_history.append(
            labeling_objective(state.indicators, state.constants, f, p.beta, h)
        )
        log.debug("labeling sweep %d: change %.3e", k + 1, change)
        if change <= tol * grid.volume:
            state.converged = True
            break
    state.piecewise_image = assemble_piecewise(state.indicators, state.constants)
    return state
