"""Volume-constrained binary TV problems via a scalar Lagrange multiplier.

For a multiplier ``lam`` the shifted problem ``min sum (g + lam) u + beta TV(u)``
is solved and a level set of the relaxed field is taken; its volume ``W(lam)`` is nonincreasing in ``lam``,
so the multiplier meeting a target volume is found by bracketing and
bisection. On a finite grid ``W`` is a step function, and a target inside a
jump is reported as a plateau instead of being met exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import SolverParams, primal_energy
from .grid import GridSpec
from .recovery import recover_u, threshold
from .ssn import solve


def volume_of(u, h=1.0):
    """``sum u * h^d``."""
    return float(np.sum(u) * GridSpec.like(u, h).cell_volume)


@dataclass
class VolumeResult:
    u: np.ndarray
    multiplier: float
    achieved_volume: float
    target: float
    bracket: tuple
    bracket_volumes: tuple
    evaluations: int
    plateau: bool
    converged: bool = True

    def to_dict(self):
        return {
            "multiplier": self.multiplier,
            "achieved_volume": self.achieved_volume,
            "target": self.target,
            "bracket": list(self.bracket),
            "bracket_volumes": list(self.bracket_volumes),
            "evaluations": self.evaluations,
            "plateau": self.plateau,
            "converged": self.converged,
        }


_MAX_LEVELS = 100


def best_level_set(u, g, beta, t=0.5, h=1.0):
    """Level set of ``u`` with the lowest energy ``sum g v h^d + beta TV(v)``.

    Every level set of an exact relaxed minimizer is a binary minimizer, so
    on an exact solve this is ``threshold(u, t)``. Near ties the smoothed
    solve can leave a fractional field whose ``t``-level set is not optimal;
    another level set is taken only when its energy is strictly lower.
    """
    u = np.asarray(u, dtype=float)
    best = threshold(u, t)
    best_e = primal_energy(best, g, beta, h)
    vals = np.unique(u[(u > 0) & (u < 1)])
    if vals.size > _MAX_LEVELS:
        vals = np.quantile(vals, np.linspace(0, 1, _MAX_LEVELS))
    # one threshold below, between and above the fractional values
    edges = np.concatenate([[0.0], vals, [1.0]])
    for s in 0.5 * (edges[:-1] + edges[1:]):
        if not 0 < s < 1:
            continue
        v = threshold(u, s)
        e = primal_energy(v, g, beta, h)
        if e < best_e - 1e-12 * (1 + abs(best_e)):
            best, best_e = v, e
    return best


class _VolumeMap:
    """Evaluates ``W(lam)``, warm-starting each inner solve from the last one."""

    def __init__(self, g, p, h):
        self.g = np.asarray(g, dtype=float)
        self.p = p
        self.h = h
        self.q = None
        self.evaluations = 0
        self.all_converged = True

    def __call__(self, lam):
        g = self.g + lam
        self.q, rep = solve(g, self.p, q0=self.q, h=self.h)
        self.evaluations += 1
        self.all_converged &= rep.converged
        u = best_level_set(recover_u(self.q, g, self.p, self.h), g, self.p.beta,
                           self.p.threshold_t, self.h)
        return volume_of(u, self.h), u


def volume_curve(g, p: SolverParams, lams, h=1.0):
    """Volumes ``W(lam)`` of the binary solutions for every ``lam``."""
    wmap = _VolumeMap(g, p, h)
    return np.array([wmap(lam)[0] for lam in lams])


def solve_with_volume(g, p: SolverParams, volume, vol_tol, h=1.0, lam_max=1e6, width=1e-8):
    """Binary minimizer of the TV problem with ``|volume_of(u) - volume| <= vol_tol``.

    Parameters
    ----------
    g : ndarray
        Data coefficient field.
    p : SolverParams
        Solver parameters for the inner solves.
    volume : float
        Target volume, strictly between 0 and ``|Omega|``.
    vol_tol : float
        Accepted volume deviation.
    lam_max : float
        Bound on ``|lam|`` during bracket expansion.
    width : float
        Bisection stops once the multiplier bracket is this narrow.

    Returns
    -------
    VolumeResult
        ``plateau`` is set when ``W`` jumps over the target; then ``u`` is
        the bracket end closer to the target (ties go to the smaller volume)
        and the multiplier is the bracket midpoint.
    """
    g = np.asarray(g, dtype=float)
    grid = GridSpec.like(g, h)
    if not 0 < volume < grid.volume:
        raise ValueError(f"target volume must lie in (0, {grid.volume}), got {volume}")
    if vol_tol < 0:
        raise ValueError("vol_tol must be nonnegative")
    wmap = _VolumeMap(g, p, h)

    def done(lam, vol, u):
        return VolumeResult(u, float(lam), vol, float(volume), (lam, lam), (vol, vol),
                            wmap.evaluations, False, wmap.all_converged)

    vol0, u0 = wmap(0.0)
    if abs(vol0 - volume) <= vol_tol:
        return done(0.0, vol0, u0)

    # W is nonincreasing: too much volume means the multiplier must grow
    sign = 1.0 if vol0 > volume else -1.0
    lam_a, vol_a, u_a = 0.0, vol0, u0
    step = max(1.0, float(np.abs(g).max()) / 8)
    while True:
        lam_b = sign * step
        if abs(lam_b) > lam_max:
            raise RuntimeError(f"no multiplier with |lam| <= {lam_max} brackets the target")
        vol_b, u_b = wmap(lam_b)
        if abs(vol_b - volume) <= vol_tol:
            return done(lam_b, vol_b, u_b)
        if (vol_b - volume) * (vol0 - volume) < 0:
            break
        lam_a, vol_a, u_a = lam_b, vol_b, u_b
        step *= 2.0

    # order the bracket so that lo carries the larger volume
    if lam_a < lam_b:
        lo, hi = (lam_a, vol_a, u_a), (lam_b, vol_b, u_b)
    else:
        lo, hi = (lam_b, vol_b, u_b), (lam_a, vol_a, u_a)
    while hi[0] - lo[0] > width:
        mid = 0.5 * (lo[0] + hi[0])
        vol_m, u_m = wmap(mid)
        if abs(vol_m - volume) <= vol_tol:
            return done(mid, vol_m, u_m)
        if vol_m > volume:
            lo = (mid, vol_m, u_m)
        else:
            hi = (mid, vol_m, u_m)

    pick = lo if abs(lo[1] - volume) < abs(hi[1] - volume) else hi
    return VolumeResult(
        u=pick[2],
        multiplier=0.5 * (lo[0] + hi[0]),
        achieved_volume=pick[1],
        target=float(volume),
        bracket=(lo[0], hi[0]),
        bracket_volumes=(lo[1], hi[1]),
        evaluations=wmap.evaluations,
        plateau=True,
        converged=wmap.all_converged,
    )
