"""Binary total-variation minimization by exact convex relaxation.

The relaxed problem is solved through its smoothed Fenchel dual with an
inexact semismooth Newton method; a binary minimizer is read off by
thresholding the recovered primal field.
"""
from .apps import (
    DegenerateInputError,
    chan_vese,
    denoise,
    denoise_binary,
    multilabel,
)
from .energy import (
    SolverParams,
    dual_energy,
    duality_gap,
    penalized_energy,
    primal_energy,
    smoothed_dual_energy,
    tv,
)
from .grid import GridSpec, div, grad, laplacian_dirichlet
from .oracle import brute_force_min, brute_force_volume
from .recovery import binary_fraction, recover_u, threshold
from .ssn import SolveReport, residual, solve
from .volume import VolumeResult, best_level_set, solve_with_volume, volume_curve, volume_of

__version__ = "0.1.0"

__all__ = [
    "DegenerateInputError",
    "GridSpec",
    "SolveReport",
    "SolverParams",
    "VolumeResult",
    "best_level_set",
    "binary_fraction",
    "brute_force_min",
    "brute_force_volume",
    "chan_vese",
    "denoise",
    "denoise_binary",
    "div",
    "dual_energy",
    "duality_gap",
    "grad",
    "laplacian_dirichlet",
    "multilabel",
    "penalized_energy",
    "primal_energy",
    "recover_u",
    "residual",
    "smoothed_dual_energy",
    "solve",
    "solve_with_volume",
    "threshold",
    "tv",
    "volume_curve",
    "volume_of",
]
