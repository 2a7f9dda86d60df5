"""Spectral lab for Schrodinger operators D^2 + q(eps^alpha x, x/eps)."""

__version__ = "0.1.0"

from .potential import (
    EnvelopeProfile,
    Term,
    TwoScalePotential,
    ScalingPair,
    default_potential,
    scaling_map,
    scaling_map_inv,
)
from .cell import CellSolution, solve_cell
from .normalform import ChangeOfVariable, PhaseExpansion, build_phase_profiles
from .oscillatory import AliasingError, EigenSolverError, SpectralResult, full_grid_oracle, solve_oscillatory
from .effective import solve_effective, solve_rescaled
from .asymptotics import RegimeReport, rate_fit, regime_of, superposition_check
from .wkb import AgmonProfile, build_quasimode, eigenvalue_jets

__all__ = [
    "__version__",
    "EnvelopeProfile",
    "Term",
    "TwoScalePotential",
    "ScalingPair",
    "default_potential",
    "scaling_map",
    "scaling_map_inv",
    "CellSolution",
    "solve_cell",
    "ChangeOfVariable",
    "PhaseExpansion",
    "build_phase_profiles",
    "AliasingError",
    "EigenSolverError",
    "SpectralResult",
    "full_grid_oracle",
    "solve_oscillatory",
    "solve_effective",
    "solve_rescaled",
    "RegimeReport",
    "rate_fit",
    "regime_of",
    "superposition_check",
    "AgmonProfile",
    "build_quasimode",
    "eigenvalue_jets",
]
