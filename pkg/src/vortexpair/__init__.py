"""Travelling vortex pairs of the generalized SQG equation.

Variational solver for the steady dipole, the analytic Lamb dipole
baseline, and a pseudo-spectral integrator for travelling and stability
experiments.
"""

__version__ = "0.1.0"

from .evolution import embed_periodic, evolve, run_stability, shift_distance, turnover_time
from .functionals import check_admissible, penalized_energy, rescale
from .grid import (
    ConfigurationError,
    Field,
    Grid,
    Multipliers,
    Params,
    SolutionRecord,
    TruncationError,
    impulse,
    integrate,
    l2_norm,
    make_grid,
)
from .kernel import apply_Gs, build_kernel_tensor, green_half_plane, kinetic_energy, riesz_coefficient
from .lamb import LambParams, first_zero_j1, lamb_field, lamb_stream, lamb_vorticity
from .solver import SolverConfig, solve_dipole
from .steiner import is_steiner, steiner_symmetrize

__all__ = [
    "ConfigurationError",
    "Field",
    "Grid",
    "LambParams",
    "Multipliers",
    "Params",
    "SolutionRecord",
    "SolverConfig",
    "TruncationError",
    "apply_Gs",
    "build_kernel_tensor",
    "check_admissible",
    "embed_periodic",
    "evolve",
    "first_zero_j1",
    "green_half_plane",
    "impulse",
    "integrate",
    "is_steiner",
    "kinetic_energy",
    "l2_norm",
    "lamb_field",
    "lamb_stream",
    "lamb_vorticity",
    "make_grid",
    "penalized_energy",
    "rescale",
    "riesz_coefficient",
    "run_stability",
    "shift_distance",
    "solve_dipole",
    "steiner_symmetrize",
    "turnover_time",
]
