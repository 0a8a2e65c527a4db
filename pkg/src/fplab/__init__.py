"""Numerical laboratory for a nonlinear consensus Fokker-Planck equation.

The model evolves a density f(w, t) on [-1, 1] under the conservative law

    df/dt = d/dw [ w f (1 + beta H^alpha f^alpha) + lambda d/dw (H f) ],

with degenerate diffusion H(w) = 1 - w^2 and no-flux boundaries.  Subpackages
cover the finite-volume solver, the zero-flux steady family and its critical
mass, moment diagnostics and a-priori bounds, the closed-form finite-time
blow-up apparatus, and a verification lab for the weighted Nash /
Gagliardo-Nirenberg / Poincare inequalities behind the regularity theory.
"""

from .grid import (
    DensityState,
    Grid,
    GridFunction,
    WeightSpec,
    make_grid,
    project_density,
    quadrature,
    sample,
)
from .report import InequalityReport
from .solver import (
    ModelParams,
    SolverControls,
    Trajectory,
    TrajectoryEvent,
    evolve,
    face_fluxes,
    rescale_params,
    stable_dt,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "DensityState",
    "Grid",
    "GridFunction",
    "InequalityReport",
    "ModelParams",
    "SolverControls",
    "Trajectory",
    "TrajectoryEvent",
    "WeightSpec",
    "evolve",
    "face_fluxes",
    "make_grid",
    "project_density",
    "quadrature",
    "rescale_params",
    "sample",
    "stable_dt",
    "step",
]
