"""Staggered-grid solver for the generalized Stokes system with perfect slip."""

from .core import (
    DiscreteState,
    Flat,
    IllPosedData,
    NonConvergence,
    Problem,
    SolveReport,
    SolverConfig,
    Transformed,
    energy,
    make_problem,
    problem_energy,
    solve,
    solve_linear_saddle,
    strain_arrays,
    weak_residual,
)
from .discretization import Forcing, MACGrid, build_operators

__all__ = [
    "DiscreteState",
    "Flat",
    "Forcing",
    "IllPosedData",
    "MACGrid",
    "NonConvergence",
    "Problem",
    "SolveReport",
    "SolverConfig",
    "Transformed",
    "build_operators",
    "energy",
    "make_problem",
    "problem_energy",
    "solve",
    "solve_linear_saddle",
    "strain_arrays",
    "weak_residual",
]
