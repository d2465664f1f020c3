"""Sharpness examples and stability studies."""

from .corner import (
    CornerSequence,
    blowup_exponent,
    boundary_samples,
    corner_exact,
    corner_gradient,
    corner_sequence,
    corner_velocity,
    lq_norm_corner,
    lq_norm_exact,
    lq_threshold,
)
from .fitting import FitResult, fit_exponent, trend_slope
from .manufactured import (
    constant_strain_gradient,
    constant_strain_velocity,
    cubic_stream_forcing,
    cubic_stream_gradient,
    cubic_stream_velocity,
    fd_gradient,
    slip_defects,
)
from .runner import ExperimentSpec, Kind, run_experiment, run_many
from .studies import (
    StudyResult,
    bmo_stability,
    forcing_family,
    holder_exponent,
    holder_scaling,
    homogeneity_check,
    overline_bmo_star,
    reflection_experiment,
)
from .tilted import MeshQualityError, solve_tilted, tilted_sharpness

__all__ = [
    "CornerSequence",
    "ExperimentSpec",
    "FitResult",
    "Kind",
    "MeshQualityError",
    "StudyResult",
    "blowup_exponent",
    "bmo_stability",
    "boundary_samples",
    "constant_strain_gradient",
    "constant_strain_velocity",
    "corner_exact",
    "corner_gradient",
    "corner_sequence",
    "corner_velocity",
    "cubic_stream_forcing",
    "cubic_stream_gradient",
    "cubic_stream_velocity",
    "fd_gradient",
    "fit_exponent",
    "forcing_family",
    "holder_exponent",
    "holder_scaling",
    "homogeneity_check",
    "lq_norm_corner",
    "lq_norm_exact",
    "lq_threshold",
    "overline_bmo_star",
    "reflection_experiment",
    "run_experiment",
    "run_many",
    "slip_defects",
    "solve_tilted",
    "tilted_sharpness",
    "trend_slope",
]
