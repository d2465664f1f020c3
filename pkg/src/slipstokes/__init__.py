"""Generalized Stokes flow with perfect slip: potentials, geometry, oscillation seminorms and a staggered-grid solver."""

__version__ = "0.1.0"

from . import experiments, fields, geometry, orlicz, oscillation, properties, solver  # noqa: E402

__all__ = ["experiments", "fields", "geometry", "orlicz", "oscillation", "properties", "solver", "__version__"]
