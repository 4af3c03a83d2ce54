"""Mean exit times of planar diffusions stirred by divergence-free flows."""

from .elliptic import SolveOptions, lp_norm, solve_exit_time, solve_poisson
from .grid import DomainSpec, ScalarField, VectorField, build_domain, perp_gradient

__version__ = "0.1.0"

__all__ = [
    "DomainSpec",
    "ScalarField",
    "SolveOptions",
    "VectorField",
    "build_domain",
    "lp_norm",
    "perp_gradient",
    "solve_exit_time",
    "solve_poisson",
]
