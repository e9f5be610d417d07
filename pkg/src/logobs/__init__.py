"""Numerics for the obstacle problem -Lap u = log u on {u > 0}, u >= 0."""

from .fields import Grid, QuadratureConfig, ScalarField, read_field, write_field
from .scaling import ForcingMode
from .solver import ProblemSpec, SolveReport, solve, solve_nested
from .weiss import WeissConfig

__all__ = [
    "ForcingMode",
    "Grid",
    "ProblemSpec",
    "QuadratureConfig",
    "ScalarField",
    "SolveReport",
    "WeissConfig",
    "read_field",
    "solve",
    "solve_nested",
    "write_field",
]

__version__ = "0.1.0"
