"""Reference problems with known solutions."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import oracle1d
from .fields import Grid
from .scaling import ForcingMode
from .solver import ProblemSpec


@lru_cache(maxsize=4)
def log_oracle(x_seed: float = 1e-6, x_max: float = 0.5) -> oracle1d.OracleSolution1D:
    return oracle1d.shoot(x_seed, x_max, ForcingMode.LOGARITHMIC)


def classical_1d(h: float = 1 / 512) -> ProblemSpec:
    """``[-1, 1]`` with data of ``1/2 max(x, 0)^2``; the classical half-space solution."""
    grid = Grid.box([-1.0], [1.0], h)
    return ProblemSpec.from_function(
        grid, lambda x: 0.5 * np.maximum(x, 0.0) ** 2, mode=ForcingMode.CONSTANT, relax_omega=None
    )


def singular_1d(h: float = 1 / 1024) -> ProblemSpec:
    """``[0, 1/2]`` with the oracle profile as boundary data; free boundary at 0."""
    grid = Grid.box([0.0], [0.5], h)
    data = oracle1d.profile_field(log_oracle(), grid).values
    return ProblemSpec(grid, data, mode=ForcingMode.LOGARITHMIC, relax_omega=None)


def planar_2d(h: float = 1 / 512) -> ProblemSpec:
    """``[-1/2, 1/2]^2`` with data ``U(max(x1, 0))``, U the oracle profile; free boundary ``{x1 = 0}``."""
    grid = Grid.box([-0.5, -0.5], [0.5, 0.5], h)
    data = oracle1d.profile_field(log_oracle(), grid).values
    return ProblemSpec(grid, data, mode=ForcingMode.LOGARITHMIC, relax_omega=None)


PLANAR_CENTER = (0.0, 0.0)
