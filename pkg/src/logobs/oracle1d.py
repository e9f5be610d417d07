"""One-dimensional ground truth for ``u'' = -log u`` with ``u(0) = u'(0) = 0``.

The singular start is bridged with an asymptotic seed.  Writing
``L = log(1/x)`` and ``u = x^2 A(L)``, the equation becomes
``2A - 3A' + A'' = 2L - log A``; matching orders gives

    A(L) = L - (1/2) log L + 3/2 + ((1/4) log L - 3/2) / L + ...

From the seed the profile is integrated with an adaptive Dormand-Prince
4(5) scheme and certified by an independent residual check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import BlowThrough, OutOfDomain, SeedTooLarge
from .fields import Grid, ScalarField
from .scaling import ForcingMode

SEED_TOLERANCE = 1e-4
SAMPLE_RATIO = 1.01


def seed_coefficients(L, terms: int = 4):
    """``A(L)``, ``A'(L)`` and ``A''(L)`` of the seed expansion truncated to ``terms`` terms (3 or 4)."""
    L = np.asarray(L, dtype=float)
    lL = np.log(L)
    A = L - 0.5 * lL + 1.5
    A1 = 1.0 - 0.5 / L
    A2 = 0.5 / L**2
    if terms == 4:
        A = A + (0.25 * lL - 1.5) / L
        A1 = A1 + (1.75 - 0.25 * lL) / L**2
        A2 = A2 + (0.5 * lL - 3.75) / L**3
    elif terms != 3:
        raise ValueError("terms must be 3 or 4")
    return A, A1, A2


def seed(x, terms: int = 4):
    """Asymptotic ``(u, u')`` near the free boundary at ``0``."""
    x = np.asarray(x, dtype=float)
    L = -np.log(x)
    A, A1, _ = seed_coefficients(L, terms)
    return x * x * A, x * (2.0 * A - A1)


def seed_residual(x, terms: int = 4):
    """``u'' + log u`` of the truncated expansion, evaluated in closed form."""
    x = np.asarray(x, dtype=float)
    L = -np.log(x)
    A, A1, A2 = seed_coefficients(L, terms)
    return 2.0 * A - 3.0 * A1 + A2 - 2.0 * L + np.log(A)


@dataclass(frozen=True)
class OracleSolution1D:
    x_seed: float
    x: np.ndarray
    u: np.ndarray
    du: np.ndarray
    mode: ForcingMode
    residual_max: float
    terms: int = 4

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    def csv_lines(self) -> list[str]:
        lines = ["x,u,du"]
        for a, b, c in zip(self.x, self.u, self.du):
            lines.append(f"{format(a, '.17g')},{format(b, '.17g')},{format(c, '.17g')}")
        return lines

    def to_csv(self, path) -> None:
        Path(path).write_text("\n".join(self.csv_lines()) + "\n")


def _sample_grid(x_seed: float, x_max: float) -> np.ndarray:
    n = int(math.floor(math.log(x_max / x_seed) / math.log(SAMPLE_RATIO)))
    xs = x_seed * SAMPLE_RATIO ** np.arange(n + 1)
    xs = xs[xs < x_max * (1 - 1e-12)]
    return np.append(xs, x_max)


def _second_derivative(x: np.ndarray, du: np.ndarray, width: int = 5) -> np.ndarray:
    """``u''`` from local degree-4 polynomial fits to ``u'`` (independent of the integrator)."""
    n = len(x)
    out = np.empty(n)
    half = width // 2
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        xs = x[lo : lo + width]
        scale = xs[-1] - xs[0]
        t = (xs - x[i]) / scale
        coef = np.polyfit(t, du[lo : lo + width], width - 1)
        out[i] = coef[-2] / scale
    return out


def shoot(
    x_seed: float = 1e-6,
    x_max: float = 0.5,
    mode: ForcingMode = ForcingMode.LOGARITHMIC,
    terms: int = 4,
    rtol: float = 1e-12,
) -> OracleSolution1D:
    """Integrate the one-sided profile from ``x_seed`` to ``x_max``."""
    mode = ForcingMode.parse(mode)
    if not 0 < x_seed < x_max:
        raise ValueError("need 0 < x_seed < x_max")
    xs = _sample_grid(x_seed, x_max)
    if mode is ForcingMode.CONSTANT:
        return OracleSolution1D(x_seed, xs, 0.5 * xs * xs, xs.copy(), mode, 0.0, terms)

    scaled = x_seed**2 * abs(float(seed_residual(x_seed, terms)))
    if scaled > SEED_TOLERANCE:
        raise SeedTooLarge(f"seed expansion residual {scaled:.3e} at x_seed={x_seed:g} exceeds {SEED_TOLERANCE:g}")
    u0, du0 = seed(x_seed, terms)

    def rhs(_x, y):
        return [y[1], -math.log(y[0])]

    def hits_one(_x, y):
        return y[0] - 1.0

    hits_one.terminal = True
    sol = solve_ivp(
        rhs,
        (x_seed, x_max),
        [float(u0), float(du0)],
        method="RK45",
        t_eval=xs,
        events=hits_one,
        rtol=rtol,
        atol=1e-22,
    )
    if sol.status == 1 or sol.t[-1] < x_max * (1 - 1e-12):
        raise BlowThrough(f"profile reaches u = 1 before x_max = {x_max:g}")
    if not sol.success:
        raise BlowThrough(sol.message)
    u, du = sol.y
    d2u = _second_derivative(xs, du)
    residual = float(np.max(np.abs(d2u + np.log(u))))
    return OracleSolution1D(x_seed, xs, u, du, mode, residual, terms)


def interpolate(sol: OracleSolution1D, x):
    """``(u, u')`` at ``x`` in ``[0, x_max]``; cubic Hermite between samples, the seed expansion below ``x_seed``."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > sol.x_max * (1 + 1e-12)):
        raise OutOfDomain("x outside [0, x_max]")
    xa = np.minimum(xa, sol.x_max)
    u = np.zeros_like(xa)
    du = np.zeros_like(xa)
    inside = xa >= sol.x_seed
    if np.any(inside):
        spline = _hermite(sol)
        u[inside] = spline(xa[inside])
        du[inside] = spline(xa[inside], 1)
    below = (~inside) & (xa > 0)
    if np.any(below):
        if sol.mode is ForcingMode.CONSTANT:
            u[below] = 0.5 * xa[below] ** 2
            du[below] = xa[below]
        else:
            u[below], du[below] = seed(xa[below], sol.terms)
    if np.ndim(x) == 0:
        return float(u), float(du)
    return u, du


def _hermite(sol: OracleSolution1D) -> CubicHermiteSpline:
    return CubicHermiteSpline(sol.x, sol.u, sol.du)


def profile_field(sol: OracleSolution1D, grid: Grid, shift: float = 0.0) -> ScalarField:
    """Field ``U(max(x1 - shift, 0))`` on a 1D or 2D grid (constant along x2)."""
    x1 = grid.coords()[0] - shift
    if np.max(x1) > sol.x_max * (1 + 1e-12):
        raise OutOfDomain("grid extends beyond the oracle range")
    u, _ = interpolate(sol, np.clip(x1, 0.0, sol.x_max))
    return ScalarField(grid, u)
