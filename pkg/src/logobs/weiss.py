"""Weiss-type energies with the variable parameter alpha(r).

All quantities are evaluated in blow-up coordinates: for a centre ``x0``
and radius ``r`` the polar rule on the unit ball is mapped to the physical
points ``x0 + r x`` and the field enters through

    u_r(x) = u(x0 + r x) / mu(r),      grad u_r(x) = r grad u(x0 + r x) / mu(r).

With ``s = 1/(1 - 2 log r)`` the derivative of the energy splits as
``dW/dr = K + Q`` where ``K >= 0`` is a perfect square on the unit sphere
and ``Q`` collects the terms produced by the r-dependence of alpha and G.
In constant-forcing mode the classical quantities are used instead
(``mu = r^2``, ``alpha = 1``, ``G(r; v) = v``, hence ``Q = 0``).
"""

from __future__ import annotations

import enum
import json
import math
from functools import lru_cache
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainTooSmall, RadiusOutOfRange
from .fields import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    Rule,
    ScalarField,
    ball_rule,
    check_ball,
    sample_fields,
    sample_many,
    sphere_rule,
)
from .scaling import (
    ForcingMode,
    G_integrand,
    G_radial_derivative,
    alpha,
    dalpha,
    mu,
    qbar_shift,
    qbar_shift_integral,
    scaling_parameter,
)


@dataclass(frozen=True)
class WeissConfig:
    gamma: float = 0.5
    quadrature: QuadratureConfig = DEFAULT_QUADRATURE
    fd_step: float = 1e-3
    mode: ForcingMode = ForcingMode.LOGARITHMIC

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        object.__setattr__(self, "mode", ForcingMode.parse(self.mode))


DEFAULT_CONFIG = WeissConfig()


def omega_half(n: int) -> float:
    """Energy density of half-space solutions: ``H^{n-1}(dB_1) / (8 n (n+2))``."""
    area = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}[n]
    return area / (8.0 * n * (n + 2))


# -- per-radius evaluation ---------------------------------------------------


def _mode_scalars(r: float, mode: ForcingMode) -> tuple[float, float]:
    """(normalisation, alpha) for the forcing mode."""
    if not 0 < r < 1:
        raise RadiusOutOfRange("radius must lie in (0, 1)")
    if mode is ForcingMode.CONSTANT:
        return r * r, 1.0
    return mu(r), alpha(r)


def _potential(r: float, v: np.ndarray, mode: ForcingMode) -> np.ndarray:
    return v if mode is ForcingMode.CONSTANT else G_integrand(r, v)


@dataclass(frozen=True)
class _Rescaled:
    """Samples of u_r and grad u_r on a unit-ball or unit-sphere rule."""

    rule: Rule
    v: np.ndarray
    grad: np.ndarray

    @property
    def radial(self) -> np.ndarray:
        # grad u_r(x) . x, with x = rho * direction on the unit ball
        return np.sum(self.grad * self.rule.directions, axis=1) * self.rule.radii


def _rescaled(u: ScalarField, x0: np.ndarray, r: float, unit_rule: Rule, order: int, mode: ForcingMode) -> _Rescaled:
    norm, _ = _mode_scalars(r, mode)
    pts = x0 + r * unit_rule.points
    v, *parts = sample_fields([u, *u.gradient], pts, order)
    v = np.maximum(v, 0.0) / norm
    grad = np.stack(parts, axis=-1) * (r / norm)
    return _Rescaled(unit_rule, v, grad)


@lru_cache(maxsize=8)
def _unit_rules(dim: int, q: QuadratureConfig) -> tuple[Rule, Rule]:
    zero = np.zeros(dim)
    return ball_rule(dim, zero, 1.0, q), sphere_rule(dim, zero, 1.0, q)


@dataclass(frozen=True)
class WeissRecord:
    r: float
    W: float
    K: float
    Q: float
    Qbar: float
    Phi: float
    hdefect: float
    ball_energy: float
    sphere_mass: float


def _evaluate(u: ScalarField, x0, r: float, cfg: WeissConfig) -> WeissRecord:
    mode = cfg.mode
    x0 = check_ball(u.grid, x0, r)
    _, a = _mode_scalars(r, mode)
    n = u.grid.dim
    q = cfg.quadrature
    ball, sphere = _unit_rules(n, q)
    B = _rescaled(u, x0, r, ball, q.interp_order, mode)
    S = _rescaled(u, x0, r, sphere, q.interp_order, mode)

    grad_sq = 0.5 * np.sum(B.grad**2, axis=1)
    ball_energy = ball.integrate(grad_sq + _potential(r, B.v, mode))
    sphere_sq = sphere.integrate(S.v**2)
    W = a * ball_energy - sphere_sq

    defect = S.radial - (2.0 / a) * S.v
    hdefect = sphere.integrate(defect**2)
    K = a / r * hdefect

    if mode is ForcingMode.CONSTANT:
        Q = 0.0
        Qbar = 0.0
        coef = 1.0 / (2.0 * (n + 2))
    else:
        Q = dalpha(r) * ball_energy + a * ball.integrate(G_radial_derivative(r, B.v))
        Qbar = Q - qbar_shift(r, cfg.gamma)
        lr = math.log(r)
        coef = 2.0 * a * lr / ((4.0 * lr - 1.0) * (n + 2))
    Phi = W - coef * sphere.integrate(S.v)
    return WeissRecord(r, W, K, Q, Qbar, Phi, hdefect, ball_energy, sphere_sq)


def weiss_energy(u: ScalarField, x0, r: float, cfg: WeissConfig = DEFAULT_CONFIG) -> float:
    """``W = alpha/(r^{n+2}(1-2 log r)^2) J_0(u; B_r) - 1/(r^{n+3}(1-2 log r)^2) int_{dB_r} u^2``."""
    return _evaluate(u, x0, r, cfg).W


def K_term(u: ScalarField, x0, r: float, cfg: WeissConfig = DEFAULT_CONFIG) -> float:
    """``(alpha/r) int_{dB_1} (grad u_r . x - (2/alpha) u_r)^2``."""
    return _evaluate(u, x0, r, cfg).K


def Q_term(u: ScalarField, x0, r: float, cfg: WeissConfig = DEFAULT_CONFIG) -> float:
    """Non-square part of ``dW/dr``, from the closed-form radial derivatives of alpha and G."""
    return _evaluate(u, x0, r, cfg).Q


def Q_term_derivation(u: ScalarField, x0, r: float, cfg: WeissConfig = DEFAULT_CONFIG) -> float:
    """``alpha'(r) I + alpha(r) int G_1`` with both r-derivatives taken by central differences.

    Independent of the closed forms used by :func:`Q_term`.
    """
    if cfg.mode is ForcingMode.CONSTANT:
        return 0.0
    x0 = check_ball(u.grid, x0, r)
    q = cfg.quadrature
    ball, _ = _unit_rules(u.grid.dim, q)
    B = _rescaled(u, x0, r, ball, q.interp_order, cfg.mode)
    d = 1e-5 * r
    da = (alpha(r + d) - alpha(r - d)) / (2 * d)
    dG = (G_integrand(r + d, B.v) - G_integrand(r - d, B.v)) / (2 * d)
    energy = ball.integrate(0.5 * np.sum(B.grad**2, axis=1) + G_integrand(r, B.v))
    return da * energy + alpha(r) * ball.integrate(dG)


def Qbar_term(u: ScalarField, x0, r: float, cfg: WeissConfig = DEFAULT_CONFIG) -> float:
    """``Q - 1/(r (1-2 log r)^{1+gamma})``."""
    return _evaluate(u, x0, r, cfg).Qbar


def phi_diagnostic(u: ScalarField, x0, r: float, cfg: WeissConfig = DEFAULT_CONFIG) -> float:
    """``W - 2 alpha log r / ((4 log r - 1)(n+2)) int_{dB_1} u_r``."""
    return _evaluate(u, x0, r, cfg).Phi


def homogeneity_defect(u: ScalarField, x0, r: float, cfg: WeissConfig = DEFAULT_CONFIG) -> float:
    """``int_{dB_1} (grad u_r . x - (2/alpha) u_r)^2``; vanishes for the matching homogeneous profile."""
    x0 = check_ball(u.grid, x0, r)
    _, a = _mode_scalars(r, cfg.mode)
    q = cfg.quadrature
    _, sphere = _unit_rules(u.grid.dim, q)
    S = _rescaled(u, x0, r, sphere, q.interp_order, cfg.mode)
    return sphere.integrate((S.radial - (2.0 / a) * S.v) ** 2)


def weiss_derivative_fd(u: ScalarField, x0, r: float, cfg: WeissConfig = DEFAULT_CONFIG) -> float:
    """Central difference of W in r with step ``fd_step * r``."""
    d = cfg.fd_step * r
    return (weiss_energy(u, x0, r + d, cfg) - weiss_energy(u, x0, r - d, cfg)) / (2 * d)


# -- energies of profiles on the unit ball -----------------------------------


def _unit_ball_check(v: ScalarField) -> None:
    try:
        check_ball(v.grid, np.zeros(v.grid.dim), 1.0)
    except Exception as exc:
        raise DomainTooSmall("field grid does not cover the unit ball") from exc


def M_energy(r: float, v: ScalarField, q: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """``alpha(r) int_{B_1} 1/2|grad v|^2 + G(r; v) - int_{dB_1} v^2``."""
    _unit_ball_check(v)
    if not 0 < r < 1:
        raise RadiusOutOfRange("radius must lie in (0, 1)")
    ball, sphere = _unit_rules(v.grid.dim, q)
    vb, *parts = sample_fields([v, *v.gradient], ball.points, q.interp_order)
    vb = np.maximum(vb, 0.0)
    gb = np.stack(parts, axis=-1)
    vs = sample_many(v, sphere.points, q.interp_order)
    return alpha(r) * ball.integrate(0.5 * np.sum(gb**2, axis=1) + G_integrand(r, vb)) - sphere.integrate(vs**2)


def M0_energy(v: ScalarField, q: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Balance energy ``int_{B_1} 1/2|grad v|^2 + v - int_{dB_1} v^2``."""
    _unit_ball_check(v)
    ball, sphere = _unit_rules(v.grid.dim, q)
    vb, *parts = sample_fields([v, *v.gradient], ball.points, q.interp_order)
    gb = np.stack(parts, axis=-1)
    vs = sample_many(v, sphere.points, q.interp_order)
    return ball.integrate(0.5 * np.sum(gb**2, axis=1) + vb) - sphere.integrate(vs**2)


# -- scans -------------------------------------------------------------------


class Classification(str, enum.Enum):
    REGULAR = "REGULAR"
    NOT_REGULAR = "NOT-REGULAR"


def energy_density_classify(wbar_limit: float, n: int, tol: float = 0.01) -> Classification:
    """Regular iff the limit energy is within ``tol`` of ``omega_n / 2``."""
    if not math.isfinite(wbar_limit):
        raise ValueError("energy limit must be finite")
    if abs(wbar_limit - omega_half(n)) <= tol:
        return Classification.REGULAR
    return Classification.NOT_REGULAR


def extrapolation_variable(r, mode: ForcingMode = ForcingMode.LOGARITHMIC):
    """Small parameter in which blow-up quantities are expanded: ``1/(1-2 log r)``, or ``r`` classically."""
    if ForcingMode.parse(mode) is ForcingMode.CONSTANT:
        return np.asarray(r, dtype=float)
    return np.asarray(scaling_parameter(r), dtype=float)


def richardson_limit(radii: Sequence[float], values: Sequence[float], mode: ForcingMode = ForcingMode.LOGARITHMIC) -> float:
    """Value at 0 of the polynomial through the three smallest-radius samples in the extrapolation variable."""
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(radii) < 3:
        raise ValueError("need at least three radii")
    idx = np.argsort(radii, kind="stable")[:3]
    s = extrapolation_variable(radii[idx], mode)
    # Neville evaluation at s = 0
    p = list(values[idx])
    for k in range(1, 3):
        for i in range(3 - k):
            p[i] = (s[i + k] * p[i] - s[i] * p[i + 1]) / (s[i + k] - s[i])
    return float(p[0])


@dataclass
class WeissScan:
    center: np.ndarray
    radii: np.ndarray
    records: list[WeissRecord]
    Wbar: np.ndarray
    Wbar_limit_estimate: float
    q_integral: np.ndarray = field(repr=False)
    q_tail_bound: float = 0.0
    gamma: float = 0.5
    mode: ForcingMode = ForcingMode.LOGARITHMIC

    COLUMNS = ("r", "W", "K", "Q", "Qbar", "Wbar", "Phi", "hdefect")

    def column(self, name: str) -> np.ndarray:
        if name == "Wbar":
            return np.asarray(self.Wbar)
        if name == "r":
            return np.asarray(self.radii)
        return np.array([getattr(rec, name) for rec in self.records])

    def csv_lines(self) -> list[str]:
        cols = [self.column(c) for c in self.COLUMNS]
        lines = [",".join(self.COLUMNS)]
        for row in zip(*cols):
            lines.append(",".join(format(float(v), ".17g") for v in row))
        return lines

    def to_csv(self, path) -> None:
        Path(path).write_text("\n".join(self.csv_lines()) + "\n")

    def to_dict(self) -> dict:
        return {
            "center": [float(c) for c in self.center],
            "mode": self.mode.value,
            "gamma": self.gamma,
            "Wbar_limit_estimate": self.Wbar_limit_estimate,
            "q_tail_bound": self.q_tail_bound,
            "records": [{c: float(self.column(c)[i]) for c in self.COLUMNS} for i in range(len(self.radii))],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _q_tail_bound(radii: np.ndarray, q_values: np.ndarray) -> float:
    """Bound on ``int_0^{r_min} |Q|`` from ``|Q| <= C log(-log r)/(r log^2 r)``, C fitted on the scan."""
    lr = np.log(radii)
    shape = np.log(-lr) / (radii * lr**2)
    ok = shape > 0
    if not np.any(ok):
        return math.inf
    C = float(np.max(np.abs(q_values[ok]) / shape[ok]))
    L = -math.log(float(np.min(radii)))
    # int_0^{r} log(-log s)/(s log^2 s) ds = (log L + 1)/L with L = -log r
    return C * (math.log(L) + 1.0) / L


def wbar_scan(
    u: ScalarField,
    x0,
    radii: Sequence[float],
    cfg: WeissConfig = DEFAULT_CONFIG,
    gl_nodes: int = 4,
) -> WeissScan:
    """Corrected energy ``Wbar(r) = W(r) - int_0^r Qbar`` over a decreasing list of radii.

    ``int_0^r Q`` is integrated by composite Gauss-Legendre on ``[r_min, r]``;
    below ``r_min`` it is taken as 0 and bounded by ``q_tail_bound``.  The
    subtracted term of ``Qbar`` is integrated in closed form on ``(0, r]``.

    ``Wbar_limit_estimate``: ``Wbar(0+) = W(0+)`` because both parts of
    ``int_0^r Qbar`` vanish as ``r -> 0``, so the estimate is the Richardson
    extrapolation of ``W`` over the three smallest radii in the variable
    ``1/(1-2 log r)``.
    """
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 1 or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be strictly decreasing")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    records = [_evaluate(u, x0, r, cfg) for r in radii]
    Wv = np.array([rec.W for rec in records])
    logmode = cfg.mode is ForcingMode.LOGARITHMIC

    # cumulative int_{r_min}^{r} Q ds, built from the small end
    qint = np.zeros(len(radii))
    if logmode and len(radii) > 1:
        gx, gw = np.polynomial.legendre.leggauss(gl_nodes)
        acc = 0.0
        for k in range(len(radii) - 2, -1, -1):
            a, b = radii[k + 1], radii[k]
            nodes = 0.5 * (b - a) * gx + 0.5 * (a + b)
            vals = [_evaluate(u, x0, s, cfg).Q for s in nodes]
            acc += 0.5 * (b - a) * float(np.dot(gw, vals))
            qint[k] = acc
    if logmode:
        shift = np.array([qbar_shift_integral(r, cfg.gamma) for r in radii])
        Wbar = Wv - qint + shift
        tail = _q_tail_bound(radii, np.array([rec.Q for rec in records]))
    else:
        Wbar = Wv.copy()
        tail = 0.0
    limit = richardson_limit(radii, Wv, cfg.mode) if len(radii) >= 3 else float(Wv[-1])
    return WeissScan(x0, radii, records, Wbar, limit, qint, tail, cfg.gamma, cfg.mode)
