"""Blow-up profiles, half-space fits and energy-decay exponents."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import BallOutsideDomain, NonPositiveEnergyGap, RadiusOutOfRange
from .fields import Grid, ScalarField, ball_rule, check_ball, sample_many, sphere_rule
from .scaling import ForcingMode, mu
from .weiss import (
    DEFAULT_CONFIG,
    Classification,
    WeissConfig,
    WeissScan,
    energy_density_classify,
    homogeneity_defect,
    omega_half,
    richardson_limit,
    wbar_scan,
)

UNIT_HALF_WIDTH = 1.2
UNIT_RESOLUTION = 257
NO_DECAY_SLOPE = 1e-3
COARSE_ANGLES = 64


def _normalisation(r: float, mode: ForcingMode) -> float:
    if not 0 < r < 1:
        raise RadiusOutOfRange("radius must lie in (0, 1)")
    return r * r if ForcingMode.parse(mode) is ForcingMode.CONSTANT else mu(r)


def rescale(
    u: ScalarField,
    x0,
    r: float,
    resolution: int | None = UNIT_RESOLUTION,
    mode: ForcingMode = ForcingMode.LOGARITHMIC,
    half_width: float = UNIT_HALF_WIDTH,
) -> ScalarField:
    """``u_r(x) = u(x0 + r x) / mu(r)`` on the grid ``[-half_width, half_width]^n``.

    With ``resolution=None`` the source grid is relabelled instead of
    resampled (spacing ``h/r``, origin ``(origin - x0)/r``), which is exact.
    """
    norm = _normalisation(r, mode)
    x0 = check_ball(u.grid, x0, r)
    g = u.grid
    if resolution is None:
        grid = Grid(g.dim, tuple((np.asarray(g.origin) - x0) / r), g.h / r, g.counts)
        return ScalarField(grid, u.values / norm)
    lo, hi = x0 - half_width * r, x0 + half_width * r
    if not (g.contains(lo) and g.contains(hi)):
        raise BallOutsideDomain("blow-up window leaves the field's domain")
    h = 2.0 * half_width / (resolution - 1)
    grid = Grid(g.dim, tuple([-half_width] * g.dim), h, tuple([resolution] * g.dim))
    pts = x0 + r * np.stack([c.reshape(-1) for c in grid.coords()], axis=-1)
    vals = sample_many(u, pts).reshape(grid.shape) / norm
    return ScalarField(grid, vals)


# -- half-space fit ----------------------------------------------------------


def trace_angles(n_theta: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n_theta) / n_theta


def _halfspace_trace(theta: np.ndarray, phi: float) -> np.ndarray:
    return 0.5 * np.maximum(np.cos(theta - phi), 0.0) ** 2


def halfspace_fit(trace) -> tuple[np.ndarray, float]:
    """Best ``nu`` and ``L^1(dB_1)`` distance from the trace to ``1/2 max(x.nu, 0)^2``.

    In 2D the trace is sampled at ``2 pi k / N``; a 64-angle scan is refined
    by golden section.  In 1D the trace holds the values at ``x = -1, 1``.
    """
    trace = np.asarray(trace, dtype=float)
    if not np.all(np.isfinite(trace)):
        raise ValueError("trace must be finite")
    if len(trace) == 2:
        cands = [np.array([-1.0]), np.array([1.0])]
        res = [float(np.abs(trace - 0.5 * np.maximum(np.array([-1.0, 1.0]) * c[0], 0.0) ** 2).sum()) for c in cands]
        k = int(np.argmin(res))
        return cands[k], res[k]
    n = len(trace)
    theta = trace_angles(n)
    w = 2.0 * np.pi / n

    def loss(phi: float) -> float:
        return w * float(np.abs(trace - _halfspace_trace(theta, phi)).sum())

    coarse = trace_angles(COARSE_ANGLES)
    vals = [loss(p) for p in coarse]
    k = int(np.argmin(vals))
    step = 2.0 * np.pi / COARSE_ANGLES
    best, best_val = float(coarse[k]), float(vals[k])
    res = minimize_scalar(loss, bounds=(best - step, best + step), method="bounded", options={"xatol": 1e-10})
    if res.fun < best_val:
        best, best_val = float(res.x), float(res.fun)
    best = math.remainder(best, 2.0 * math.pi)
    return np.array([math.cos(best), math.sin(best)]), best_val


# -- profiles ----------------------------------------------------------------


@dataclass(frozen=True)
class BlowupProfile:
    center: np.ndarray
    r: float
    trace: np.ndarray = field(repr=False)
    best_nu: np.ndarray
    fit_residual: float
    hdefect: float

    @property
    def angles(self) -> np.ndarray:
        if len(self.trace) == 2:
            return np.array([math.pi, 0.0])
        return trace_angles(len(self.trace))

    def csv_lines(self) -> list[str]:
        lines = ["theta,value"]
        for t, v in zip(self.angles, self.trace):
            lines.append(f"{format(float(t), '.17g')},{format(float(v), '.17g')}")
        return lines

    def to_csv(self, path) -> None:
        Path(path).write_text("\n".join(self.csv_lines()) + "\n")


def trace_on_sphere(u: ScalarField, x0, r: float, cfg: WeissConfig = DEFAULT_CONFIG) -> np.ndarray:
    """``u_r`` sampled on the unit sphere (2D: ``n_theta`` equispaced angles; 1D: ``x = -1, 1``)."""
    x0 = check_ball(u.grid, x0, r)
    norm = _normalisation(r, cfg.mode)
    if u.grid.dim == 1:
        pts = x0 + r * np.array([[-1.0], [1.0]])
    else:
        rule = sphere_rule(u.grid.dim, np.zeros(u.grid.dim), 1.0, cfg.quadrature)
        pts = x0 + r * rule.directions
    return sample_many(u, pts, cfg.quadrature.interp_order) / norm


def blowup_profile(u: ScalarField, x0, r: float, cfg: WeissConfig = DEFAULT_CONFIG) -> BlowupProfile:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    trace = trace_on_sphere(u, x0, r, cfg)
    nu, residual = halfspace_fit(trace)
    return BlowupProfile(x0, float(r), trace, nu, residual, homogeneity_defect(u, x0, r, cfg))


def trace_distance(a: BlowupProfile, b: BlowupProfile) -> float:
    """``L^1(dB_1)`` distance between two traces sampled at the same angles."""
    if len(a.trace) != len(b.trace):
        raise ValueError("traces sampled differently")
    w = 1.0 if len(a.trace) == 2 else 2.0 * math.pi / len(a.trace)
    return w * float(np.abs(a.trace - b.trace).sum())


def half_mass(u: ScalarField, x0, r: float, cfg: WeissConfig = DEFAULT_CONFIG) -> float:
    """``1/2 int_{B_1} u_r``; its limit is the energy density of the blow-up."""
    x0 = check_ball(u.grid, x0, r)
    norm = _normalisation(r, cfg.mode)
    rule = ball_rule(u.grid.dim, np.zeros(u.grid.dim), 1.0, cfg.quadrature)
    vals = sample_many(u, x0 + r * rule.points, cfg.quadrature.interp_order) / norm
    return 0.5 * rule.integrate(np.maximum(vals, 0.0))


def blowup_density(u: ScalarField, x0, radii: Sequence[float], cfg: WeissConfig = DEFAULT_CONFIG) -> float:
    """Richardson limit of :func:`half_mass` over the three smallest radii."""
    masses = [half_mass(u, x0, r, cfg) for r in radii]
    return richardson_limit(radii, masses, cfg.mode)


# -- decay -------------------------------------------------------------------


@dataclass
class DecayFit:
    radii: np.ndarray
    E: np.ndarray
    delta_hat: float
    eta_hat: float
    beta_hat: float
    beta_hat_alt: float
    trace_distances: np.ndarray
    trace_slope: float
    dim: int = 2
    no_decay: bool = False

    def to_dict(self) -> dict:
        return {
            "radii": [float(r) for r in self.radii],
            "E": [float(e) for e in self.E],
            "delta_hat": self.delta_hat,
            "eta_hat": self.eta_hat,
            "beta_hat": self.beta_hat,
            "beta_hat_alt": self.beta_hat_alt,
            "trace_distances": [float(d) for d in self.trace_distances],
            "trace_slope": self.trace_slope,
            "dim": self.dim,
            "no_decay": self.no_decay,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def exponents(delta: float, n: int) -> tuple[float, float, float]:
    """``eta = delta/(n+2+delta)`` and ``beta`` in both closed forms."""
    eta = delta / (n + 2 + delta)
    beta = delta / (2 + delta)
    beta_alt = (2 * eta + n * eta) / (2 + n * eta)
    return eta, beta, beta_alt


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def fit_energy_decay(
    radii: Sequence[float],
    E: Sequence[float],
    dim: int = 2,
    tol: float = 1e-12,
    trace_distances: Sequence[float] = (),
    trace_slope: float = math.nan,
) -> DecayFit:
    """Slope of ``log E`` against ``log r`` and the exponents it implies."""
    radii = np.asarray(radii, dtype=float)
    E = np.asarray(E, dtype=float)
    if len(radii) < 4 or radii.max() < 4 * radii.min() * (1 - 1e-12):
        raise ValueError("need at least 4 radii spanning a factor of 4")
    if np.any(E < -tol):
        raise NonPositiveEnergyGap(f"energy gap {E.min():.3e} below tolerance")
    keep = E > 0
    if keep.sum() < 2:
        raise NonPositiveEnergyGap("energy gap vanishes at all radii")
    delta = _loglog_slope(radii[keep], E[keep])
    no_decay = delta < NO_DECAY_SLOPE
    eta, beta, beta_alt = exponents(max(delta, 0.0) if no_decay else delta, dim)
    return DecayFit(
        radii, E, delta, eta, beta, beta_alt, np.asarray(trace_distances, dtype=float), trace_slope, dim, no_decay
    )


def decay_fit(scan: WeissScan, profiles: Sequence[BlowupProfile], wbar_limit: float | None = None) -> DecayFit:
    """Fit ``E(r) = Wbar(r) - Wbar(0+)`` and the trace convergence rate.

    ``trace_distances`` are measured to the smallest-radius trace; the trace
    slope is fitted to the distances between successive profiles.
    """
    limit = scan.Wbar_limit_estimate if wbar_limit is None else wbar_limit
    E = np.asarray(scan.Wbar) - limit
    dim = len(scan.center)
    profs = sorted(profiles, key=lambda p: -p.r)
    dist = np.array([trace_distance(p, profs[-1]) for p in profs]) if profs else np.zeros(0)
    slope = math.nan
    if len(profs) >= 3:
        steps = np.array([trace_distance(a, b) for a, b in zip(profs, profs[1:])])
        rs = np.array([p.r for p in profs[:-1]])
        if np.all(steps > 0):
            slope = _loglog_slope(rs, steps)
    scale = max(1.0, float(np.max(np.abs(scan.Wbar))))
    return fit_energy_decay(scan.radii, E, dim, tol=1e-3 * scale, trace_distances=dist, trace_slope=slope)


# -- classification ----------------------------------------------------------


DYADIC_RADII = (0.2, 0.1, 0.05, 0.025)


@dataclass
class PointAnalysis:
    scan: WeissScan
    profiles: list[BlowupProfile]
    density_estimate: float
    classification: Classification
    flagged: bool
    decay: DecayFit | None = None

    def summary(self) -> dict:
        out = {
            "center": [float(c) for c in self.scan.center],
            "Wbar_limit_estimate": self.scan.Wbar_limit_estimate,
            "blowup_density_estimate": self.density_estimate,
            "omega_half": omega_half(len(self.scan.center)),
            "classification": self.classification.value,
            "flagged": self.flagged,
        }
        if self.decay is not None:
            out["decay"] = self.decay.to_dict()
        return out


def analyze_point(
    u: ScalarField,
    x0,
    radii: Sequence[float] = DYADIC_RADII,
    cfg: WeissConfig = DEFAULT_CONFIG,
    tol: float | None = None,
) -> PointAnalysis:
    """Energy scan, blow-up profiles and classification at one free-boundary point.

    The energy limit is classified against ``omega_n/2`` with tolerance
    ``tol`` (default 10% of it) and cross-checked against the blow-up
    density; a disagreement above 10% flags the result.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    radii = np.asarray(sorted(radii, reverse=True), dtype=float)
    n = u.grid.dim
    scan = wbar_scan(u, x0, radii, cfg)
    profiles = [blowup_profile(u, x0, r, cfg) for r in radii]
    density = blowup_density(u, x0, radii, cfg) if len(radii) >= 3 else half_mass(u, x0, radii[-1], cfg)
    limit = scan.Wbar_limit_estimate
    tol = 0.1 * omega_half(n) if tol is None else tol
    label = energy_density_classify(limit, n, tol)
    ref = max(abs(limit), abs(density), 1e-300)
    flagged = abs(limit - density) > 0.1 * ref
    decay = None
    if len(radii) >= 4 and radii[0] >= 4 * radii[-1] * (1 - 1e-12):
        try:
            decay = decay_fit(scan, profiles)
        except NonPositiveEnergyGap:
            decay = None
    return PointAnalysis(scan, profiles, density, label, flagged, decay)
