"""Projected over-relaxation for the discrete obstacle energy.

The discrete energy is

    E_eps(u) = sum over edges  (1/2) ((u_i - u_j)/h)^2 * cell measure
             + sum over nodes  trapezoid weight * F_eps(u_i) * h^dim

with ``F_eps(v) = (v+eps)(1 - log(v+eps)) - eps(1 - log eps)``.  One nodal
update minimises the energy with ``F_eps`` replaced by its tangent line at
the current value (the forcing ``-log(u+eps)`` lagged one step), relaxed by
``omega`` and projected onto ``u >= 0``.  ``F_eps`` is concave, so the
tangent line majorises it and every update is an energy descent step.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .errors import BoundaryMismatch, DivergingEnergy, EmptyFreeBoundary, NegativeField, NonConvergence
from .fields import Grid, ScalarField, resample
from .freeboundary import FreeBoundarySet, pos_threshold
from .scaling import ForcingMode

DEFAULT_EPSILONS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)


def optimal_omega(grid: Grid) -> float:
    """Over-relaxation factor that is optimal for the Laplacian on the grid box."""
    n = max(grid.counts) - 1
    return 2.0 / (1.0 + math.sin(math.pi / n))


@dataclass
class ProblemSpec:
    """Obstacle problem on a grid.

    ``boundary`` is an array of the grid's shape; only its boundary nodes
    are read.  ``relax_omega=None`` selects :func:`optimal_omega`.
    """

    grid: Grid
    boundary: np.ndarray
    mode: ForcingMode = ForcingMode.LOGARITHMIC
    epsilons: Sequence[float] = DEFAULT_EPSILONS
    relax_omega: float | None = 1.7
    tol: float = 1e-10
    max_sweeps: int = 200_000
    initial: np.ndarray | None = None
    energy_check_every: int = 1

    def __post_init__(self):
        self.mode = ForcingMode.parse(self.mode)
        b = np.array(self.boundary, dtype=float)
        if b.shape != self.grid.shape:
            b = np.broadcast_to(b, self.grid.shape).copy()
        mask = self.grid.boundary_mask()
        if np.any(b[mask] < 0) or not np.all(np.isfinite(b[mask])):
            raise ValueError("boundary data must be finite and non-negative")
        b[~mask] = 0.0
        self.boundary = b
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or any(e <= 0 for e in eps) or any(a <= b_ for a, b_ in zip(eps, eps[1:])):
            raise ValueError("epsilons must be a strictly decreasing positive schedule")
        self.epsilons = eps
        if self.relax_omega is not None and not 0 < self.relax_omega < 2:
            raise ValueError("relax_omega must lie in (0, 2)")
        if self.tol <= 0 or self.max_sweeps < 1 or self.energy_check_every < 1:
            raise ValueError("tol, max_sweeps and energy_check_every must be positive")
        if self.mode is ForcingMode.LOGARITHMIC and b[mask].max(initial=0.0) >= 1.0:
            warnings.warn("boundary data reaches 1: the forcing -log u changes sign", stacklevel=2)

    @classmethod
    def from_function(cls, grid: Grid, phi: Callable[..., np.ndarray], **kw) -> "ProblemSpec":
        vals = np.broadcast_to(np.asarray(phi(*grid.coords()), dtype=float), grid.shape)
        return cls(grid, vals, **kw)

    @property
    def eps_final(self) -> float:
        return self.epsilons[-1]

    @property
    def omega(self) -> float:
        return optimal_omega(self.grid) if self.relax_omega is None else float(self.relax_omega)

    def boundary_field(self) -> ScalarField:
        return ScalarField(self.grid, self.boundary)


@dataclass
class SolveReport:
    final_energy: float
    sweeps_used: int
    residual: float
    kkt_violation: float
    epsilon_trace: list[tuple[float, float]] = field(default_factory=list)
    max_energy_increase: float = 0.0
    converged: bool = True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilon_trace"] = [list(p) for p in self.epsilon_trace]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_keyvalue(self) -> str:
        lines = []
        for k, v in self.to_dict().items():
            if k == "epsilon_trace":
                v = ";".join(f"{e!r}:{en!r}" for e, en in v)
            lines.append(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}")
        return "\n".join(lines) + "\n"


# -- energy -----------------------------------------------------------------


def F_eps(v: np.ndarray, eps: float, mode: ForcingMode) -> np.ndarray:
    if mode is ForcingMode.CONSTANT:
        return np.asarray(v, dtype=float)
    v = np.asarray(v, dtype=float)
    if eps > 0:
        w = v + eps
        return w * (1.0 - np.log(w)) - eps * (1.0 - math.log(eps))
    safe = np.where(v > 1e-300, v, 1.0)
    return np.where(v > 1e-300, safe * (1.0 - np.log(safe)), 0.0)


def _energy(vals: np.ndarray, grid: Grid, mode: ForcingMode, eps: float, wtrap: np.ndarray) -> float:
    h = grid.h
    cell = h**grid.dim
    total = 0.0
    for k in range(grid.dim):
        d = np.diff(vals, axis=k) / h
        sq = d * d
        # trapezoid weights in the transverse directions
        for m in range(grid.dim):
            if m == k:
                continue
            shape = [1] * grid.dim
            shape[m] = -1
            wt = np.ones(grid.counts[m])
            wt[0] = wt[-1] = 0.5
            sq = sq * wt.reshape(shape)
        total += 0.5 * float(sq.sum()) * cell
    total += float(np.sum(wtrap * F_eps(vals, eps, mode))) * cell
    return total


def discrete_energy(u: ScalarField, spec: ProblemSpec, eps: float = 0.0) -> float:
    """Discrete ``int 1/2|grad u|^2 + F_eps(u)``; requires exact boundary data and ``u >= 0``."""
    if u.grid != spec.grid:
        raise BoundaryMismatch("field and problem live on different grids")
    mask = spec.grid.boundary_mask()
    if not np.array_equal(u.values[mask], spec.boundary[mask]):
        raise BoundaryMismatch("field does not match the boundary data")
    if np.any(u.values < 0):
        raise NegativeField("field has negative values")
    return _energy(u.values, spec.grid, spec.mode, eps, spec.grid.trapezoid_weights())


# -- relaxation kernels -----------------------------------------------------


@njit(cache=True)
def _sweep_1d(u, h2, omega, eps, logmode):
    n = u.shape[0]
    delta = 0.0
    for color in range(2):
        for i in range(1 + color, n - 1, 2):
            old = u[i]
            fp = -math.log(old + eps) if logmode else 1.0
            t = 0.5 * (u[i - 1] + u[i + 1] - h2 * fp)
            new = old + omega * (t - old)
            if new < 0.0:
                new = 0.0
            d = abs(new - old)
            if d > delta:
                delta = d
            u[i] = new
    return delta


@njit(cache=True)
def _sweep_2d(u, h2, omega, eps, logmode):
    n0, n1 = u.shape
    delta = 0.0
    for color in range(2):
        for i in range(1, n0 - 1):
            j0 = 1 + ((color + i + 1) % 2)
            for j in range(j0, n1 - 1, 2):
                old = u[i, j]
                fp = -math.log(old + eps) if logmode else 1.0
                t = 0.25 * (u[i - 1, j] + u[i + 1, j] + u[i, j - 1] + u[i, j + 1] - h2 * fp)
                new = old + omega * (t - old)
                if new < 0.0:
                    new = 0.0
                d = abs(new - old)
                if d > delta:
                    delta = d
                u[i, j] = new
    return delta


def _neighbour_sum(vals: np.ndarray) -> np.ndarray:
    """Sum of axis neighbours at interior nodes."""
    dim = vals.ndim
    inner = tuple([slice(1, -1)] * dim)
    s = np.zeros(vals[inner].shape)
    for k in range(dim):
        lo = [slice(1, -1)] * dim
        hi = [slice(1, -1)] * dim
        lo[k] = slice(None, -2)
        hi[k] = slice(2, None)
        s += vals[tuple(lo)] + vals[tuple(hi)]
    return s


def _forcing_eps(v: np.ndarray, eps: float, mode: ForcingMode) -> np.ndarray:
    if mode is ForcingMode.CONSTANT:
        return np.ones_like(v)
    return -np.log(v + eps)


def kkt_violation(u: ScalarField, mode: ForcingMode, eps: float) -> float:
    """Max of ``|min(u, u - t)|`` over interior nodes, ``t`` the unprojected Gauss-Seidel value.

    This is the complementarity residual ``min(u, -Lap_h u + F_eps'(u))``
    scaled by ``h^2/(2 dim)`` so that it is measured in the units of a nodal
    update.
    """
    vals = u.values
    dim = u.grid.dim
    inner = tuple([slice(1, -1)] * dim)
    ui = vals[inner]
    t = (_neighbour_sum(vals) - u.grid.h**2 * _forcing_eps(ui, eps, mode)) / (2 * dim)
    return float(np.max(np.abs(np.minimum(ui, ui - t)), initial=0.0))


def solve(spec: ProblemSpec, initial: np.ndarray | ScalarField | None = None) -> tuple[ScalarField, SolveReport]:
    """Minimise the discrete energy over ``u >= 0`` with the given boundary data.

    Runs one relaxation stage per entry of ``spec.epsilons`` (a single stage
    with the final epsilon in constant mode), each warm-started from the
    previous one and stopped once the max-norm of a sweep's update drops
    below ``spec.tol``.
    """
    grid = spec.grid
    mode = spec.mode
    mask = grid.boundary_mask()
    wtrap = grid.trapezoid_weights()
    if initial is None:
        initial = spec.initial
    if isinstance(initial, ScalarField):
        initial = initial.values
    u = np.zeros(grid.shape) if initial is None else np.maximum(np.array(initial, dtype=float), 0.0)
    u[mask] = spec.boundary[mask]
    u = np.ascontiguousarray(u)

    logmode = mode is ForcingMode.LOGARITHMIC
    stages = spec.epsilons if logmode else spec.epsilons[-1:]
    kernel = _sweep_1d if grid.dim == 1 else _sweep_2d
    h2 = grid.h**2
    omega = spec.omega

    sweeps = 0
    delta = math.inf
    max_increase = 0.0
    trace = []
    for eps in stages:
        e_start = _energy(u, grid, mode, eps, wtrap)
        e_prev = e_start
        for it in range(spec.max_sweeps):
            delta = kernel(u, h2, omega, eps, logmode)
            sweeps += 1
            last = delta < spec.tol
            if (it + 1) % spec.energy_check_every == 0 or last:
                e_now = _energy(u, grid, mode, eps, wtrap)
                max_increase = max(max_increase, e_now - e_prev)
                e_prev = e_now
            if last:
                break
        else:
            raise NonConvergence(
                f"no convergence within {spec.max_sweeps} sweeps at eps={eps:g} (last update {delta:.3e})"
            )
        e_end = _energy(u, grid, mode, eps, wtrap)
        if e_end > e_start + spec.tol:
            raise DivergingEnergy(f"energy rose from {e_start!r} to {e_end!r} at eps={eps:g}")
        trace.append((eps, e_end))

    field_out = ScalarField(grid, u)
    report = SolveReport(
        final_energy=trace[-1][1],
        sweeps_used=sweeps,
        residual=float(delta),
        kkt_violation=kkt_violation(field_out, mode, stages[-1]),
        epsilon_trace=trace,
        max_energy_increase=float(max_increase),
    )
    return field_out, report


def coarsen(spec: ProblemSpec) -> ProblemSpec:
    """The same problem on the grid with twice the spacing (counts must be odd)."""
    g = spec.grid
    if any((c - 1) % 2 for c in g.counts):
        raise ValueError("coarsening needs an even number of intervals per axis")
    coarse = Grid(g.dim, g.origin, 2 * g.h, tuple((c - 1) // 2 + 1 for c in g.counts))
    sub = spec.boundary[tuple([slice(None, None, 2)] * g.dim)]
    return ProblemSpec(
        coarse,
        sub,
        mode=spec.mode,
        epsilons=spec.epsilons,
        relax_omega=spec.relax_omega,
        tol=spec.tol,
        max_sweeps=spec.max_sweeps,
        energy_check_every=spec.energy_check_every,
    )


def solve_nested(spec: ProblemSpec, levels: int = 3) -> tuple[ScalarField, SolveReport]:
    """Solve on ``levels`` successively coarsened grids and use each result as the next warm start.

    The coarsest level runs the full epsilon schedule; finer levels only run
    the final epsilon.
    """
    chain = [spec]
    for _ in range(levels - 1):
        chain.append(coarsen(chain[-1]))
    u, report = solve(chain[-1])
    sweeps = report.sweeps_used
    for fine in reversed(chain[:-1]):
        start = resample(u, fine.grid).values
        fine_final = ProblemSpec(
            fine.grid,
            fine.boundary,
            mode=fine.mode,
            epsilons=fine.epsilons[-1:],
            relax_omega=fine.relax_omega,
            tol=fine.tol,
            max_sweeps=fine.max_sweeps,
            energy_check_every=fine.energy_check_every,
        )
        u, report = solve(fine_final, initial=start)
        sweeps += report.sweeps_used
    report.sweeps_used = sweeps
    return u, report


def residual_map(u: ScalarField, spec: ProblemSpec) -> ScalarField:
    """Nodewise PDE residual ``|Lap_h u + log u|`` (``|Lap_h u - 1|`` in constant mode) on ``{u > tau(h)}``."""
    vals = u.values
    dim = u.grid.dim
    h = u.grid.h
    inner = tuple([slice(1, -1)] * dim)
    ui = vals[inner]
    lap = (_neighbour_sum(vals) - 2 * dim * ui) / h**2
    tau = pos_threshold(h)
    pos = ui > tau
    if spec.mode is ForcingMode.CONSTANT:
        res = np.abs(lap - 1.0)
    else:
        res = np.abs(lap + np.log(np.where(pos, ui, 1.0)))
    out = np.zeros_like(vals)
    out[inner] = np.where(pos, res, 0.0)
    return ScalarField(u.grid, out)


def log_lipschitz_ratios(u: ScalarField, fb: FreeBoundarySet) -> tuple[np.ndarray, np.ndarray]:
    """Distances ``d`` to the free boundary and ``|grad u| / (d log(1/d))`` at nodes with ``h < d < 0.1``."""
    if len(fb) == 0:
        raise EmptyFreeBoundary("field has no free boundary")
    coords = np.stack([c.reshape(-1) for c in u.grid.coords()], axis=-1)
    d = fb.distance_to(coords)
    grad = np.sqrt(sum(g.values.reshape(-1) ** 2 for g in u.gradient))
    keep = (d > u.grid.h) & (d < 0.1)
    d = d[keep]
    ratio = grad[keep] / (d * np.log(1.0 / d))
    order = np.argsort(d, kind="stable")
    return d[order], ratio[order]


def gradient_log_lipschitz_check(u: ScalarField, fb: FreeBoundarySet) -> float:
    """Worst ratio ``|grad u(x)| / (d(x) log(1/d(x)))`` over nodes with ``h < d(x) < 0.1``."""
    _, ratio = log_lipschitz_ratios(u, fb)
    return float(np.max(ratio, initial=0.0))
