"""Uniform-grid scalar fields, interpolation and ball/sphere quadrature.

Fields live on axis-aligned uniform grids in one or two dimensions.  Every
energy integral in the package is evaluated with the polar rules built here:
Gauss-Legendre in the radius times an equispaced trapezoidal rule in the
angle (in 1D the "angle" is the pair of directions -1, +1 and the sphere is
the two endpoints with counting measure).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import BallOutsideDomain, GridTooSmall, LogObsError, OutOfDomain

MAGIC = b"LOGOBS1\x00"

# relative slack (in units of h) when deciding whether a point lies in the hull
_HULL_SLACK = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform grid: node ``i`` along axis ``k`` sits at ``origin[k] + i*h``."""

    dim: int
    origin: tuple[float, ...]
    h: float
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in np.atleast_1d(self.origin)))
        object.__setattr__(self, "counts", tuple(int(c) for c in np.atleast_1d(self.counts)))
        object.__setattr__(self, "h", float(self.h))
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.origin) != self.dim or len(self.counts) != self.dim:
            raise ValueError("origin and counts must have one entry per axis")
        if not self.h > 0:
            raise ValueError(f"spacing must be positive, got {self.h}")
        if min(self.counts) < 3:
            raise GridTooSmall(f"need at least 3 nodes per axis, got {self.counts}")

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float], h: float) -> "Grid":
        """Grid covering ``[lower, upper]`` per axis; the extent must be a multiple of h."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        n = np.rint((upper - lower) / h).astype(int)
        if np.any(np.abs(n * h - (upper - lower)) > 1e-9 * max(1.0, float(np.max(np.abs(upper))))):
            raise ValueError("box extent is not an integer multiple of h")
        return cls(len(lower), tuple(lower), h, tuple(n + 1))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def extent(self) -> tuple[float, ...]:
        return tuple((c - 1) * self.h for c in self.counts)

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(o + e for o, e in zip(self.origin, self.extent))

    def axes(self) -> list[np.ndarray]:
        return [o + self.h * np.arange(c) for o, c in zip(self.origin, self.counts)]

    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinates, one array of shape ``self.shape`` per axis."""
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[k] = 0
            mask[tuple(idx)] = True
            idx[k] = -1
            mask[tuple(idx)] = True
        return mask

    def trapezoid_weights(self) -> np.ndarray:
        """Tensor trapezoid weights (without the h**dim factor)."""
        w = np.ones(self.shape)
        for k in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[k] = 0
            w[tuple(idx)] *= 0.5
            idx[k] = -1
            w[tuple(idx)] *= 0.5
        return w

    def to_index(self, points: np.ndarray) -> np.ndarray:
        """Fractional node indices of ``points`` (shape (..., dim))."""
        return (points - np.asarray(self.origin)) / self.h

    def contains(self, points: np.ndarray) -> np.ndarray:
        idx = self.to_index(np.asarray(points, dtype=float))
        hi = np.asarray(self.counts) - 1
        return np.all((idx >= -_HULL_SLACK) & (idx <= hi + _HULL_SLACK), axis=-1)


@dataclass(frozen=True)
class ScalarField:
    """Node values on a :class:`Grid`; immutable after construction."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, f: Callable[..., np.ndarray]) -> "ScalarField":
        """Evaluate ``f(x1[, x2])`` on the node coordinates."""
        vals = np.broadcast_to(np.asarray(f(*grid.coords()), dtype=float), grid.shape)
        return cls(grid, vals)

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @cached_property
    def _cubic_coeffs(self) -> np.ndarray:
        return ndimage.spline_filter(self.values, order=3, mode="mirror")

    @cached_property
    def gradient(self) -> tuple["ScalarField", ...]:
        return gradient(self)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, self.values + other.values)
        return ScalarField(self.grid, self.values + other)

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class QuadratureConfig:
    n_theta: int = 1024
    n_rad: int = 512
    interp_order: int = 1

    def __post_init__(self):
        if self.n_theta < 64 or self.n_rad < 64:
            raise ValueError("n_theta and n_rad must be >= 64")
        if self.interp_order not in (1, 3):
            raise ValueError("interp_order must be 1 (bilinear) or 3 (bicubic)")


DEFAULT_QUADRATURE = QuadratureConfig()


@njit(cache=True)
def _bilinear_2d(stack, ix, iy):
    k, nx, ny = stack.shape
    m = ix.shape[0]
    out = np.empty((k, m))
    for p in range(m):
        i = min(max(int(np.floor(ix[p])), 0), nx - 2)
        j = min(max(int(np.floor(iy[p])), 0), ny - 2)
        s = ix[p] - i
        t = iy[p] - j
        for q in range(k):
            a = stack[q, i, j]
            b = stack[q, i + 1, j]
            c = stack[q, i, j + 1]
            d = stack[q, i + 1, j + 1]
            out[q, p] = (1 - s) * ((1 - t) * a + t * c) + s * ((1 - t) * b + t * d)
    return out


def _fractional_indices(grid: Grid, points) -> tuple[np.ndarray, tuple[int, ...]]:
    pts = np.asarray(points, dtype=float)
    if grid.dim == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
        pts = pts[..., None]
    hi = np.asarray(grid.counts) - 1
    flat = ((pts.reshape(-1, grid.dim) - np.asarray(grid.origin)) / grid.h).T.copy()
    for k in range(grid.dim):
        row = flat[k]
        if row.size and (row.min() < -_HULL_SLACK or row.max() > hi[k] + _HULL_SLACK):
            raise OutOfDomain("sample point outside the grid hull")
        np.clip(row, 0, hi[k], out=row)
    return flat, pts.shape[:-1]


def sample_fields(fields: Sequence["ScalarField"], points, order: int = 1) -> list[np.ndarray]:
    """Interpolate several fields on the same grid at the same points."""
    if order not in (1, 3):
        raise ValueError("order must be 1 or 3")
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise ValueError("fields must share one grid")
    flat, shape = _fractional_indices(grid, points)
    if order == 1 and grid.dim == 2:
        stack = np.stack([f.values for f in fields])
        rows = _bilinear_2d(stack, flat[0], flat[1])
        return [row.reshape(shape) for row in rows]
    out = []
    for f in fields:
        if order == 1:
            v = ndimage.map_coordinates(f.values, flat, order=1, mode="nearest")
        else:
            v = ndimage.map_coordinates(f._cubic_coeffs, flat, order=3, mode="mirror", prefilter=False)
        out.append(v.reshape(shape))
    return out


def sample_many(field: ScalarField, points, order: int = 1) -> np.ndarray:
    """Interpolate ``field`` at an array of points of shape ``(..., dim)``."""
    return sample_fields([field], points, order)[0]


def sample(field: ScalarField, point, order: int = 1) -> float:
    """Interpolated value at one point; exact at nodes, bilinear is exact on affine fields."""
    return float(sample_many(field, np.atleast_1d(np.asarray(point, dtype=float)), order))


def gradient(field: ScalarField) -> tuple[ScalarField, ...]:
    """Central differences inside, second-order one-sided differences at the boundary."""
    grid = field.grid
    if min(grid.counts) < 3:
        raise GridTooSmall("gradient needs at least 3 nodes per axis")
    parts = np.gradient(field.values, grid.h, edge_order=2)
    if grid.dim == 1:
        parts = [parts]
    return tuple(ScalarField(grid, p) for p in parts)


def resample(field: ScalarField, grid: Grid, order: int = 1) -> ScalarField:
    """Interpolate ``field`` onto the nodes of another grid inside its hull."""
    pts = np.stack(grid.coords(), axis=-1)
    return ScalarField(grid, sample_many(field, pts, order))


# -- polar quadrature -------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    """Quadrature nodes around a center: ``points = center + radii * directions``."""

    center: np.ndarray
    r: float
    points: np.ndarray
    weights: np.ndarray
    directions: np.ndarray
    radii: np.ndarray

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, np.asarray(values).reshape(-1)))


@lru_cache(maxsize=32)
def _unit_directions(dim: int, n_theta: int) -> tuple[np.ndarray, np.ndarray]:
    if dim == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return dirs, np.full(n_theta, 2.0 * np.pi / n_theta)


@lru_cache(maxsize=32)
def _gauss_unit(n_rad: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n_rad)
    return 0.5 * (x + 1.0), 0.5 * w


def check_ball(grid: Grid, center, r: float) -> np.ndarray:
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if c.shape != (grid.dim,):
        raise ValueError(f"center must have {grid.dim} coordinates")
    if not r > 0:
        raise ValueError("radius must be positive")
    lo = np.asarray(grid.origin)
    hi = np.asarray(grid.upper)
    slack = _HULL_SLACK * grid.h
    if np.any(c - r < lo - slack) or np.any(c + r > hi + slack):
        raise BallOutsideDomain(f"B_{r:g}({c.tolist()}) is not inside the grid hull")
    return c


def sphere_rule(dim: int, center, r: float, q: QuadratureConfig = DEFAULT_QUADRATURE) -> Rule:
    dirs, w = _unit_directions(dim, q.n_theta)
    c = np.atleast_1d(np.asarray(center, dtype=float))
    return Rule(c, r, c + r * dirs, w * r ** (dim - 1), dirs, np.full(len(w), r))


def ball_rule(dim: int, center, r: float, q: QuadratureConfig = DEFAULT_QUADRATURE) -> Rule:
    dirs, wd = _unit_directions(dim, q.n_theta)
    rho, wr = _gauss_unit(q.n_rad)
    c = np.atleast_1d(np.asarray(center, dtype=float))
    radii = (r * rho)[:, None] * np.ones(len(wd))[None, :]
    weights = (wr * rho ** (dim - 1))[:, None] * wd[None, :] * r**dim
    points = c + radii[..., None] * dirs[None, :, :]
    directions = np.broadcast_to(dirs, points.shape)
    return Rule(
        c,
        r,
        points.reshape(-1, dim),
        weights.reshape(-1),
        directions.reshape(-1, dim),
        radii.reshape(-1),
    )


def sphere_integral(field: ScalarField, center, r: float, q: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Integral over the sphere of radius ``r`` (two endpoints in 1D)."""
    c = check_ball(field.grid, center, r)
    rule = sphere_rule(field.grid.dim, c, r, q)
    return rule.integrate(sample_many(field, rule.points, q.interp_order))


def ball_integral(field: ScalarField, center, r: float, q: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Integral over the ball of radius ``r`` by the polar Gauss-Legendre/trapezoid rule."""
    c = check_ball(field.grid, center, r)
    rule = ball_rule(field.grid.dim, c, r, q)
    return rule.integrate(sample_many(field, rule.points, q.interp_order))


# -- portable field file ----------------------------------------------------


def field_to_bytes(field: ScalarField) -> bytes:
    g = field.grid
    head = MAGIC + struct.pack("<I", g.dim)
    head += struct.pack(f"<{g.dim}I", *g.counts)
    head += struct.pack(f"<{g.dim}d", *g.origin)
    head += struct.pack("<d", g.h)
    return head + np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C")


def field_from_bytes(data: bytes) -> ScalarField:
    if data[:8] != MAGIC:
        raise LogObsError("not a LOGOBS1 field file (bad magic)")
    off = 8
    (dim,) = struct.unpack_from("<I", data, off)
    off += 4
    counts = struct.unpack_from(f"<{dim}I", data, off)
    off += 4 * dim
    origin = struct.unpack_from(f"<{dim}d", data, off)
    off += 8 * dim
    (h,) = struct.unpack_from("<d", data, off)
    off += 8
    n = int(np.prod(counts))
    if len(data) - off != 8 * n:
        raise LogObsError("field file length does not match its header")
    values = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(counts)
    return ScalarField(Grid(dim, origin, h, counts), values)


def write_field(path, field: ScalarField) -> None:
    Path(path).write_bytes(field_to_bytes(field))


def read_field(path) -> ScalarField:
    return field_from_bytes(Path(path).read_bytes())
