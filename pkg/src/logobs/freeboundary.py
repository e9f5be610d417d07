"""Free-boundary extraction, growth statistics and normal-field regularity."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage

from .errors import EmptyFreeBoundary, NotAFreeBoundaryPoint, TooFewPoints
from .fields import DEFAULT_QUADRATURE, QuadratureConfig, ScalarField, ball_rule, check_ball, sample_many

FLAT = "FLAT"

# at most this many interface points enter the pairwise Hoelder fit
_MAX_HOLDER_POINTS = 3000


def pos_threshold(h: float) -> float:
    """Positivity threshold ``0.1 h^2 (1 + 2|log h|)``, a tenth of the growth scale mu(h)."""
    return 0.1 * h * h * (1.0 + 2.0 * abs(np.log(h)))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class FreeBoundarySet:
    points: np.ndarray
    normals: np.ndarray
    tau: float
    h: float = 0.0

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def csv_lines(self) -> list[str]:
        names = ["x", "y"][: self.dim]
        lines = [",".join(names + ["n" + n for n in names])]
        for p, n in zip(self.points, self.normals):
            lines.append(",".join(_fmt(v) for v in (*p, *n)))
        return lines

    def to_csv(self, path) -> None:
        Path(path).write_text("\n".join(self.csv_lines()) + "\n")

    def distance_to(self, points) -> np.ndarray:
        """Euclidean distance from each query point to the nearest interface point."""
        from scipy.spatial import cKDTree

        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        d, _ = cKDTree(self.points).query(pts)
        return d


@dataclass(frozen=True)
class GrowthStats:
    center: np.ndarray
    radii: np.ndarray
    g: np.ndarray = field(repr=False)

    def csv_lines(self) -> list[str]:
        return ["r,g"] + [f"{_fmt(r)},{_fmt(v)}" for r, v in zip(self.radii, self.g)]

    def to_csv(self, path) -> None:
        Path(path).write_text("\n".join(self.csv_lines()) + "\n")


class HolderEstimate(NamedTuple):
    beta_hat: float | str
    pairs_used: int


def extract(u: ScalarField, tau: float | None = None) -> FreeBoundarySet:
    """Interface points where ``u`` crosses ``tau`` along grid edges, with unit normals.

    Normals are oriented by the gradient of the 3-point box-filtered
    indicator of ``{u > tau}`` and point into the positivity set.  In 2D
    their direction is refined by a principal-axis fit to the crossing
    points within three cells, which removes the staircase bias of the
    binary indicator.
    """
    grid = u.grid
    h = grid.h
    tau = pos_threshold(h) if tau is None else float(tau)
    vals = u.values
    pos = vals > tau
    origin = np.asarray(grid.origin)
    pts = []
    for k in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[k] = slice(None, -1)
        hi[k] = slice(1, None)
        a, b = vals[tuple(lo)], vals[tuple(hi)]
        cross = pos[tuple(lo)] != pos[tuple(hi)]
        idx = np.argwhere(cross)
        if len(idx) == 0:
            continue
        ua = a[cross]
        ub = b[cross]
        t = (tau - ua) / (ub - ua)
        p = origin + h * idx.astype(float)
        p[:, k] += h * t
        pts.append(p)
    if not pts:
        empty = np.zeros((0, grid.dim))
        return FreeBoundarySet(empty, empty.copy(), tau, h)
    points = np.concatenate(pts)

    chi = ndimage.uniform_filter(pos.astype(float), size=3, mode="nearest")
    parts = np.gradient(chi, h)
    if grid.dim == 1:
        parts = [parts]
    grads = np.stack([sample_many(ScalarField(grid, p), points) for p in parts], axis=-1)
    norms = np.linalg.norm(grads, axis=1)
    bad = norms < 1e-12
    if np.any(bad):
        # fall back to the edge direction towards the positive node
        grads[bad] = _edge_directions(u, points[bad], tau)
        norms[bad] = np.linalg.norm(grads[bad], axis=1)
    normals = grads / norms[:, None]
    if grid.dim == 2:
        normals = _refine_normals(points, normals, 3.0 * h)
    return FreeBoundarySet(points, normals, tau, h)


def _refine_normals(points: np.ndarray, normals: np.ndarray, radius: float) -> np.ndarray:
    from scipy.spatial import cKDTree

    out = normals.copy()
    for i, nb in enumerate(cKDTree(points).query_ball_point(points, radius)):
        if len(nb) < 3:
            continue
        c = points[nb] - points[nb].mean(axis=0)
        _, vecs = np.linalg.eigh(c.T @ c)
        n = vecs[:, 0]
        out[i] = n if n @ normals[i] >= 0 else -n
    return out


def _edge_directions(u: ScalarField, points: np.ndarray, tau: float) -> np.ndarray:
    out = np.zeros_like(points)
    h = u.grid.h
    for i, p in enumerate(points):
        best = None
        for k in range(u.grid.dim):
            e = np.zeros(u.grid.dim)
            e[k] = 0.5 * h
            if u.grid.contains(p + e) and u.grid.contains(p - e):
                diff = sample_many(u, p + e) - sample_many(u, p - e)
                if best is None or abs(diff) > abs(best[1]):
                    best = (k, diff)
        if best is not None:
            out[i, best[0]] = np.sign(best[1]) or 1.0
        else:
            out[i, 0] = 1.0
    return out


def nearest_boundary_distance(fb: FreeBoundarySet, x0) -> float:
    if len(fb) == 0:
        return np.inf
    return float(np.min(np.linalg.norm(fb.points - np.asarray(x0, dtype=float), axis=1)))


def require_free_boundary_point(u: ScalarField, x0, fb: FreeBoundarySet | None = None) -> FreeBoundarySet:
    fb = extract(u) if fb is None else fb
    if nearest_boundary_distance(fb, x0) > u.grid.h * (1.0 + 1e-9):
        raise NotAFreeBoundaryPoint(f"{np.asarray(x0).tolist()} is not within h of the free boundary")
    return fb


def snap_to_contact(u: ScalarField, fb: FreeBoundarySet, point) -> np.ndarray:
    """Interface point nearest ``point``, moved to the closest node of ``{u <= tau}`` within one cell.

    The crossing points sit where ``u = tau``, slightly inside the positivity
    set; the adjacent contact node is the better blow-up centre.
    """
    if len(fb) == 0:
        raise EmptyFreeBoundary("field has no free boundary")
    p = fb.points[int(np.argmin(np.linalg.norm(fb.points - np.asarray(point, dtype=float), axis=1)))]
    coords = np.stack([c.reshape(-1) for c in u.grid.coords()], axis=-1)
    d = np.linalg.norm(coords - p, axis=1)
    near = (d <= u.grid.h * (1.0 + 1e-9)) & (u.values.reshape(-1) <= fb.tau)
    if not np.any(near):
        return p
    idx = np.flatnonzero(near)
    return coords[idx[np.argmin(d[idx])]]


def growth_stats(
    u: ScalarField,
    x0,
    radii: Sequence[float],
    q: QuadratureConfig = DEFAULT_QUADRATURE,
    fb: FreeBoundarySet | None = None,
) -> GrowthStats:
    """``g(r) = sup_{B_r(x0)} u / (r^2 |log r|)`` with the sup taken over quadrature nodes."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    require_free_boundary_point(u, x0, fb)
    radii = np.asarray(radii, dtype=float)
    g = np.empty(len(radii))
    for i, r in enumerate(radii):
        check_ball(u.grid, x0, r)
        rule = ball_rule(u.grid.dim, x0, r, q)
        sup = max(float(np.max(sample_many(u, rule.points, q.interp_order))), float(sample_many(u, x0[None])[0]))
        g[i] = sup / (r * r * abs(np.log(r)))
    return GrowthStats(x0, radii, g)


def normal_holder_exponent(fb: FreeBoundarySet, floor: float = 1e-3) -> HolderEstimate:
    """Least-squares slope of ``log|nu(y)-nu(z)|`` against ``log|y-z|``.

    Pairs closer than 4h (grid noise) or farther than a quarter of the
    diameter are dropped, as are pairs whose normals differ by less than
    ``floor``.  If no pair survives the floor the interface is ``FLAT``.
    """
    n = len(fb)
    if n < 8:
        raise TooFewPoints(f"need at least 8 interface points, got {n}")
    pts, nrm = fb.points, fb.normals
    if n > _MAX_HOLDER_POINTS:
        keep = np.linspace(0, n - 1, _MAX_HOLDER_POINTS).round().astype(int)
        pts, nrm = pts[keep], nrm[keep]
    i, j = np.triu_indices(len(pts), 1)
    d = np.linalg.norm(pts[i] - pts[j], axis=1)
    dn = np.linalg.norm(nrm[i] - nrm[j], axis=1)
    diam = float(d.max())
    window = (d > 4.0 * fb.h) & (d < diam / 4.0)
    use = window & (dn >= floor)
    count = int(use.sum())
    if count == 0:
        return HolderEstimate(FLAT, 0)
    if count < 2 or np.ptp(np.log(d[use])) == 0:
        raise TooFewPoints("not enough resolved pairs for a slope fit")
    slope = np.polyfit(np.log(d[use]), np.log(dn[use]), 1)[0]
    return HolderEstimate(float(slope), count)
