"""Line and field plots written as SVG files.

Output is byte-reproducible: the SVG id salt is fixed and the date stamp
is dropped from the metadata.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "logobs",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}

FIGSIZE = (4.8, 3.4)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_wbar(scan, path, reference: float | None = None) -> Path:
    """Corrected energy and W against r."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        ax.plot(scan.radii, scan.Wbar, "o-", ms=3, label=r"$\bar W(r)$")
        ax.plot(scan.radii, scan.column("W"), "s--", ms=3, label=r"$W(r)$")
        if reference is not None:
            ax.axhline(reference, color="k", lw=0.8, ls=":", label=r"$\omega_n/2$")
        ax.set_xscale("log")
        ax.set_xlabel("r")
        ax.set_ylabel("energy")
        ax.legend()
        return _save(fig, path)


def plot_growth(stats, path, bounds: Sequence[float] = (0.8, 1.3)) -> Path:
    """``g(r) = sup u / (r^2 |log r|)`` on log axes."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        ax.plot(stats.radii, stats.g, "o-", ms=3, label="g(r)")
        for b in bounds:
            ax.axhline(b, color="k", lw=0.8, ls=":")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("r")
        ax.set_ylabel(r"$\sup_{B_r} u / (r^2|\log r|)$")
        ax.legend()
        return _save(fig, path)


def plot_free_boundary(u, fb, path) -> Path:
    """Field values with the extracted interface overlaid (2D) or the profile with its contact points (1D)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        if u.grid.dim == 1:
            x = u.grid.axes()[0]
            ax.plot(x, u.values, label="u")
            if len(fb):
                ax.plot(fb.points[:, 0], np.zeros(len(fb)), "kx", label="free boundary")
            ax.set_xlabel("x")
            ax.legend()
        else:
            lo, hi = u.grid.origin, u.grid.upper
            im = ax.imshow(u.values.T, origin="lower", extent=(lo[0], hi[0], lo[1], hi[1]), cmap="viridis")
            fig.colorbar(im, ax=ax, shrink=0.8)
            if len(fb):
                ax.plot(fb.points[:, 0], fb.points[:, 1], "r.", ms=0.8)
            ax.set_xlabel("x")
            ax.set_ylabel("y")
            ax.set_aspect("equal")
            ax.grid(False)
        return _save(fig, path)


def plot_profiles(profiles, path) -> Path:
    """Blow-up traces on the unit sphere with the best half-space fit of the smallest radius."""
    from .blowup import _halfspace_trace

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        for p in profiles:
            ax.plot(p.angles, p.trace, "-" if len(p.trace) > 2 else "o", label=f"r={p.r:g}")
        if profiles and len(profiles[-1].trace) > 2:
            last = min(profiles, key=lambda p: p.r)
            phi = float(np.arctan2(last.best_nu[1], last.best_nu[0]))
            ax.plot(last.angles, _halfspace_trace(last.angles, phi), "k:", label=r"$h_\nu$")
        ax.set_xlabel(r"$\theta$")
        ax.set_ylabel(r"$u_r$ on $\partial B_1$")
        ax.legend()
        return _save(fig, path)


def plot_oracle(sol, path) -> Path:
    """Oracle profile against the leading growth ``x^2 log(1/x)``."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        ax.plot(sol.x, sol.u, label="u")
        x = sol.x[sol.x < 1]
        ax.plot(x, x * x * np.log(1.0 / x), "--", label=r"$x^2\log(1/x)$")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("x")
        ax.legend()
        return _save(fig, path)
