"""Scaling and forcing functions of the logarithmic obstacle problem.

``mu(r) = r**2 (1 - 2 log r)`` is the blow-up normalisation, ``alpha(r) =
1 - 1/(2 log r)`` the variable Weiss parameter, ``F(v) = v(1 - log v)`` the
potential whose derivative is the forcing ``-log v`` and ``G(r; v)`` the
potential seen by the rescaled field ``u_r = u(x0 + r x)/mu(r)``.  The
classical obstacle problem (forcing 1, potential ``v``) is carried along as
``ForcingMode.CONSTANT``.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import NegativeInput, RadiusOutOfRange

# below this value v log v is treated as its limit 0
V_FLOOR = 1e-300


class ForcingMode(str, enum.Enum):
    LOGARITHMIC = "logarithmic"
    CONSTANT = "constant"

    @classmethod
    def parse(cls, value) -> "ForcingMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown forcing mode {value!r}") from None


def _check_radius(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0) | ~(r < 1)):
        raise RadiusOutOfRange("radius must lie in (0, 1)")
    return r


def _check_nonneg(v):
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise NegativeInput("argument must be non-negative")
    return v


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def mu(r):
    r = _check_radius(r)
    return _out(r * r * (1.0 - 2.0 * np.log(r)))


def dmu(r):
    """Derivative of mu: ``-4 r log r``."""
    r = _check_radius(r)
    return _out(-4.0 * r * np.log(r))


def alpha(r):
    r = _check_radius(r)
    return _out(1.0 - 1.0 / (2.0 * np.log(r)))


def dalpha(r):
    r = _check_radius(r)
    return _out(1.0 / (2.0 * r * np.log(r) ** 2))


def _xlogx_safe(v):
    """Return (mask, safe) where mask marks v above the floor and safe is v or 1."""
    mask = v > V_FLOOR
    return mask, np.where(mask, v, 1.0)


def F_energy(v, mode: ForcingMode = ForcingMode.LOGARITHMIC):
    """Potential ``F``: ``v(1 - log v)`` (with ``F(0) = 0``) or ``v`` in constant mode."""
    v = _check_nonneg(v)
    if ForcingMode.parse(mode) is ForcingMode.CONSTANT:
        return _out(v.copy() if v.ndim else v)
    mask, safe = _xlogx_safe(v)
    return _out(np.where(mask, safe * (1.0 - np.log(safe)), 0.0))


def forcing(v, mode: ForcingMode = ForcingMode.LOGARITHMIC):
    """``F'(v)``: ``-log v`` or ``1``."""
    v = _check_nonneg(v)
    if ForcingMode.parse(mode) is ForcingMode.CONSTANT:
        return _out(np.ones_like(v))
    with np.errstate(divide="ignore"):
        return _out(-np.log(v))


def G_integrand(r, v):
    """``G(r; v) = v/(1-2 log r) * (1 - log(v r^2 (1-2 log r)))`` with ``G(r; 0) = 0``."""
    r = _check_radius(r)
    v = _check_nonneg(v)
    t = 1.0 - 2.0 * np.log(r)
    mask, safe = _xlogx_safe(v)
    val = safe / t * (1.0 - np.log(safe * r * r * t))
    return _out(np.where(mask, val, 0.0))


def G_radial_derivative(r, v):
    """Partial derivative of ``G`` in ``r`` at fixed ``v``.

    Equals ``2 v/(r (1-2 log r)^2) * (1 - log(v (1-2 log r)))``.
    """
    r = _check_radius(r)
    v = _check_nonneg(v)
    t = 1.0 - 2.0 * np.log(r)
    mask, safe = _xlogx_safe(v)
    val = 2.0 * safe / (r * t * t) * (1.0 - np.log(safe * t))
    return _out(np.where(mask, val, 0.0))


def qbar_shift(r, gamma: float = 0.5):
    """The term ``1/(r (1-2 log r)^(1+gamma))`` subtracted from Q to form Qbar."""
    r = _check_radius(r)
    return _out(1.0 / (r * (1.0 - 2.0 * np.log(r)) ** (1.0 + gamma)))


def qbar_shift_integral(r, gamma: float = 0.5):
    """Closed form of ``int_0^r qbar_shift(s) ds = (1-2 log r)^(-gamma) / (2 gamma)``."""
    r = _check_radius(r)
    return _out((1.0 - 2.0 * np.log(r)) ** (-gamma) / (2.0 * gamma))


def scaling_parameter(r):
    """``s(r) = 1/(1-2 log r)``; alpha(r) - 1 and the blow-up corrections are powers of it."""
    r = _check_radius(r)
    return _out(1.0 / (1.0 - 2.0 * np.log(r)))
