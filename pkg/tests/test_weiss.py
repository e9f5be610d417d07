import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logobs.blowup import rescale
from logobs.cli import random_boundary_problem
from logobs.errors import BallOutsideDomain, DomainTooSmall, RadiusOutOfRange
from logobs.fields import Grid, QuadratureConfig, ScalarField
from logobs.scaling import ForcingMode, qbar_shift, qbar_shift_integral
from logobs.solver import solve
from logobs.weiss import (
    Classification,
    WeissConfig,
    K_term,
    M0_energy,
    M_energy,
    Q_term,
    Q_term_derivation,
    Qbar_term,
    energy_density_classify,
    homogeneity_defect,
    omega_half,
    phi_diagnostic,
    richardson_limit,
    wbar_scan,
    weiss_derivative_fd,
    weiss_energy,
)

R_HALF = math.exp(-0.5)
FAST = WeissConfig(quadrature=QuadratureConfig(n_theta=128, n_rad=64))
CUBIC = WeissConfig(quadrature=QuadratureConfig(interp_order=3))
ORIGIN = np.zeros(2)
# |Q| <= C_Q log(-log r) / (r log^2 r) on the planar solution; fitted once (max ratio 0.74) and frozen
C_Q = 1.0


def _square(h=1 / 64):
    return Grid.box([-1.0, -1.0], [1.0, 1.0], h)


def _wide(h=2.0**-7):
    return Grid.box([-1.25, -1.25], [1.25, 1.25], h)


@lru_cache(maxsize=None)
def _solved(seed):
    return solve(random_boundary_problem(seed, 1 / 32, ForcingMode.LOGARITHMIC))[0]


# -- zero field --------------------------------------------------------------


def test_zero_field():
    z = ScalarField.zeros(_square())
    for fn in (weiss_energy, K_term, Q_term, phi_diagnostic):
        assert fn(z, ORIGIN, 0.3, FAST) == 0.0
    assert Qbar_term(z, ORIGIN, R_HALF, FAST) == pytest.approx(-math.exp(0.5) / (2 * math.sqrt(2)), rel=1e-14)
    assert M0_energy(z) == 0.0


def test_zero_field_scan():
    z = ScalarField.zeros(_square())
    radii = np.array([0.4, 0.2, 0.1])
    scan = wbar_scan(z, ORIGIN, radii, FAST)
    np.testing.assert_array_equal(scan.column("W"), 0.0)
    np.testing.assert_array_equal(scan.column("Q"), 0.0)
    np.testing.assert_allclose(scan.Wbar, [qbar_shift_integral(r, 0.5) for r in radii], rtol=1e-14)


def test_radius_and_domain_errors():
    z = ScalarField.zeros(_square())
    with pytest.raises(RadiusOutOfRange):
        weiss_energy(z, ORIGIN, 1.0)
    with pytest.raises(BallOutsideDomain):
        weiss_energy(z, [0.9, 0.0], 0.3)
    with pytest.raises(ValueError):
        WeissConfig(gamma=1.0)
    with pytest.raises(ValueError):
        wbar_scan(z, ORIGIN, [0.1, 0.2])


# -- K -----------------------------------------------------------------------


def test_K_closed_form_quadratic():
    # alpha(e^{-1/2}) = 2 and mu = 2/e, so u_r = |x|^2/2 and K = (2/r) int_{dB_1} |x|^4/4 = pi e^{1/2}
    u = ScalarField.from_function(_wide(), lambda x, y: x * x + y * y)
    assert K_term(u, ORIGIN, R_HALF, CUBIC) == pytest.approx(math.pi * math.exp(0.5), rel=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 3), st.floats(0.1, 0.9), st.floats(0.1, 0.9), st.floats(0.02, 0.09))
def test_K_nonnegative(seed, cx, cy, r):
    assert K_term(_solved(seed), [cx, cy], r, FAST) >= 0.0


# -- Q -----------------------------------------------------------------------


def test_Q_bound_on_planar(planar_field):
    for r in (0.05, 0.1, 0.2):
        lr = math.log(r)
        assert abs(Q_term(planar_field, ORIGIN, r)) <= C_Q * math.log(-lr) / (r * lr * lr)


@pytest.mark.parametrize("r", [0.05, 0.1, 0.2])
def test_derivative_identity_planar(planar_field, r):
    fd = weiss_derivative_fd(planar_field, ORIGIN, r)
    kq = K_term(planar_field, ORIGIN, r) + Q_term(planar_field, ORIGIN, r)
    assert abs(kq) > 1e-3
    assert fd == pytest.approx(kq, rel=0.05)


def test_integrated_identity_planar(planar_field):
    # W(0.1) - W(0.025) = int_{0.025}^{0.1} (K + Q)
    gx, gw = np.polynomial.legendre.leggauss(6)
    total = 0.0
    for a, b in ((0.025, 0.05), (0.05, 0.1)):
        s = 0.5 * (b - a) * gx + 0.5 * (a + b)
        vals = [K_term(planar_field, ORIGIN, t) + Q_term(planar_field, ORIGIN, t) for t in s]
        total += 0.5 * (b - a) * float(np.dot(gw, vals))
    diff = weiss_energy(planar_field, ORIGIN, 0.1) - weiss_energy(planar_field, ORIGIN, 0.025)
    assert diff == pytest.approx(total, rel=0.05)


def test_planar_energy_above_density(planar_field):
    # W decreases towards omega/2 as r -> 0 and stays above it on the sampled radii
    w = [weiss_energy(planar_field, ORIGIN, r) for r in (0.2, 0.1, 0.05)]
    assert w[0] > w[1] > w[2] > omega_half(2)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 3), st.floats(0.15, 0.85), st.floats(0.15, 0.85), st.floats(0.02, 0.12))
def test_Q_statement_matches_derivation(seed, cx, cy, r):
    u = _solved(seed)
    q1 = Q_term(u, [cx, cy], r, FAST)
    q2 = Q_term_derivation(u, [cx, cy], r, FAST)
    assert q1 == pytest.approx(q2, rel=1e-6, abs=1e-9)


def test_Q_vanishes_in_constant_mode():
    u = ScalarField.from_function(_square(), lambda x, y: 0.5 * np.maximum(x, 0) ** 2)
    cfg = WeissConfig(mode=ForcingMode.CONSTANT, quadrature=FAST.quadrature)
    assert Q_term(u, ORIGIN, 0.3, cfg) == 0.0
    assert Qbar_term(u, ORIGIN, 0.3, cfg) == 0.0


# -- Qbar and Wbar -----------------------------------------------------------


def test_Qbar_negative_small_r(planar_field):
    for r in (0.1, 0.075, 0.05):
        assert Qbar_term(planar_field, ORIGIN, r) < 0


@pytest.mark.parametrize("r", [0.03, 0.1, 0.4])
def test_gamma_changes_only_subtraction(r):
    u = _solved(1)
    a = Qbar_term(u, [0.5, 0.5], r, WeissConfig(gamma=0.25, quadrature=FAST.quadrature))
    b = Qbar_term(u, [0.5, 0.5], r, FAST)
    assert a - b == pytest.approx(qbar_shift(r, 0.5) - qbar_shift(r, 0.25), abs=1e-10)


def test_wbar_monotone_planar(planar_scan):
    radii = planar_scan.radii
    assert radii[0] == pytest.approx(0.3) and radii[-1] == pytest.approx(0.05)
    wb = planar_scan.Wbar
    # radii decrease, so Wbar should not increase along the scan
    assert np.all(np.diff(wb) <= 1e-3 * np.abs(wb[1:]))
    assert planar_scan.q_tail_bound > 0
    assert np.all(planar_scan.column("K") >= 0)


def test_scan_serialisation(planar_scan):
    lines = planar_scan.csv_lines()
    assert lines[0] == "r,W,K,Q,Qbar,Wbar,Phi,hdefect"
    assert len(lines) == len(planar_scan.radii) + 1
    d = planar_scan.to_dict()
    assert len(d["records"]) == len(planar_scan.radii)
    assert d["Wbar_limit_estimate"] == planar_scan.Wbar_limit_estimate


def test_richardson_exact_for_quadratic_in_s():
    radii = np.array([0.2, 0.1, 0.05, 0.025])
    s = 1 / (1 - 2 * np.log(radii))
    vals = 0.3 + 2 * s - 5 * s**2
    assert richardson_limit(radii, vals) == pytest.approx(0.3, abs=1e-12)
    assert richardson_limit(radii, 0.3 + radii - radii**2, ForcingMode.CONSTANT) == pytest.approx(0.3, abs=1e-12)


# -- profile energies --------------------------------------------------------


def _halfspace(h=1 / 128):
    return ScalarField.from_function(_square(h), lambda x, y: 0.5 * np.maximum(x, 0) ** 2)


def test_M0_halfspace():
    assert M0_energy(_halfspace()) == pytest.approx(math.pi / 32, abs=1e-4)


def test_M0_quadratic():
    v = ScalarField.from_function(_square(1 / 128), lambda x, y: (x * x + y * y) / 4)
    assert M0_energy(v) == pytest.approx(math.pi / 16, abs=1e-4)
    assert M0_energy(v) > omega_half(2)


def test_M_tends_to_M0():
    v = _halfspace()
    ref = math.pi / 32
    assert abs(M_energy(0.001, v) - ref) < abs(M_energy(0.1, v) - ref)


def test_M_domain_too_small():
    v = ScalarField.zeros(Grid.box([-0.5, -0.5], [0.5, 0.5], 1 / 16))
    with pytest.raises(DomainTooSmall):
        M0_energy(v)
    with pytest.raises(DomainTooSmall):
        M_energy(0.1, v)


def test_change_of_variables_random_triples():
    rng = np.random.default_rng(2024)
    q = FAST.quadrature
    for _ in range(100):
        u = _solved(int(rng.integers(4)))
        r = float(rng.uniform(0.05, 0.45))
        x0 = rng.uniform(r + 0.01, 0.99 - r, size=2)
        w = weiss_energy(u, x0, r, FAST)
        m = M_energy(r, rescale(u, x0, r, resolution=None), q)
        assert w == pytest.approx(m, rel=1e-6, abs=1e-12)


# -- Phi and homogeneity -----------------------------------------------------


def test_phi_decreases_planar(planar_field):
    assert abs(phi_diagnostic(planar_field, ORIGIN, 0.05)) < abs(phi_diagnostic(planar_field, ORIGIN, 0.2))


def test_phi_positive_bump_quadrature_converged():
    u = ScalarField.from_function(_wide(), lambda x, y: 0.1 * (0.5 + x * x + y * y))
    base = phi_diagnostic(u, ORIGIN, 0.3)
    fine = phi_diagnostic(u, ORIGIN, 0.3, WeissConfig(quadrature=QuadratureConfig(n_theta=2048, n_rad=1024)))
    assert np.isfinite(base)
    assert base == pytest.approx(fine, rel=1e-6)


def test_homogeneity_defect_matches_K():
    u = _solved(2)
    r = 0.2
    a = 1 - 1 / (2 * math.log(r))
    assert K_term(u, [0.5, 0.5], r, FAST) == pytest.approx(a / r * homogeneity_defect(u, [0.5, 0.5], r, FAST), rel=1e-12)


# -- classification ----------------------------------------------------------


def test_omega_half():
    assert omega_half(2) == pytest.approx(math.pi / 32)
    assert omega_half(1) == pytest.approx(1 / 12)


@pytest.mark.parametrize(
    "value, expected",
    [(math.pi / 32, Classification.REGULAR), (math.pi / 16, Classification.NOT_REGULAR), (0.0, Classification.NOT_REGULAR)],
)
def test_classify(value, expected):
    assert energy_density_classify(value, 2, 0.01) is expected


def test_classify_rejects_nan():
    with pytest.raises(ValueError):
        energy_density_classify(float("nan"), 2)
