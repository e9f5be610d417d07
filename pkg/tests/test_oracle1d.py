import math

import numpy as np
import pytest
import sympy as sp
from scipy.integrate import solve_ivp

from logobs import oracle1d
from logobs.errors import BlowThrough, OutOfDomain, SeedTooLarge
from logobs.fields import Grid
from logobs.scaling import ForcingMode
from logobs.solver import ProblemSpec, discrete_energy

# converged value of the profile at x = 1e-2 (frozen from the certified integration)
U_AT_1E2 = 5.169325e-4


@pytest.fixture(scope="module")
def constant():
    return oracle1d.shoot(1e-6, 0.5, ForcingMode.CONSTANT)


def test_constant_mode_exact(constant):
    np.testing.assert_array_equal(constant.u, 0.5 * constant.x**2)
    np.testing.assert_array_equal(constant.du, constant.x)
    assert constant.residual_max == 0.0


def test_log_profile_certified(log_oracle):
    assert log_oracle.residual_max <= 1e-6
    assert np.all(log_oracle.u > 0)
    assert np.all(np.diff(log_oracle.u) > 0)
    assert log_oracle.x_max == 0.5


def test_sample_grid_is_geometric(log_oracle):
    ratios = log_oracle.x[1:-1] / log_oracle.x[:-2]
    np.testing.assert_allclose(ratios, 1.01, rtol=1e-12)


def test_value_at_one_percent(log_oracle):
    u, _ = oracle1d.interpolate(log_oracle, 1e-2)
    assert u == pytest.approx(U_AT_1E2, rel=1e-5)


def test_seed_expansion_against_integration(log_oracle):
    u, _ = oracle1d.interpolate(log_oracle, 1e-2)
    three, _ = oracle1d.seed(1e-2, terms=3)
    four, _ = oracle1d.seed(1e-2, terms=4)
    # the three-term expansion evaluates to 5.3416e-4 but sits 3.3% above the profile
    assert three == pytest.approx(5.3416e-4, abs=1e-8)
    assert 0.03 < three / u - 1 < 0.035
    assert abs(four / u - 1) < 0.02


def test_growth_ratio_small_r(log_oracle):
    r = 1e-4
    u, _ = oracle1d.interpolate(log_oracle, r)
    assert u / (r * r * abs(math.log(r))) == pytest.approx(1.042, abs=0.02)


def test_seed_residual_decays():
    assert abs(oracle1d.seed_residual(1e-3, terms=4)) < 0.15
    assert abs(oracle1d.seed_residual(1e-3, terms=3)) == pytest.approx(0.302, abs=1e-3)
    xs = np.geomspace(1e-12, 1e-3, 20)
    for terms in (3, 4):
        res = np.abs(oracle1d.seed_residual(xs, terms))
        assert np.all(np.diff(res) > 0)


def test_seed_residual_symbolic():
    x = sp.symbols("x", positive=True)
    L = -sp.log(x)
    A = L - sp.log(L) / 2 + sp.Rational(3, 2) + (sp.log(L) / 4 - sp.Rational(3, 2)) / L
    u = x**2 * A
    res = sp.lambdify(x, sp.diff(u, x, 2) + sp.log(u), "mpmath")
    du = sp.lambdify(x, sp.diff(u, x), "mpmath")
    for xv in (1e-8, 1e-5, 1e-3):
        assert oracle1d.seed_residual(xv) == pytest.approx(float(res(xv)), rel=1e-9)
        assert oracle1d.seed(xv)[1] == pytest.approx(float(du(xv)), rel=1e-12)


def test_seed_too_large():
    with pytest.raises(SeedTooLarge):
        oracle1d.shoot(0.1)


def test_blow_through():
    with pytest.raises(BlowThrough):
        oracle1d.shoot(1e-6, 3.0)


def test_bad_range():
    with pytest.raises(ValueError):
        oracle1d.shoot(0.1, 0.05)


def test_independent_integrator(log_oracle):
    u0, du0 = oracle1d.seed(log_oracle.x_seed)
    ref = solve_ivp(
        lambda _x, y: [y[1], -math.log(y[0])],
        (log_oracle.x_seed, 0.5),
        [u0, du0],
        method="DOP853",
        t_eval=log_oracle.x[::50],
        rtol=1e-13,
        atol=1e-24,
    )
    np.testing.assert_allclose(log_oracle.u[::50], ref.y[0], rtol=1e-8)


def test_seed_position_insensitive(log_oracle):
    other = oracle1d.shoot(1e-5)
    u1, _ = oracle1d.interpolate(log_oracle, [0.01, 0.1, 0.5])
    u2, _ = oracle1d.interpolate(other, [0.01, 0.1, 0.5])
    np.testing.assert_allclose(u1, u2, rtol=1e-5)


def test_interpolate_contact_and_samples(log_oracle):
    assert oracle1d.interpolate(log_oracle, 0.0) == (0.0, 0.0)
    k = 700
    u, du = oracle1d.interpolate(log_oracle, log_oracle.x[k])
    assert u == log_oracle.u[k]
    assert du == log_oracle.du[k]


def test_interpolate_below_seed_uses_expansion(log_oracle):
    x = log_oracle.x_seed / 10
    assert oracle1d.interpolate(log_oracle, x) == pytest.approx(tuple(map(float, oracle1d.seed(x))))


def test_interpolate_constant(constant):
    u, du = oracle1d.interpolate(constant, 0.3)
    assert u == pytest.approx(0.045, abs=1e-14)
    assert du == pytest.approx(0.3, abs=1e-14)


def test_interpolate_range(log_oracle):
    with pytest.raises(OutOfDomain):
        oracle1d.interpolate(log_oracle, 0.6)
    with pytest.raises(OutOfDomain):
        oracle1d.interpolate(log_oracle, -1e-3)


def test_growth_ratio_range(log_oracle):
    r = np.geomspace(1e-4, 1e-1, 40)
    u, _ = oracle1d.interpolate(log_oracle, r)
    g = u / (r * r * np.abs(np.log(r)))
    assert np.all(np.diff(g) > 0)
    assert g[0] > 1.0 and g[-1] == pytest.approx(1.333, abs=2e-3)


def test_energy_self_convergence(log_oracle):
    def energy(h):
        grid = Grid.box([0.0], [0.5], h)
        field = oracle1d.profile_field(log_oracle, grid)
        spec = ProblemSpec(grid, field.values)
        return discrete_energy(field, spec)

    assert abs(energy(1 / 1024) - energy(1 / 4096)) < 1e-4


def test_csv(log_oracle, tmp_path):
    lines = log_oracle.csv_lines()
    assert lines[0] == "x,u,du"
    assert len(lines) == len(log_oracle.x) + 1
    log_oracle.to_csv(tmp_path / "o.csv")
    data = np.loadtxt(tmp_path / "o.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 1], log_oracle.u)
