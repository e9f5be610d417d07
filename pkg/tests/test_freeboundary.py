import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logobs import oracle1d, testcases
from logobs.errors import EmptyFreeBoundary, NotAFreeBoundaryPoint, TooFewPoints
from logobs.fields import Grid, ScalarField
from logobs.freeboundary import (
    FLAT,
    FreeBoundarySet,
    extract,
    growth_stats,
    normal_holder_exponent,
    pos_threshold,
    require_free_boundary_point,
    snap_to_contact,
)
from logobs.scaling import ForcingMode
from logobs.solver import ProblemSpec, solve


def _square(h):
    return Grid.box([-1.0, -1.0], [1.0, 1.0], h)


def _halfspace(h=1 / 64):
    return ScalarField.from_function(_square(h), lambda x, y: 0.5 * np.maximum(x, 0) ** 2)


def _bump(h=1 / 128):
    return ScalarField.from_function(_square(h), lambda x, y: 0.5 * np.maximum(np.hypot(x, y) - 0.5, 0) ** 2)


# -- extraction --------------------------------------------------------------


def test_threshold_value():
    h = 2.0**-8
    assert pos_threshold(h) == pytest.approx(0.1 * h * h * (1 + 16 * np.log(2)))


def test_extract_halfspace():
    u = _halfspace()
    fb = extract(u)
    h = u.grid.h
    assert len(fb) == u.grid.counts[1]
    # linear interpolation of x^2/2 between nodes brackets the exact level sqrt(2 tau)
    assert np.all(np.abs(fb.points[:, 0] - np.sqrt(2 * fb.tau)) < h / 4)
    assert np.all(np.abs(fb.points[:, 0]) < 2 * h)
    np.testing.assert_allclose(fb.normals, np.tile([1.0, 0.0], (len(fb), 1)), atol=1e-2)


def test_extract_zero_is_empty():
    fb = extract(ScalarField.zeros(_square(1 / 16)))
    assert len(fb) == 0
    assert fb.points.shape == (0, 2)


def test_extract_radial_bump():
    u = _bump()
    h = u.grid.h
    fb = extract(u)
    rad = np.linalg.norm(fb.points, axis=1)
    assert np.all(np.abs(rad - 0.5) <= 2 * h)
    radial = fb.points / rad[:, None]
    assert np.max(np.linalg.norm(fb.normals - radial, axis=1)) <= 5e-2


def test_points_on_grid_edges_and_unit_normals():
    u = _bump(1 / 64)
    fb = extract(u)
    h = u.grid.h
    frac = (fb.points - np.asarray(u.grid.origin)) / h
    on_line = np.abs(frac - np.round(frac)) < 1e-9
    assert np.all(on_line.any(axis=1))
    np.testing.assert_allclose(np.linalg.norm(fb.normals, axis=1), 1.0, atol=1e-6)


def test_extract_1d():
    g = Grid.box([-1.0], [1.0], 1 / 64)
    fb = extract(ScalarField.from_function(g, lambda x: 0.5 * np.maximum(x, 0) ** 2))
    assert len(fb) == 1
    assert fb.normals[0, 0] == pytest.approx(1.0)


def test_normals_invariant_under_shift():
    for u in (_halfspace(), _bump(1 / 64)):
        fb = extract(u)
        c = fb.tau / 2
        shifted = extract(ScalarField(u.grid, u.values + c), fb.tau + c)
        assert len(shifted) == len(fb)
        np.testing.assert_allclose(shifted.points, fb.points, atol=1e-12)
        np.testing.assert_allclose(shifted.normals, fb.normals, atol=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 2.0), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_extract_monotone_in_tau(factor, cx, cy):
    g = _square(1 / 32)
    u = ScalarField.from_function(g, lambda x, y: 0.5 * np.maximum(np.hypot(x - cx, y - cy) - 0.4, 0) ** 2)
    old = extract(u)
    new = extract(u, old.tau * factor)
    d = old.distance_to(new.points)
    assert np.all(d <= g.h * (1 + 1e-9))
    # the raised level set moves outwards, away from the contact region
    r_old = np.hypot(*(old.points - [cx, cy]).T).min()
    r_new = np.hypot(*(new.points - [cx, cy]).T).min()
    assert r_new >= r_old - 1e-12


def test_csv_header_and_rows():
    fb = extract(_halfspace(1 / 8))
    lines = fb.csv_lines()
    assert lines[0] == "x,y,nx,ny"
    assert len(lines) == len(fb) + 1
    row = [float(v) for v in lines[1].split(",")]
    np.testing.assert_array_equal(row, [*fb.points[0], *fb.normals[0]])


def test_snap_to_contact():
    u = _halfspace()
    fb = extract(u)
    p = snap_to_contact(u, fb, [0.3, 0.0])
    # the crossing sits near sqrt(2 tau); the snapped node is the contact node next to it
    assert p[1] == 0.0
    assert 0.5 * p[0] ** 2 <= fb.tau
    assert fb.distance_to(p)[0] <= u.grid.h
    with pytest.raises(EmptyFreeBoundary):
        snap_to_contact(u, extract(ScalarField.zeros(u.grid)), [0, 0])


# -- growth ------------------------------------------------------------------


def test_growth_of_oracle(log_oracle):
    g = Grid.box([-0.15], [0.15], 1e-6)
    u = oracle1d.profile_field(log_oracle, g)
    stats = growth_stats(u, [0.0], [1e-2])
    assert stats.g[0] == pytest.approx(1.0, abs=0.2)


def test_growth_classical_halfspace():
    u = _halfspace(1 / 256)
    # the default threshold offsets a classical interface by about 1.5h; extract it finely instead
    fb = extract(u, u.grid.h**3)
    stats = growth_stats(u, [0.0, 0.0], [0.1, 0.05], fb=fb)
    np.testing.assert_allclose(stats.g, 1 / (2 * np.abs(np.log([0.1, 0.05]))), rtol=1e-3)
    assert stats.g[0] == pytest.approx(1 / (2 * np.log(10)), abs=1e-4)  # 0.2171...
    assert stats.csv_lines()[0] == "r,g"


def test_growth_requires_free_boundary_point():
    u = ScalarField.zeros(_square(1 / 16))
    with pytest.raises(NotAFreeBoundaryPoint):
        growth_stats(u, [0.0, 0.0], [0.1])
    with pytest.raises(NotAFreeBoundaryPoint):
        require_free_boundary_point(_halfspace(), [0.5, 0.0])


def test_growth_bounded_for_solved_log_field(log_oracle):
    # two-sided data U(max(x, 0)) on [-1/2, 1/2] at h = 2^-10
    g = Grid.box([-0.5], [0.5], 2.0**-10)
    data = oracle1d.profile_field(log_oracle, g).values
    u, _ = solve(ProblemSpec(g, data, mode=ForcingMode.LOGARITHMIC, relax_omega=None))
    fb = extract(u)
    x0 = snap_to_contact(u, fb, [0.0])
    stats = growth_stats(u, x0, np.geomspace(1e-2, 1e-1, 9), fb=fb)
    assert np.all(stats.g >= 0)
    assert stats.g.max() / stats.g.min() < 3


# -- Hoelder exponent --------------------------------------------------------


def test_holder_flat():
    fb = extract(_halfspace())
    est = normal_holder_exponent(fb)
    assert est.beta_hat == FLAT
    assert est.pairs_used == 0


def test_holder_graph():
    x = np.geomspace(1e-4, 1.0, 64)
    pts = np.stack([x, x**1.5], axis=1)
    nrm = np.stack([-1.5 * np.sqrt(x), np.ones_like(x)], axis=1)
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    est = normal_holder_exponent(FreeBoundarySet(pts, nrm, 0.0, 0.0))
    assert est.beta_hat == pytest.approx(0.5, abs=0.1)


def test_holder_circle():
    t = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    nrm = np.stack([np.cos(t), np.sin(t)], axis=1)
    est = normal_holder_exponent(FreeBoundarySet(0.5 * nrm, nrm, 0.0, 0.0))
    assert est.beta_hat == pytest.approx(1.0, abs=0.1)


def test_holder_too_few_points():
    pts = np.zeros((5, 2))
    with pytest.raises(TooFewPoints):
        normal_holder_exponent(FreeBoundarySet(pts, pts, 0.0, 0.0))


def test_planar_solution_interface_is_flat(planar_field):
    fb = extract(planar_field)
    assert np.max(np.abs(fb.points[:, 0])) < planar_field.grid.h
    assert np.allclose(fb.normals[:, 0], 1.0, atol=1e-2)


def test_planar_snap_is_origin(planar_field):
    fb = extract(planar_field)
    np.testing.assert_allclose(snap_to_contact(planar_field, fb, testcases.PLANAR_CENTER), [0.0, 0.0], atol=1e-15)
