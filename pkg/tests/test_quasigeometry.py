import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llab.fem import constant_matrix
from llab.mesh import triangulate_disk
from llab.presets import build_coefficients
from llab.quasigeometry import (QuasiGeometryError, fundamental_solution, log_bound_constants,
                                operator_residual, power_envelopes, quasi_circle, quasi_geometry,
                                ray_monotone, sigma_rho)


@pytest.fixture(scope="module")
def pole_mesh():
    return triangulate_disk(2.0, 0.1, refine=[(0.0, 0.0)])


@pytest.fixture(scope="module")
def variable_fs():
    c = build_coefficients("variable_matrix")
    return fundamental_solution(c.A, outer_radius=3.0, h=0.05, lam=c.lam, Lam=c.Lam)


def test_laplacian_levels_are_circles(pole_mesh):
    fs = fundamental_solution(constant_matrix(np.eye(2)), mesh=pole_mesh)
    assert np.abs(fs.correction).max() < 1e-12
    c = quasi_circle(fs, 0.5)
    assert np.allclose(c.radii, 0.5, atol=1e-12)
    assert sigma_rho(fs, 1.2) == pytest.approx((1.2, 1.2), abs=1e-12)


def test_constant_matrix_levels_are_ellipses(pole_mesh):
    a, b = 2.0, 0.5
    fs = fundamental_solution(constant_matrix(np.diag([a, b])), mesh=pole_mesh)
    s = 0.8
    # x^2/a + y^2/b = s^(2 sqrt(ab))
    scale = s ** np.sqrt(a * b)
    c = quasi_circle(fs, s)
    x, y = c.points.T
    assert np.allclose(x**2 / a + y**2 / b, scale**2, rtol=1e-10)
    sig, rho = sigma_rho(fs, s)
    assert sig == pytest.approx(np.sqrt(b) * scale, rel=1e-2)
    # vertices lie on the ellipse, so the polyline can only undershoot
    assert np.sqrt(a) * scale * (1 - 5e-3) <= rho <= np.sqrt(a) * scale * (1 + 1e-12)
    assert c.polygon().area == pytest.approx(np.pi * np.sqrt(a * b) * scale**2, rel=1e-2)


def test_variable_matrix_residual_and_geometry(variable_fs):
    assert operator_residual(variable_fs) < 0.05
    qg = quasi_geometry(variable_fs)
    assert qg.containment_ok()
    tab = qg.table()
    assert np.all(tab[:, 1] <= tab[:, 2])
    assert np.all(np.diff(tab[:, 1]) > 0) and np.all(np.diff(tab[:, 2]) > 0)
    assert qg.b < qg.b_tilde < qg.d
    assert ray_monotone(variable_fs)
    c1, c2 = power_envelopes(tab)
    assert 0 < c2 <= c1
    lo, hi = log_bound_constants(variable_fs)
    assert 0 < lo <= hi


def test_correction_converges():
    c = build_coefficients("variable_matrix")
    vals = []
    for h in (0.2, 0.1, 0.05):
        fs = fundamental_solution(c.A, outer_radius=3.0, h=h)
        vals.append(fs(np.array([[0.5, 0.3]]))[0])
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    assert d2 < d1 < 1e-3


def test_level_errors(pole_mesh):
    fs = fundamental_solution(constant_matrix(np.eye(2)), mesh=pole_mesh)
    with pytest.raises(QuasiGeometryError):
        quasi_circle(fs, -1.0)
    with pytest.raises(QuasiGeometryError):
        quasi_circle(fs, 5.0)


@settings(max_examples=10, deadline=None)
@given(l1=st.floats(0.5, 2.0), l2=st.floats(0.5, 2.0), th=st.floats(0, np.pi),
       s=st.floats(0.3, 1.0))
def test_constant_levels_sandwiched(pole_mesh, l1, l2, th, s):
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    A = R @ np.diag([l1, l2]) @ R.T
    fs = fundamental_solution(constant_matrix(A), mesh=pole_mesh)
    sig, rho = sigma_rho(fs, s)
    scale = s ** np.sqrt(l1 * l2)
    assert np.sqrt(min(l1, l2)) * scale * (1 - 1e-2) <= sig <= rho
    assert rho <= np.sqrt(max(l1, l2)) * scale * (1 + 1e-9)
