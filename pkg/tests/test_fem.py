import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from llab.fem import (CoefficientError, CoefficientSet, DomainError, Region, assemble_bilinear,
                      caccioppoli_check, coercivity_margin, constant_matrix, constant_scalar,
                      constant_vector, galerkin_residual, lebesgue_norm, load_vector, mass_matrix,
                      p1_gradient, recovered_gradient, solve_dirichlet, stiffness_matrix, tau0)
from llab.mesh import triangulate_disk

A0 = np.array([[1.5, 0.3], [0.1, 0.8]])
W1 = (0.4, -0.3)
W2 = (0.2, 0.5)
V0 = 0.7


def manufactured():
    """Exact solution and source of -div(A grad u + W1 u) + W2 . grad u + V u = f."""
    x, y = sp.symbols("x y")
    u = sp.exp(x) * sp.cos(y) + x * y**2
    flux = [A0[0, 0] * u.diff(x) + A0[0, 1] * u.diff(y) + W1[0] * u,
            A0[1, 0] * u.diff(x) + A0[1, 1] * u.diff(y) + W1[1] * u]
    f = -(flux[0].diff(x) + flux[1].diff(y)) + W2[0] * u.diff(x) + W2[1] * u.diff(y) + V0 * u
    return sp.lambdify((x, y), u, "numpy"), sp.lambdify((x, y), f, "numpy")


def drift_coeffs():
    return CoefficientSet(A=constant_matrix(A0), W1=constant_vector(W1), W2=constant_vector(W2),
                          V=constant_scalar(V0), lam=0.5, Lam=2.0)


def test_manufactured_solution_converges():
    u, f = manufactured()
    errs = []
    for h in (0.1, 0.05, 0.025):
        m = triangulate_disk(1.0, h)
        uh = solve_dirichlet(assemble_bilinear(m, drift_coeffs()), g=u, f=f)
        errs.append(np.abs(uh - u(*m.nodes.T)).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert errs[-1] < 2e-3
    assert rates.min() > 1.6


def test_gmres_matches_direct(coarse_mesh):
    u, f = manufactured()
    op = assemble_bilinear(coarse_mesh, drift_coeffs())
    a = solve_dirichlet(op, g=u, f=f)
    b = solve_dirichlet(op, g=u, f=f, solver="gmres", tol=1e-12)
    assert np.abs(a - b).max() < 1e-9


def test_adjoint_is_transpose(coarse_mesh):
    c = drift_coeffs()
    M = assemble_bilinear(coarse_mesh, c).matrix
    Ms = assemble_bilinear(coarse_mesh, c, adjoint=True).matrix
    assert abs(Ms - M.T).max() < 1e-12
    Ma = assemble_bilinear(coarse_mesh, c.adjoint()).matrix
    assert abs(Ma - M.T).max() < 1e-12


def test_galerkin_residual_vanishes(coarse_mesh):
    op = assemble_bilinear(coarse_mesh, drift_coeffs())
    F = load_vector(coarse_mesh, f=lambda x, y: np.cos(x) + y)
    u = solve_dirichlet(op, g=1.0, rhs=F)
    assert galerkin_residual(op, u, F) < 1e-12


def test_mass_and_stiffness(unit_mesh):
    one = np.ones(unit_mesh.n_nodes)
    assert one @ mass_matrix(unit_mesh) @ one == pytest.approx(unit_mesh.areas.sum(), rel=1e-12)
    assert np.abs(stiffness_matrix(unit_mesh) @ one).max() < 1e-12
    x = unit_mesh.nodes[:, 0]
    # the Dirichlet energy of x is the area
    assert x @ stiffness_matrix(unit_mesh) @ x == pytest.approx(unit_mesh.areas.sum(), rel=1e-12)


def test_gradients_of_linear_field(unit_mesh):
    x, y = unit_mesh.nodes.T
    u = 3 * x - y
    assert np.allclose(p1_gradient(unit_mesh, u), [3, -1], atol=1e-12)
    assert np.allclose(recovered_gradient(unit_mesh, u), [3, -1], atol=1e-12)


def test_lebesgue_norms(unit_mesh):
    area = unit_mesh.areas.sum()
    assert lebesgue_norm(unit_mesh, lambda x, y: 1 + 0 * x, 2) == pytest.approx(np.sqrt(area))
    assert lebesgue_norm(unit_mesh, lambda x, y: x, np.inf) == pytest.approx(1.0)
    # int_{|x|<1} |x|^2 = pi / 2
    val = lebesgue_norm(unit_mesh, lambda x, y: np.stack([x, y], -1), 2)
    assert val**2 == pytest.approx(np.pi / 2, rel=5e-3)
    annulus = lebesgue_norm(unit_mesh, lambda x, y: 1 + 0 * x, 1, Region(0.8, 0.4))
    assert annulus == pytest.approx(np.pi * (0.64 - 0.16), rel=2e-2)
    with pytest.raises(DomainError):
        lebesgue_norm(unit_mesh, lambda x, y: x, 0.5)


def test_singular_quadrature(unit_mesh):
    # int_{|x|<1} |x|^{-1} = 2 pi
    f = lambda x, y: 1 / np.hypot(x, y)
    val = lebesgue_norm(unit_mesh, f, 1, singular_points=[(0.0, 0.0)])
    assert val == pytest.approx(2 * np.pi, rel=1e-2)


def test_ellipticity_is_checked(coarse_mesh):
    bad = CoefficientSet(A=constant_matrix([[1.0, 0.0], [0.0, 0.1]]), lam=0.5)
    with pytest.raises(CoefficientError):
        assemble_bilinear(coarse_mesh, bad)


def test_coercivity_margin():
    m = triangulate_disk(1.0, 0.2)
    assert coercivity_margin(assemble_bilinear(m, CoefficientSet())) == pytest.approx(1.0)
    c = CoefficientSet(A=constant_matrix(np.diag([2.0, 3.0])), lam=2.0, Lam=3.0)
    # the quotient lies in [2, 3] and reaches 2 only for fields constant in y
    assert 2.0 - 1e-9 <= coercivity_margin(assemble_bilinear(m, c)) < 2.2


def test_tau0():
    assert tau0(4, 6, np.inf) == 4
    assert tau0(np.inf, np.inf, 1.5) == pytest.approx(6.0)
    with pytest.raises(DomainError):
        tau0(4, 4, 1.0)


def test_caccioppoli_ratio_is_bounded(unit_mesh):
    x, y = unit_mesh.nodes.T
    u = x**2 - y**2 + 1
    out = caccioppoli_check(unit_mesh, u, CoefficientSet(), 0.4, 2.0, 2.0)
    assert 0 < out["ratio"] < 10
    with pytest.raises(DomainError):
        caccioppoli_check(unit_mesh, u, CoefficientSet(), 0.4, 1.0, 2.0)


@settings(max_examples=20, deadline=None)
@given(l1=st.floats(0.5, 3.0), l2=st.floats(0.5, 3.0), th=st.floats(0, np.pi),
       a=st.floats(-2, 2), b=st.floats(-2, 2), c=st.floats(-2, 2))
def test_linear_patch_test(l1, l2, th, a, b, c):
    """Pure diffusion with constant A reproduces linear functions exactly."""
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    A = R @ np.diag([l1, l2]) @ R.T
    m = triangulate_disk(1.0, 0.25)
    coeffs = CoefficientSet(A=constant_matrix(A), lam=min(l1, l2) * 0.99, Lam=max(l1, l2) + 1)
    g = lambda x, y: a * x + b * y + c
    u = solve_dirichlet(assemble_bilinear(m, coeffs), g=g)
    assert np.abs(u - g(*m.nodes.T)).max() < 1e-10
