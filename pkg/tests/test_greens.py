import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llab import greens as G
from llab.fem import (CoefficientSet, DomainError, constant_matrix, constant_scalar,
                      constant_vector)
from llab.mesh import triangulate_disk
from llab.multiplier import solve_multiplier
from llab.presets import random_admissible

LAPLACE = CoefficientSet()
DRIFT = CoefficientSet(W1=constant_vector((0.5, 0.2)), W2=constant_vector((-0.3, 0.4)),
                       V=constant_scalar(0.5))


@pytest.fixture(scope="module")
def laplace_green():
    return G.averaged_green(LAPLACE, (0.0, 0.0), 0.02, h=0.04)


@settings(max_examples=50, deadline=None)
@given(r1=st.floats(0.05, 0.9), t1=st.floats(0, 2 * np.pi), r2=st.floats(0.05, 0.9),
       t2=st.floats(0, 2 * np.pi))
def test_closed_form_is_symmetric_and_vanishes_on_circle(r1, t1, r2, t2):
    x = (r1 * np.cos(t1), r1 * np.sin(t1))
    y = (r2 * np.cos(t2), r2 * np.sin(t2))
    if np.hypot(x[0] - y[0], x[1] - y[1]) < 1e-3:
        return
    assert G.laplace_green_disk([x], y)[0] == pytest.approx(G.laplace_green_disk([y], x)[0],
                                                            rel=1e-10, abs=1e-12)
    b = (np.cos(t1), np.sin(t1))
    assert abs(G.laplace_green_disk([b], y)[0]) < 1e-12


def test_closed_form_is_harmonic():
    y = (0.3, -0.2)
    h = 1e-3
    pts = np.array([[0.5, 0.4], [-0.6, 0.1], [0.0, -0.7]])
    f = lambda p: G.laplace_green_disk(p, y)
    lap = sum(f(pts + d) for d in ([h, 0], [-h, 0], [0, h], [0, -h])) - 4 * f(pts)
    assert np.abs(lap / h**2).max() < 1e-4


@settings(max_examples=30, deadline=None)
@given(r=st.floats(0, 0.5), t=st.floats(0, 2 * np.pi), rho=st.floats(0, 0.2))
def test_averaging_vector_reproduces_linear_means(coarse_mesh, r, t, rho):
    y = np.array([r * np.cos(t), r * np.sin(t)])
    a = G.averaging_vector(coarse_mesh, y, rho)
    x1, x2 = coarse_mesh.nodes.T
    assert a.sum() == pytest.approx(1.0)
    # the mean of a linear function over a disk is its value at the center
    assert a @ (2 * x1 - x2 + 1) == pytest.approx(2 * y[0] - y[1] + 1)


def test_averaging_disk_must_fit(coarse_mesh):
    with pytest.raises(DomainError):
        G.averaging_vector(coarse_mesh, (0.95, 0.0), 0.1)


def test_laplacian_closed_form(laplace_green):
    assert G.closed_form_deviation(laplace_green, 0.1) < 5e-3
    assert laplace_green.info["identity_residual"] < 1e-10
    off = G.averaged_green(LAPLACE, (0.3, -0.2), 0.02, h=0.04)
    assert G.closed_form_deviation(off, 0.1) < 5e-3


def test_point_evaluation_green(laplace_green):
    g0 = G.averaged_green(LAPLACE, (0.0, 0.0), 0.0, mesh=laplace_green.mesh)
    assert G.closed_form_deviation(g0, 0.2) < 5e-3


def test_symmetry_for_drift_operator():
    out = G.symmetry_check(DRIFT, (0.2, 0.1), (-0.3, 0.2), 0.02,
                           mesh=G.pole_mesh([(0.2, 0.1), (-0.3, 0.2)], h=0.05))
    assert out["deviation"] <= 1e-6
    assert out["pointwise"] < 5e-2


def test_adjoint_green_solves_transpose(coarse_mesh):
    solver = G.green_solver(DRIFT, coarse_mesh)
    gs = solver.green((0.1, 0.1), 0.05, adjoint=True)
    assert gs.info["identity_residual"] < 1e-10
    assert gs.adjoint


def test_non_coercive_form_is_refused(coarse_mesh):
    with pytest.raises(G.GreenError):
        G.green_solver(CoefficientSet(V=constant_scalar(-50.0)), coarse_mesh)


def test_representation_matches_direct_solve(unit_mesh):
    lap = G.representation_check(LAPLACE, f=1.0, mesh=unit_mesh, n_probes=5)
    assert lap["deviation"] < 1e-3
    drift = G.representation_check(DRIFT, f=lambda x, y: np.cos(x) + y,
                                   G=lambda x, y: np.stack([0.3 + 0 * x, -0.1 + 0 * y], -1),
                                   mesh=unit_mesh, n_probes=5)
    assert drift["deviation"] < 1e-3
    zero = G.representation_check(LAPLACE, mesh=unit_mesh, n_probes=3)
    assert zero["deviation"] == 0.0


def test_multiplier_reconstruction():
    mesh = triangulate_disk(1.8, 0.05)
    coeffs = random_admissible(2)
    phi = solve_multiplier(mesh, coeffs).phi
    out = G.multiplier_reconstruction(mesh, coeffs, phi)
    assert out["deviation"] < 2e-3


def test_rho_convergence():
    conv = G.rho_convergence(DRIFT, mesh=G.pole_mesh([(0.0, 0.0)], h=0.04))
    assert min(conv["ratios"]) >= 1.5


def test_energy_grows_as_rho_shrinks(laplace_green):
    out = G.energy_power(LAPLACE, mesh=laplace_green.mesh)
    assert -0.25 <= out["power"] < 0
    assert out["norms"][0] > out["norms"][-1]


def test_fit_power_bound_matches_hand_computation():
    # 3 x^(-3/2) <= 100 x^(-eps) on [0.01, 1] needs eps >= 3/2 - ln(100/3)/ln(100)
    x = np.geomspace(0.01, 1, 20)
    C, eps = G.fit_power_bound(x, 3 * x**-1.5, lambda e: -e)
    assert eps == pytest.approx(1.5 - np.log(100 / 3) / np.log(100), abs=1e-3)
    assert C <= 100


def test_estimate_suite(laplace_green, tmp_path):
    out = G.green_estimate_suite(laplace_green)
    assert {r["estimate_id"] for r in out["rows"]} == set(G.ESTIMATE_IDS)
    assert all(r["fitted_C"] <= 100 for r in out["rows"])
    assert out["powers"]["level_set"] < 0
    assert out["holder"]["eta"] > 0
    G.write_constants_table(out["rows"], tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == G.CSV_HEADER and len(lines) == len(out["rows"]) + 1


def test_lebesgue_power_near_pole():
    """||G||_{L^1(B_r)} scales like r^2 log(1/r) near the pole."""
    gf = G.averaged_green(LAPLACE, (0.0, 0.0), 0.005)
    out = G.green_estimate_suite(gf, {"r": np.geomspace(0.01, 0.05, 6)})
    assert out["powers"]["lebesgue_near_1"] >= 1.7


def test_gradient_exponent_range(laplace_green):
    with pytest.raises(DomainError):
        G.green_estimate_suite(laplace_green, {"s_grad": (2.0,)})


def test_dual_exponent_and_pole_grid():
    assert G.dual_exponent(np.inf) == 1.0
    assert G.dual_exponent(1.0) == np.inf
    assert G.dual_exponent(4.0) == pytest.approx(4 / 3)
    P = G.pole_grid(1.8)
    assert P.shape == (25, 2) and np.abs(P).max() == pytest.approx(1.08)


def test_green_constants():
    c = CoefficientSet(q2=4.0, p=2.0)
    out = G.green_constants(c, 1.0, h=0.1)
    assert len(out["rows"]) == 25
    assert out["C_q2"] > 0 and out["C_p"] > 0
    assert out["q2_dual"] == pytest.approx(4 / 3) and out["p_dual"] == 2.0
    # the central pole carries the largest Green's norm for the Laplacian
    centre = [r for r in out["rows"] if r["pole_x"] == 0 and r["pole_y"] == 0][0]
    assert centre["norm"] == pytest.approx(out["C_p"])
