import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llab.fem import DomainError
from llab.mesh import triangulate_disk
from llab.estimates import (GALLERY, SharpnessCase, annulus_samples, constant_fundamental_solution,
                            disk_lq_norm, drift_family_member, gallery_alpha, k_scan,
                            kummer_solution, landis_harness, m_scan, null_field_scenario,
                            rescale_problem, rescaling_identity, sharpness_gallery,
                            subsupersolution_multiplier, sucp_probe, symbolic_residual,
                            three_circle_check, vanishing_order)
from llab.fem import CoefficientSet, constant_scalar, constant_vector


@pytest.fixture(scope="module")
def laplace_fs():
    return constant_fundamental_solution(np.eye(2), triangulate_disk(2.0, 0.1, refine=[(0.0, 0.0)]))


@pytest.mark.parametrize("k", range(6))
def test_monomials_are_extremal(laplace_fs, k):
    rec = three_circle_check(lambda x, y: (x + 1j * y) ** k, laplace_fs, 0.3, 0.6, 1.1)
    assert abs(rec.slack) < 1e-12


def test_three_circle_orders_radii(laplace_fs):
    with pytest.raises(ValueError):
        three_circle_check(lambda x, y: x, laplace_fs, 0.6, 0.3, 1.1)


def test_null_fields_respect_three_circles():
    mesh = triangulate_disk(2.0, 0.1, refine=[(0.0, 0.0)])
    for seed in range(3):
        rec = null_field_scenario(seed, mesh)
        assert rec.slack >= -10 * rec.residual


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 5), c=st.floats(0.01, 100.0), phase=st.floats(0, 2 * np.pi))
def test_vanishing_order_of_harmonic_polynomials(n, c, phase):
    u = lambda x, y: c * np.real(np.exp(1j * phase) * (x + 1j * y) ** n)
    fit = vanishing_order(u, np.geomspace(0.5, 1e-3, 30))
    assert abs(fit.order - n) < 0.05


def test_vanishing_order_validation():
    with pytest.raises(ValueError):
        vanishing_order(lambda x, y: x, [0.1, 0.2])
    with pytest.raises(DomainError):
        vanishing_order(lambda x, y: 0 * x, [0.2, 0.1])


@pytest.mark.parametrize("n,c", [(1, 2.0), (3, 5.0)])
def test_kummer_profile_solves_drift_equation(n, c):
    """Finite-difference check of div(grad u - c e_r u) = 0."""
    u, _, _ = kummer_solution(n, c)
    h = 2e-4
    rng = np.random.default_rng(0)
    pts = 0.3 + 0.5 * rng.random((10, 2))

    def flux(x, y):
        r = np.hypot(x, y)
        ux = (u(x + h, y) - u(x - h, y)) / (2 * h)
        uy = (u(x, y + h) - u(x, y - h)) / (2 * h)
        return ux - c * x / r * u(x, y), uy - c * y / r * u(x, y)
    x, y = pts.T
    div = ((flux(x + h, y)[0] - flux(x - h, y)[0]) + (flux(x, y + h)[1] - flux(x, y - h)[1])) / (2 * h)
    scale = np.abs(u(x, y)) * c**2 + 1
    assert np.abs(div / scale).max() < 1e-4


def test_k_scan_slope():
    out = k_scan()
    assert out["slope"] <= 1.15
    assert np.all(np.diff(out["rows"][:, 1]) > 0)


def test_drift_family_member_normalization():
    n, c, u, log_u = drift_family_member(8.0)
    assert n >= 1
    pts = np.array([[1.0, 0.0]])
    assert u(1.0, 0.0) == pytest.approx(1.0)
    assert log_u(*pts.T)[0] == pytest.approx(0.0, abs=1e-12)


def test_m_scan_grows_logarithmically():
    out = m_scan([10, 100, 1000])
    assert np.all(np.diff(out["rows"][:, 1]) >= 0)
    assert np.isfinite(out["C"]) and out["C"] > 0


def test_sucp_probe():
    with np.errstate(divide="ignore"):
        flat = sucp_probe(lambda x, y: -1 / np.hypot(x, y), log=True)
    assert flat["infinite_order"]
    assert not sucp_probe(lambda x, y: np.real((x + 1j * y) ** 2))["infinite_order"]


def test_disk_norms_closed_form():
    W = lambda x, y: np.stack([x, y], -1)
    # int_{B_r} |x|^2 = pi r^4 / 2
    assert disk_lq_norm(W, (0, 0), 0.7, 2) ** 2 == pytest.approx(np.pi * 0.7**4 / 2, rel=1e-12)
    assert disk_lq_norm(W, (1, 0), 0.5, np.inf) == pytest.approx(1.5)


@settings(max_examples=30, deadline=None)
@given(q=st.sampled_from([2.0, 4.0, np.inf]), R=st.floats(0.2, 5.0), r=st.floats(0.2, 1.0),
       x0=st.floats(-1, 1), y0=st.floats(-1, 1))
def test_rescaling_identity(q, R, r, x0, y0):
    W = lambda x, y: np.stack([x * np.exp(-y), np.cos(x * y)], -1)
    assert rescaling_identity(W, (x0, y0), R, r, q)["relative"] < 1e-6


def test_rescaled_coefficients():
    c = CoefficientSet(W1=constant_vector((1.0, 2.0)), V=constant_scalar(3.0))
    p = rescale_problem(lambda x, y: x + y, c, (1.0, 0.0), 2.0)
    assert np.allclose(p.coeffs.W1(0.0, 0.0), [2.0, 4.0])
    assert p.coeffs.V(0.0, 0.0) == pytest.approx(12.0)
    assert p.u(0.5, 0.5) == pytest.approx(3.0)


def test_landis_decay():
    R = np.geomspace(10, 100, 10)
    t = landis_harness(lambda x, y: np.exp(-np.hypot(x, y)), R)
    assert abs(t.exponent - 1.0) <= 0.03
    assert landis_harness(lambda x, y: 1 + 0 * x, R[:3]).degenerate
    with pytest.raises(DomainError):
        landis_harness(lambda x, y: x, R, family="unknown")


@settings(max_examples=20, deadline=None)
@given(q=st.floats(2.5, 20.0), frac=st.floats(0.1, 0.9))
def test_norm_identity(q, frac):
    delta = frac * (q - 2) / 2
    alpha, delta = gallery_alpha(q, delta)
    norms = SharpnessCase("divergence_drift", alpha, q, delta).lq_norm_power()
    assert norms["quadrature"] == pytest.approx(norms["closed_form"], rel=1e-6)


def test_gallery_alpha():
    assert gallery_alpha(np.inf) == (1.0, 0.0)
    alpha, delta = gallery_alpha(6.0)
    assert delta == 1.0 and alpha == pytest.approx(1 / 3)
    with pytest.raises(DomainError):
        gallery_alpha(2.0)


@pytest.mark.parametrize("case", GALLERY)
@pytest.mark.parametrize("q", [np.inf, 6.0])
def test_gallery_residuals(case, q):
    rep = sharpness_gallery(case, q)
    assert rep["residual_max"] <= 1e-8
    sym = symbolic_residual(rep["case"])(rep["points"])
    assert np.abs(sym).max() <= 1e-8
    if case == "full_three_term":
        assert rep["sign_min"] >= 0 and rep["curl_max"] < 1e-8


def test_gallery_rejects_unknown_case():
    with pytest.raises(DomainError):
        sharpness_gallery("nope")


def test_annulus_samples():
    p = annulus_samples(500, 1.1, 5.0)
    r = np.hypot(*p.T)
    assert r.min() >= 1.1 and r.max() <= 5.0


@settings(max_examples=20, deadline=None)
@given(K=st.floats(0.01, 3.0))
def test_subsupersolution_multiplier(K):
    out = subsupersolution_multiplier(K)
    assert out["quadratic"] == pytest.approx(-K**2)
    assert out["ordered"] and out["envelope"]
