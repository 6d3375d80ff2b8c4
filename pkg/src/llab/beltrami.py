"""Beltrami operators, stream functions and first-order reductions.

Complex derivatives of P1 fields are taken per triangle,
``d = (d_x - i d_y) / 2`` and ``dbar = (d_x + i d_y) / 2``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from .fem import (CoefficientError, CoefficientSet, DomainError, assemble_bilinear,
                  constant_matrix, lebesgue_norm, load_vector, p1_gradient,
                  recovered_gradient, solve_dirichlet)
from .mesh import TriMesh

LOGGER = logging.getLogger(__name__)

ZERO_TOL = 1e-12


def _entries(A):
    A = np.asarray(A, dtype=float)
    return A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]


def det_plus_identity(A) -> np.ndarray:
    a11, a12, a21, a22 = _entries(A)
    d = (a11 + 1) * (a22 + 1) - a12 * a21
    if np.any(d <= 0):
        raise CoefficientError("det(A + I) <= 0; A is not elliptic")
    return d


def eta_nu(A):
    """Pointwise Beltrami coefficients ``(eta, nu)`` of a matrix field."""
    a11, a12, a21, a22 = _entries(A)
    d = det_plus_identity(A)
    detA = a11 * a22 - a12 * a21
    eta = ((a11 - a22) + 1j * (a12 + a21)) / d
    nu = ((detA - 1) + 1j * (a21 - a12)) / d
    return eta, nu


def kqc_bound(A, lam: float | None = None) -> np.ndarray:
    """Pointwise closed-form bound on ``|eta| + |nu|``.

    ``lam`` defaults to ``min sqrt(a11 a22 - (a12 + a21)^2 / 4)`` over the
    samples, the largest constant for which the bound holds.
    """
    a11, a12, a21, a22 = _entries(A)
    dsym = a11 * a22 - 0.25 * (a12 + a21) ** 2
    if lam is None:
        lam = float(np.sqrt(max(dsym.min(), 0.0)))
    tr, detA = a11 + a22, a11 * a22 - a12 * a21
    num = np.sqrt(np.maximum(tr**2 - 4 * lam**2, 0)) + np.sqrt(np.maximum((detA + 1) ** 2 - 4 * lam**2, 0))
    return num / (tr + detA + 1)


@dataclass(frozen=True)
class BeltramiData:
    """Beltrami coefficients and the reduced-equation coefficients.

    Arrays are per sample (nodes or triangles, depending on the producer).
    """

    eta: np.ndarray
    nu: np.ndarray
    K_qc: float
    eta_w: np.ndarray | None = None
    alpha: np.ndarray | None = None
    beta1: np.ndarray | None = None
    beta2: np.ndarray | None = None
    b_drift: np.ndarray | None = None

    def bound_ok(self) -> bool:
        s = np.abs(self.eta) + np.abs(self.nu)
        ok = bool(np.all(s <= self.K_qc * (1 + 1e-12) + 1e-15) and self.K_qc < 1)
        if self.eta_w is not None:
            ok = ok and bool(np.all(np.abs(self.eta_w) <= self.K_qc * (1 + 1e-12) + 1e-15))
        return ok


def beltrami_coefficients(A, lam: float | None = None) -> BeltramiData:
    """``eta``, ``nu`` and ``K_qc`` for matrix samples of shape (..., 2, 2)."""
    eta, nu = eta_nu(A)
    K = float(np.max(kqc_bound(A, lam)))
    return BeltramiData(eta, nu, K)


def eta_w(eta, nu, dw, tol: float = ZERO_TOL) -> np.ndarray:
    """``eta + nu conj(dw)/dw``, with ``eta + nu`` where ``|dw| < tol``."""
    dw = np.asarray(dw, dtype=complex)
    small = np.abs(dw) < tol
    ratio = np.where(small, 1.0, np.conj(dw) / np.where(small, 1.0, dw))
    return eta + nu * ratio


@dataclass(frozen=True)
class HatOperator:
    """``Dhat = (1 + a + i b)/2 d_x + (b + i(1 - a))/2 d_y`` and its matrix."""

    alpha: np.ndarray
    beta: np.ndarray

    @classmethod
    def from_eta(cls, eta) -> "HatOperator":
        eta = np.asarray(eta, dtype=complex)
        return cls(eta.real, eta.imag)

    @property
    def mu(self) -> np.ndarray:
        return self.alpha + 1j * self.beta

    @property
    def A_hat(self) -> np.ndarray:
        a, b = np.asarray(self.alpha, float), np.asarray(self.beta, float)
        den = 1 - a**2 - b**2
        if np.any(den <= 0):
            raise CoefficientError("alpha^2 + beta^2 must stay below 1")
        out = np.empty(np.shape(a) + (2, 2))
        out[..., 0, 0] = ((1 + a) ** 2 + b**2) / den
        out[..., 0, 1] = out[..., 1, 0] = 2 * b / den
        out[..., 1, 1] = ((1 - a) ** 2 + b**2) / den
        return out

    def det(self) -> np.ndarray:
        return np.linalg.det(self.A_hat)

    def apply(self, mesh: TriMesh, f: np.ndarray) -> np.ndarray:
        """Per-triangle ``Dhat f`` of a nodal complex field (constant alpha, beta
        or per-triangle arrays)."""
        g = p1_gradient(mesh, np.asarray(f, dtype=complex))
        a, b = self.alpha, self.beta
        return (1 + a + 1j * b) / 2 * g[:, 0] + (b + 1j * (1 - a)) / 2 * g[:, 1]


def complex_derivatives(mesh: TriMesh, f: np.ndarray):
    """Per-triangle ``(d f, dbar f)`` of a nodal field."""
    g = p1_gradient(mesh, np.asarray(f, dtype=complex))
    return (g[:, 0] - 1j * g[:, 1]) / 2, (g[:, 0] + 1j * g[:, 1]) / 2


def apply_D(mesh: TriMesh, f: np.ndarray, eta, nu) -> np.ndarray:
    """Per-triangle ``dbar f + eta d f + nu conj(d f)``."""
    d, db = complex_derivatives(mesh, f)
    return db + eta * d + nu * np.conj(d)


def _relative_l2(mesh: TriMesh, res: np.ndarray, ref: np.ndarray) -> float:
    a = mesh.areas
    den = np.sqrt(np.sum(a * np.abs(ref) ** 2))
    return float(np.sqrt(np.sum(a * np.abs(res) ** 2)) / max(den, 1e-300))


# Stream functions -----------------------------------------------------------

def _ray_rule(n_panels: int = 8, n_gauss: int = 8):
    """Composite Gauss rule on [0, 1] with panels halving toward 0."""
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    edges = np.concatenate([[0.0], 2.0 ** -np.arange(n_panels - 1, -1, -1)])
    t, wt = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        t.append(a + (b - a) * (x + 1) / 2)
        wt.append((b - a) / 2 * w)
    return np.concatenate(t), np.concatenate(wt)


def ray_integral(P, points: np.ndarray, origin=(0.0, 0.0)) -> np.ndarray:
    """``v(z) = int_0^1 [-P_2(o + t(z-o)) (x-o_x) + P_1(...) (y-o_y)] dt``.

    ``P`` is a callable mapping (..., 2) points to (..., 2) vectors.  The
    composite rule uses 64 points per ray graded toward the origin.
    """
    t, wt = _ray_rule()
    d = np.atleast_2d(points) - np.asarray(origin)
    pts = np.asarray(origin) + t[None, :, None] * d[:, None, :]
    Pv = P(pts)
    integrand = -Pv[..., 1] * d[:, None, 0] + Pv[..., 0] * d[:, None, 1]
    return integrand @ wt


def nodal_flux(mesh: TriMesh, u: np.ndarray, phi: np.ndarray | None,
               coeffs: CoefficientSet) -> np.ndarray:
    """Nodal ``P = phi A grad u - u A^T grad phi + u phi (W1 - W2)``.

    Gradients are recovered at nodes; coefficients are clamped at ``1/h``.
    """
    phi = np.ones(mesh.n_nodes) if phi is None else np.asarray(phi, dtype=float)
    u = np.asarray(u, dtype=float)
    gu = recovered_gradient(mesh, u)
    gp = recovered_gradient(mesh, phi)
    A, W1, W2, _ = coeffs.sample(mesh.nodes, clamp=1.0 / mesh.h)
    return (phi[:, None] * np.einsum("nij,nj->ni", A, gu)
            - u[:, None] * np.einsum("nji,nj->ni", A, gp)
            + (u * phi)[:, None] * (W1 - W2))


def flux_field(mesh: TriMesh, u: np.ndarray, phi: np.ndarray | None,
               coeffs: CoefficientSet):
    """Callable evaluating the P1 interpolant of :func:`nodal_flux`."""
    Pn = nodal_flux(mesh, u, phi, coeffs)
    shrink = 1 - 1e-12

    def P(pts):
        shape = pts.shape[:-1]
        flat = pts.reshape(-1, 2)
        tri, bary = mesh.locate(flat)
        if np.any(tri < 0):
            c = np.asarray(mesh.center)
            tri2, bary2 = mesh.locate(c + shrink * (flat[tri < 0] - c))
            tri[tri < 0], bary[tri < 0] = tri2, bary2
        if np.any(tri < 0):
            raise DomainError("ray quadrature point outside the mesh")
        out = np.einsum("ni,nid->nd", bary, Pn[mesh.triangles[tri]])
        return out.reshape(shape + (2,))
    return P


def flux_per_triangle(mesh: TriMesh, u: np.ndarray, phi: np.ndarray | None,
                      coeffs: CoefficientSet) -> np.ndarray:
    """``P`` at triangle centroids, shape (m, 2)."""
    return nodal_flux(mesh, u, phi, coeffs)[mesh.triangles].mean(axis=1)


def stream_function(mesh: TriMesh, u: np.ndarray, phi: np.ndarray | None,
                    coeffs: CoefficientSet, points: np.ndarray | None = None) -> np.ndarray:
    """Stream function of ``P`` with ``v(center) = 0`` by ray quadrature.

    Parameters
    ----------
    mesh : TriMesh
    u, phi : nodal arrays
        Solution and multiplier (``phi=None`` means ``phi = 1``).
    coeffs : CoefficientSet
    points : array, optional
        Evaluation points; defaults to the mesh nodes.

    Returns
    -------
    array of stream-function values.
    """
    pts = mesh.nodes if points is None else np.atleast_2d(points)
    return ray_integral(flux_field(mesh, u, phi, coeffs), pts, origin=mesh.center)


def stream_duality_error(mesh: TriMesh, v: np.ndarray, P_tri: np.ndarray) -> float:
    """Relative L^2 mismatch between ``(v_y, -v_x)`` and ``P``."""
    g = p1_gradient(mesh, v)
    rot = np.column_stack([g[:, 1], -g[:, 0]])
    return _relative_l2(mesh, np.linalg.norm(rot - P_tri, axis=1), np.linalg.norm(P_tri, axis=1))


def weak_divergence(mesh: TriMesh, P_tri: np.ndarray) -> np.ndarray:
    """``-int P . grad phi_i`` for interior hat functions."""
    return -load_vector(mesh, G=P_tri)[mesh.interior]


def stream_l1_table(mesh: TriMesh, v: np.ndarray, u: np.ndarray, r_grid, K: float,
                    q1: float, kappa: float = 2.0) -> np.ndarray:
    """Rows ``(r, ||v||_{L^1(B_r)}, bound shape, ratio)``.

    The bound shape is ``r^2 (1 + r^{2-4/q1} K^2) ||u||_{L^inf(B_{kappa r})}``.
    """
    from .fem import Region
    rows = []
    for r in r_grid:
        l1 = lebesgue_norm(mesh, v, 1, Region(r))
        sup = lebesgue_norm(mesh, u, np.inf, Region(min(kappa * r, mesh.radius)))
        e = 2.0 if np.isinf(q1) else 2 - 4 / q1
        shape = r**2 * (1 + r**e * K**2) * sup
        rows.append((r, l1, shape, l1 / shape if shape > 0 else np.inf))
    return np.array(rows)


# Reduced first-order equation ------------------------------------------------

def alpha_coefficient(A, grad_Phi) -> np.ndarray:
    """Coefficient multiplying ``grad Phi`` in the reduced equation."""
    a11, a12, a21, a22 = _entries(A)
    d = det_plus_identity(A)
    s = a12 + a21
    cx = (2 * a11 * (1 + a22) - s * a12) + 1j * (s + a11 * (a12 - a21))
    cy = (s - a22 * (a12 - a21)) + 1j * (2 * a22 * (1 + a11) - s * a21)
    g = np.asarray(grad_Phi)
    return (cx * g[..., 0] + cy * g[..., 1]) / (2 * d)


def beta_coefficient(A, W) -> np.ndarray:
    """Coefficient contributed by a drift ``W`` in the reduced equation."""
    a11, a12, a21, a22 = _entries(A)
    d = det_plus_identity(A)
    W = np.asarray(W)
    w1, w2 = W[..., 0], W[..., 1]
    return (-w1 * (a22 + 1) + w2 * a12 - 1j * w2 * (a11 + 1) + 1j * w1 * a21) / (2 * d)


def drift_b(A, grad_Phi, W1, W2) -> np.ndarray:
    """``b = -A^T grad Phi + W1 - W2``."""
    return -np.einsum("...ji,...j->...i", A, grad_Phi) + W1 - W2


@dataclass
class ReducedResult:
    w: np.ndarray
    Dw: np.ndarray
    residual: np.ndarray
    relative: float
    data: BeltramiData


def reduced_field_residual(mesh: TriMesh, u: np.ndarray, phi: np.ndarray | None,
                           v: np.ndarray, coeffs: CoefficientSet) -> ReducedResult:
    """Residual of ``D w = (alpha + beta1 - beta2)(w + conj w)`` with ``w = phi u + i v``.

    Everything is evaluated per triangle: coefficients at centroids,
    derivatives from P1 gradients, ``w`` by vertex averaging.  The relative
    residual is taken against ``|d w| + |dbar w|`` in L^2.
    """
    phi = np.ones(mesh.n_nodes) if phi is None else np.asarray(phi, dtype=float)
    w = phi * u + 1j * v
    A, W1, W2, _ = coeffs.sample(mesh.centroids, clamp=1.0 / mesh.h)
    eta, nu = eta_nu(A)
    gPhi = p1_gradient(mesh, np.log(phi))
    al = alpha_coefficient(A, gPhi)
    b1, b2 = beta_coefficient(A, W1), beta_coefficient(A, W2)
    d, db = complex_derivatives(mesh, w)
    Dw = db + eta * d + nu * np.conj(d)
    wc = w[mesh.triangles].mean(axis=1)
    res = Dw - (al + b1 - b2) * (wc + np.conj(wc))
    rel = _relative_l2(mesh, res, np.abs(d) + np.abs(db))
    data = BeltramiData(eta, nu, float(np.max(kqc_bound(A))), eta_w(eta, nu, d),
                        al, b1, b2, drift_b(A, gPhi, W1, W2))
    return ReducedResult(w, Dw, res, rel, data)


# Second-order decomposition --------------------------------------------------

def _num_grad(F, x, y, step: float = 1e-5):
    fx = (F(x + step, y) - F(x - step, y)) / (2 * step)
    fy = (F(x, y + step) - F(x, y - step)) / (2 * step)
    return fx, fy


def normalize_determinant(A, W=None):
    """Divide through by ``sqrt(det A)``.

    Returns callables ``(A_n, W_n)`` with ``A_n = A / sqrt(det A)`` and
    ``W_n = A grad(1/sqrt(det A)) + W / sqrt(det A)``; the gradient is taken
    by central differences.
    """
    def inv_sqrt_det(x, y):
        return 1.0 / np.sqrt(np.linalg.det(np.asarray(A(x, y), float)))

    def A_n(x, y):
        return np.asarray(A(x, y), float) * inv_sqrt_det(x, y)[..., None, None]

    def W_n(x, y):
        gx, gy = _num_grad(inv_sqrt_det, x, y)
        out = np.einsum("...ij,...j->...i", np.asarray(A(x, y), float), np.stack([gx, gy], -1))
        if W is not None:
            out = out + np.asarray(W(x, y), float) * inv_sqrt_det(x, y)[..., None]
        return out
    return A_n, W_n


@dataclass(frozen=True)
class Decomposition:
    """``div(A grad) = (D + Gamma) Dt`` for symmetric, det-one ``A``."""

    A: object

    def _check(self, Av):
        if not np.allclose(Av[..., 0, 1], Av[..., 1, 0], atol=1e-12):
            raise CoefficientError("decomposition requires a symmetric matrix")
        if not np.allclose(np.linalg.det(Av), 1.0, atol=1e-8):
            raise CoefficientError("decomposition requires det A = 1 (normalize first)")

    def D_coeffs(self, x, y):
        Av = np.asarray(self.A(x, y), float)
        self._check(Av)
        a11, a12, _, a22 = _entries(Av)
        d = det_plus_identity(Av)
        return ((a11 + 1) + 1j * a12) / d, (a12 + 1j * (a22 + 1)) / d

    def Dt_coeffs(self, x, y):
        Av = np.asarray(self.A(x, y), float)
        self._check(Av)
        a11, a12, _, a22 = _entries(Av)
        return (1 + a11) - 1j * a12, a12 - 1j * (1 + a22)

    def Gamma(self, x, y):
        Av = np.asarray(self.A(x, y), float)
        self._check(Av)
        a11, a12, _, a22 = _entries(Av)
        d = det_plus_identity(Av)
        dx11, dy11 = _num_grad(lambda s, t: np.asarray(self.A(s, t), float)[..., 0, 0], x, y)
        dx12, dy12 = _num_grad(lambda s, t: np.asarray(self.A(s, t), float)[..., 0, 1], x, y)
        ga = a11 + a22 + 2 * a11 * a22
        gb = 2 * a12 * (1 + a11)
        gc = a12 * (a22 - a11)
        gd = (1 + a11) ** 2 - a12**2
        re = ga * dx11 - gb * dx12 + gc * dy11 + gd * dy12
        im = gc * dx11 + gd * dx12 - ga * dy11 + gb * dy12
        return (re + 1j * im) / (a11 * d**2)


def decompose_second_order(A, W=None, symmetric_tol: float = 1e-12):
    """Normalize to ``det A = 1`` and return the factorization data.

    Returns
    -------
    (Decomposition, W_n) where ``W_n`` is the induced drift callable.
    """
    probe = np.asarray(A(np.array([0.0, 0.3]), np.array([0.0, -0.2])), float)
    if np.abs(probe[..., 0, 1] - probe[..., 1, 0]).max() > symmetric_tol:
        raise CoefficientError("decomposition requires a symmetric matrix")
    A_n, W_n = normalize_determinant(A, W)
    return Decomposition(A_n), W_n


def decomposition_residual(mesh: TriMesh, dec: Decomposition, u,
                           inner: float = 0.8) -> dict:
    """Relative L^2 mismatch between ``div(A grad u)`` and ``(D + Gamma) Dt u``.

    ``u`` is a callable (gradient by central differences at nodes) or a
    nodal array (recovered gradient).  The comparison is restricted to
    triangles with centroids inside ``inner * radius``.
    """
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    if callable(u):
        gu = np.column_stack(_num_grad(u, x, y))
    else:
        gu = recovered_gradient(mesh, u)
    A = np.asarray(dec.A(x, y), float)
    flux = np.einsum("nij,nj->ni", A, gu)
    div = p1_gradient(mesh, flux[:, 0])[:, 0] + p1_gradient(mesh, flux[:, 1])[:, 1]
    tx, ty = dec.Dt_coeffs(x, y)
    F = tx * gu[:, 0] + ty * gu[:, 1]
    c = mesh.centroids
    cx, cy = dec.D_coeffs(c[:, 0], c[:, 1])
    gF = p1_gradient(mesh, F)
    rhs = cx * gF[:, 0] + cy * gF[:, 1] + dec.Gamma(c[:, 0], c[:, 1]) * F[mesh.triangles].mean(axis=1)
    keep = np.linalg.norm(c - np.asarray(mesh.center), axis=1) < inner * mesh.radius
    a = mesh.areas[keep]
    num = np.sqrt(np.sum(a * np.abs(div[keep] - rhs[keep]) ** 2))
    den = np.sqrt(np.sum(a * np.abs(div[keep]) ** 2))
    G = dec.Gamma(c[:, 0], c[:, 1])
    return {"relative": float(num / max(den, 1e-300)), "gamma_sup": float(np.abs(G).max())}


def upsilon_field(A, W, Dtu, tol: float = ZERO_TOL):
    """``Upsilon~`` with ``W . grad u = Upsilon~ Dt u`` pointwise.

    Parameters
    ----------
    A : (..., 2, 2) samples of a symmetric matrix
    W : (..., 2) drift samples
    Dtu : complex samples of ``Dt u``

    Returns
    -------
    (Upsilon~, e, f); ``Upsilon~ = 0`` where ``|Dt u| < tol``.
    """
    a11, a12, _, a22 = _entries(A)
    d = det_plus_identity(A)
    W = np.asarray(W, float)
    e = ((1 + a22) * W[..., 0] - a12 * W[..., 1]) / d
    f = (-a12 * W[..., 0] + (1 + a11) * W[..., 1]) / d
    Ups = e + 1j * f
    Dtu = np.asarray(Dtu, dtype=complex)
    small = np.abs(Dtu) < tol
    safe = np.where(small, 1.0, Dtu)
    Ut = np.where(small, 0.0, 0.5 * (Ups + np.conj(Ups) * np.conj(safe) / safe))
    return Ut, e, f


# Curl-free potentials and the rotation reduction -----------------------------

def weak_curl(mesh: TriMesh, W) -> np.ndarray:
    """Nodal averages ``int (W_1 d_y phi_i - W_2 d_x phi_i) / int phi_i``."""
    from .fem import QUAD3, quadrature_points
    bary, w = QUAD3
    pts, _ = quadrature_points(mesh, QUAD3)
    Wv = np.asarray(W(pts[..., 0], pts[..., 1]), float)
    G = mesh.basis_gradients()
    rot = np.stack([G[..., 1], -G[..., 0]], -1)
    loc = mesh.areas[:, None] * np.einsum("q,tqd,tid->ti", w, Wv, rot)
    num = np.zeros(mesh.n_nodes)
    np.add.at(num, mesh.triangles.ravel(), loc.ravel())
    mass = np.zeros(mesh.n_nodes)
    np.add.at(mass, mesh.triangles.ravel(), np.repeat(mesh.areas / 3, 3))
    I = mesh.interior
    return num[I] / mass[I]


class CurlError(ValueError):
    """Field is not curl-free; carries the worst location."""

    def __init__(self, msg, witness):
        super().__init__(msg)
        self.witness = witness


def curl_free_potential(W, points: np.ndarray, mesh: TriMesh | None = None,
                        tol: float = 1e-6) -> np.ndarray:
    """``Phi(x, y) = int_0^x W_1(t, y) dt + int_0^y W_2(0, s) ds``.

    When a mesh is supplied the discrete curl is checked first (relative to
    ``max |W|`` over the domain radius) and a :class:`CurlError` with the
    worst node is raised if it exceeds ``tol``.
    """
    if mesh is not None:
        c = weak_curl(mesh, W)
        scale = lebesgue_norm(mesh, W, np.inf) / mesh.radius
        k = int(np.argmax(np.abs(c)))
        if abs(c[k]) > tol * max(scale, 1e-300) + tol:
            node = mesh.nodes[mesh.interior[k]]
            raise CurlError(f"field is not curl-free: curl {c[k]:.3e} near {node.tolist()}",
                            node)
    pts = np.atleast_2d(np.asarray(points, float))
    x, y = pts[:, 0], pts[:, 1]

    def integrand(s):
        a = np.asarray(W(s * x, y), float)[..., 0] * x
        b = np.asarray(W(np.zeros_like(y), s * y), float)[..., 1] * y
        return a + b
    val, _ = quad_vec(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-11)
    return val


J_ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def _rot(x, y):
    return y, -x


@dataclass(frozen=True)
class RotatedProblem:
    mesh: TriMesh
    u: np.ndarray
    A: object
    W: object


def rotate_reduction(mesh: TriMesh, u: np.ndarray, A, W1) -> RotatedProblem:
    """Rotated problem for ``u~(x, y) = u(y, -x)``.

    The rotated mesh has nodes ``(-y, x)`` so that nodal values carry over.
    ``A~ = [[a22, -a12], [-a12, a11]]`` and ``W~ = J W1`` are evaluated at
    ``(y, -x)``.  ``u~`` then solves ``-div(A~ grad u~) - W~ . grad u~ = 0``
    whenever ``u`` solves ``-div(A grad u + W1 u) = 0`` with ``div W1 = 0``.
    """
    from dataclasses import replace as _replace
    nodes = np.column_stack([-mesh.nodes[:, 1], mesh.nodes[:, 0]])
    c = np.asarray(mesh.center)
    rmesh = _replace(mesh, nodes=nodes, center=(-c[1], c[0]), _cache={})

    def At(x, y):
        a = np.asarray(A(*_rot(x, y)), float)
        out = np.empty_like(a)
        out[..., 0, 0] = a[..., 1, 1]
        out[..., 1, 1] = a[..., 0, 0]
        out[..., 0, 1] = -a[..., 0, 1]
        out[..., 1, 0] = -a[..., 1, 0]
        return out

    def Wt(x, y):
        return np.einsum("ij,...j->...i", J_ROT, np.asarray(W1(*_rot(x, y)), float))
    return RotatedProblem(rmesh, np.asarray(u).copy(), At, Wt)


def rotation_residuals(mesh: TriMesh, u: np.ndarray, A, W1) -> dict:
    """Interior residuals of the original and rotated discrete problems."""
    orig = assemble_bilinear(mesh, CoefficientSet(A=A, W1=W1, lam=0.0, Lam=np.inf), check=False)
    rp = rotate_reduction(mesh, u, A, W1)
    Wneg = lambda x, y: -np.asarray(rp.W(x, y))
    rot = assemble_bilinear(rp.mesh, CoefficientSet(A=rp.A, W2=Wneg, lam=0.0, Lam=np.inf),
                            check=False)
    r0 = float(np.abs((orig.matrix @ u)[mesh.interior]).max())
    r1 = float(np.abs((rot.matrix @ rp.u)[rp.mesh.interior]).max())
    return {"original": r0, "rotated": r1}


# Hat-operator companions -----------------------------------------------------

def hat_residuals(mesh: TriMesh, f: np.ndarray, hat: HatOperator) -> dict:
    """Diagnostics for a nodal field with ``Dhat f`` approximately 0.

    Returns the relative ``Dhat`` residual and, for ``Re f``, ``Im f`` and
    ``log|f|``, the sup distance to the discrete ``Lhat``-harmonic extension
    of their boundary values (relative to the field's sup).
    """
    d, db = complex_derivatives(mesh, f)
    Df = hat.apply(mesh, f)
    out = {"dhat": _relative_l2(mesh, Df, np.abs(d) + np.abs(db))}
    Ah = hat.A_hat
    Acall = constant_matrix(Ah) if np.ndim(Ah) == 2 else None
    if Acall is None:
        raise DomainError("hat_residuals requires constant alpha, beta")
    op = assemble_bilinear(mesh, CoefficientSet(A=Acall, lam=0.0, Lam=np.inf), check=False)
    for name, g in (("re", np.real(f)), ("im", np.imag(f)), ("log_abs", np.log(np.abs(f)))):
        ext = solve_dirichlet(op, g=g)
        out[name] = float(np.abs(ext - g).max() / max(np.abs(g).max(), 1e-300))
    return out
