"""P1 finite elements for divergence-form operators with lower-order terms.

The bilinear form assembled here is

    B[u, v] = int A grad u . grad v + W1 u . grad v + (W2 . grad u) v + V u v

with row index = test function and column index = trial function, so that
``M @ u`` evaluates ``B[u, phi_i]`` for every hat function ``phi_i``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import gmres, lobpcg, spilu, splu, LinearOperator

from .mesh import TriMesh

LOGGER = logging.getLogger(__name__)

# Edge-midpoint rule, exact for quadratics.
QUAD3 = (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
         np.full(3, 1.0 / 3.0))

_a1, _a2 = 0.470142064105115, 0.101286507323456
_w1, _w2 = 0.132394152788506, 0.125939180544827
# Seven-point rule, exact for polynomials of degree 5.
QUAD7 = (np.array([[1 / 3, 1 / 3, 1 / 3],
                   [_a1, _a1, 1 - 2 * _a1], [_a1, 1 - 2 * _a1, _a1], [1 - 2 * _a1, _a1, _a1],
                   [_a2, _a2, 1 - 2 * _a2], [_a2, 1 - 2 * _a2, _a2], [1 - 2 * _a2, _a2, _a2]]),
         np.array([0.225, _w1, _w1, _w1, _w2, _w2, _w2]))


class CoefficientError(ValueError):
    """Coefficient field violates ellipticity or boundedness."""


class NumericalError(RuntimeError):
    """A linear solve failed to converge."""


class DomainError(ValueError):
    """Integration region or parameter outside the admissible domain."""


def identity_matrix(x, y):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (2, 2))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    return out


def zero_vector(x, y):
    return np.zeros(np.shape(x) + (2,))


def zero_scalar(x, y):
    return np.zeros(np.shape(x))


def constant_matrix(a) -> Callable:
    a = np.asarray(a, dtype=float).reshape(2, 2)

    def field(x, y):
        return np.broadcast_to(a, np.shape(x) + (2, 2)).copy()
    return field


def constant_vector(w) -> Callable:
    w = np.asarray(w, dtype=float).reshape(2)

    def field(x, y):
        return np.broadcast_to(w, np.shape(x) + (2,)).copy()
    return field


def constant_scalar(c: float) -> Callable:
    def field(x, y):
        return np.full(np.shape(x), float(c))
    return field


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients of ``-div(A grad u + W1 u) + W2 . grad u + V u``.

    Fields are callables of ``(x, y)`` returning arrays of shape
    ``x.shape + (2, 2)``, ``x.shape + (2,)`` or ``x.shape``.  Metadata
    records the constants the hypotheses are phrased in.
    """

    A: Callable = identity_matrix
    W1: Callable = zero_vector
    W2: Callable = zero_vector
    V: Callable = zero_scalar
    lam: float = 1.0
    Lam: float = 1.0
    mu: float | None = None
    q1: float = np.inf
    q2: float = np.inf
    p: float = np.inf
    K: float = 1.0
    name: str = "custom"
    norms: dict = field(default_factory=dict, compare=False)

    def sample(self, pts: np.ndarray, clamp: float | None = None):
        """Evaluate (A, W1, W2, V) at points of shape (..., 2)."""
        x, y = pts[..., 0], pts[..., 1]
        A = np.broadcast_to(self.A(x, y), x.shape + (2, 2)).astype(float)
        W1 = np.broadcast_to(self.W1(x, y), x.shape + (2,)).astype(float)
        W2 = np.broadcast_to(self.W2(x, y), x.shape + (2,)).astype(float)
        V = np.broadcast_to(self.V(x, y), x.shape).astype(float)
        if clamp is not None:
            W1, W2 = _clamp_vec(W1, clamp), _clamp_vec(W2, clamp)
            V = np.clip(np.nan_to_num(V, nan=0.0, posinf=clamp, neginf=-clamp), -clamp, clamp)
        return A, W1, W2, V

    def with_norms(self, mesh: TriMesh) -> "CoefficientSet":
        """Copy with Lebesgue norms of W1, W2, V on the mesh domain stored."""
        norms = {"W1": lebesgue_norm(mesh, self.W1, self.q1),
                 "W2": lebesgue_norm(mesh, self.W2, self.q2),
                 "V": lebesgue_norm(mesh, self.V, self.p)}
        return replace(self, norms=norms)

    def adjoint(self) -> "CoefficientSet":
        """Coefficients of the formal adjoint: A -> A^T, W1 <-> W2."""
        A = self.A
        return replace(self, A=lambda x, y: np.swapaxes(A(x, y), -1, -2),
                       W1=self.W2, W2=self.W1, q1=self.q2, q2=self.q1,
                       name=self.name + "*", norms={})

    def scaled_drift(self, factor: float) -> "CoefficientSet":
        W1 = self.W1
        return replace(self, W1=lambda x, y: factor * np.asarray(W1(x, y)),
                       K=self.K * factor, norms={})


def _clamp_vec(W, cap):
    W = np.nan_to_num(W, nan=0.0, posinf=cap, neginf=-cap)
    mag = np.linalg.norm(W, axis=-1, keepdims=True)
    scale = np.where(mag > cap, cap / np.maximum(mag, 1e-300), 1.0)
    return W * scale


def quadrature_points(mesh: TriMesh, rule=QUAD3):
    """Physical quadrature points (m, nq, 2) and weights (m, nq)."""
    bary, w = rule
    pts = np.einsum("qi,tid->tqd", bary, mesh.vertices)
    return pts, mesh.areas[:, None] * w[None, :]


def check_coefficients(mesh: TriMesh, coeffs: CoefficientSet, rule=QUAD3, tol=1e-12) -> None:
    """Verify ellipticity and the bound on A at quadrature nodes."""
    pts, _ = quadrature_points(mesh, rule)
    A = coeffs.sample(pts)[0]
    sym = 0.5 * (A + np.swapaxes(A, -1, -2))
    lam_min = np.linalg.eigvalsh(sym)[..., 0]
    if np.any(lam_min < coeffs.lam * (1 - 1e-9) - tol):
        t, q = np.unravel_index(np.argmin(lam_min), lam_min.shape)
        raise CoefficientError(f"ellipticity fails at {pts[t, q].tolist()}: "
                               f"smallest eigenvalue {lam_min[t, q]:.3g} < lambda={coeffs.lam}")
    if np.any(np.abs(A) > coeffs.Lam * (1 + 1e-9) + tol):
        t, q = np.unravel_index(np.argmax(np.abs(A).max(axis=(-1, -2))), A.shape[:2])
        raise CoefficientError(f"|a_ij| exceeds Lambda={coeffs.Lam} at {pts[t, q].tolist()}")


@dataclass(frozen=True)
class SparseOperator:
    """Assembled bilinear form on a mesh."""

    matrix: sp.csr_matrix
    mesh: TriMesh
    terms: tuple
    adjoint: bool = False

    @property
    def symmetric(self) -> bool:
        M = self.matrix
        diff = abs(M - M.T).max() if M.nnz else 0.0
        return bool(diff <= 1e-12 * max(abs(M).max(), 1e-300))

    @property
    def T(self) -> "SparseOperator":
        return SparseOperator(self.matrix.T.tocsr(), self.mesh, self.terms, not self.adjoint)


def assemble_bilinear(mesh: TriMesh, coeffs: CoefficientSet, adjoint: bool = False,
                      clamp: bool = True, check: bool = True) -> SparseOperator:
    """Assemble the P1 matrix of the bilinear form (or its adjoint).

    Parameters
    ----------
    mesh : TriMesh
    coeffs : CoefficientSet
    adjoint : bool
        Assemble ``B*[u, v] = B[v, u]``: A is transposed and the roles of
        W1 and W2 are exchanged.
    clamp : bool
        Clamp samples of W1, W2, V at magnitude ``1/h``.
    check : bool
        Verify ellipticity at the quadrature nodes first.

    Returns
    -------
    SparseOperator
    """
    if adjoint:
        coeffs = coeffs.adjoint()
    if check:
        check_coefficients(mesh, coeffs)
    bary, w = QUAD3
    pts, _ = quadrature_points(mesh, QUAD3)
    A, W1, W2, V = coeffs.sample(pts, clamp=1.0 / mesh.h if clamp else None)
    G = mesh.basis_gradients()
    area = mesh.areas

    Abar = np.einsum("q,tqde->tde", w, A)
    local = np.einsum("tid,tde,tje->tij", G, Abar, G)
    # W1 u . grad v: trial j enters through its value, test i through its gradient
    local += np.einsum("q,qj,tqd,tid->tij", w, bary, W1, G)
    # (W2 . grad u) v
    local += np.einsum("q,qi,tqd,tjd->tij", w, bary, W2, G)
    local += np.einsum("q,qi,qj,tq->tij", w, bary, bary, V)
    local *= area[:, None, None]

    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    M = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M.sum_duplicates()
    terms = tuple(name for name, arr in (("A", A), ("W1", W1), ("W2", W2), ("V", V))
                  if name == "A" or np.any(arr != 0))
    return SparseOperator(M, mesh, terms, adjoint)


def _nodal_or_callable(mesh, data, pts, shape_tail=()):
    """Values of ``data`` at points ``pts`` (m, nq, 2) given as callable,
    scalar constant, nodal array or per-triangle array."""
    m, nq = pts.shape[:2]
    if data is None:
        return np.zeros((m, nq) + shape_tail)
    if callable(data):
        return np.broadcast_to(data(pts[..., 0], pts[..., 1]), (m, nq) + shape_tail)
    arr = np.asarray(data)
    if arr.ndim == len(shape_tail):
        return np.broadcast_to(arr, (m, nq) + shape_tail)
    if arr.shape[0] == mesh.n_nodes:
        bary = _bary_of(mesh, pts)
        return np.einsum("tqi,ti...->tq...", bary, arr[mesh.triangles])
    if arr.shape[0] == mesh.n_triangles:
        return np.broadcast_to(arr[:, None], (m, nq) + shape_tail)
    raise ValueError(f"field of shape {arr.shape} does not match mesh")


def _bary_of(mesh, pts):
    # pts were generated from a rule on each triangle; recover barycentrics
    v = mesh.vertices
    a, b, c = v[:, None, 0], v[:, None, 1], v[:, None, 2]
    v0, v1, v2 = b - a, c - a, pts - a
    den = v0[..., 0] * v1[..., 1] - v1[..., 0] * v0[..., 1]
    l1 = (v2[..., 0] * v1[..., 1] - v1[..., 0] * v2[..., 1]) / den
    l2 = (v0[..., 0] * v2[..., 1] - v2[..., 0] * v0[..., 1]) / den
    return np.stack([1 - l1 - l2, l1, l2], axis=-1)


def load_vector(mesh: TriMesh, f=None, G=None, rule=QUAD3) -> np.ndarray:
    """Right-hand side ``F_i = int f phi_i + G . grad phi_i``."""
    bary, w = rule
    pts, wts = quadrature_points(mesh, rule)
    fv = _nodal_or_callable(mesh, f, pts)
    Gv = _nodal_or_callable(mesh, G, pts, (2,))
    grads = mesh.basis_gradients()
    dtype = complex if (np.iscomplexobj(fv) or np.iscomplexobj(Gv)) else float
    local = np.einsum("tq,qi,tq->ti", wts, bary, fv).astype(dtype)
    local += np.einsum("tq,tqd,tid->ti", wts, Gv, grads)
    F = np.zeros(mesh.n_nodes, dtype=dtype)
    np.add.at(F, mesh.triangles.ravel(), local.ravel())
    return F


def _boundary_values(mesh: TriMesh, g) -> np.ndarray:
    b = mesh.boundary_nodes
    if g is None:
        return np.zeros(len(b))
    if callable(g):
        return np.asarray(g(mesh.nodes[b, 0], mesh.nodes[b, 1]), dtype=float) * np.ones(len(b))
    g = np.asarray(g, dtype=float)
    if g.ndim == 0:
        return np.full(len(b), float(g))
    if g.shape[0] == mesh.n_nodes:
        return g[b]
    if g.shape[0] == len(b):
        return g
    raise ValueError("boundary data does not match mesh")


@dataclass
class _Factor:
    lu: object
    interior: np.ndarray


def factorize(op: SparseOperator):
    """Sparse LU factorization of the interior block, reusable across solves."""
    I = op.mesh.interior
    A_II = op.matrix[I][:, I].tocsc()
    return _Factor(splu(A_II), I)


def solve_dirichlet(op: SparseOperator, g=None, f=None, G=None, rhs: np.ndarray | None = None,
                    solver: str = "direct", tol: float = 1e-10, factor=None) -> np.ndarray:
    """Solve the discrete weak problem with Dirichlet data ``g``.

    Parameters
    ----------
    op : SparseOperator
    g : callable, array or scalar, optional
        Boundary values (nodal array, boundary-only array, callable or constant).
    f, G : optional
        Scalar and vector sources of the functional ``int f v + G . grad v``.
    rhs : array, optional
        A precomputed load vector (overrides ``f`` and ``G``).
    solver : {"direct", "gmres"}
        Sparse LU or restarted GMRES with an incomplete-LU preconditioner.
    tol : float
        Relative residual tolerance for the iterative solver.
    factor : optional
        Result of :func:`factorize` to reuse.

    Returns
    -------
    (n,) array of nodal values; boundary entries equal ``g`` exactly.
    """
    mesh = op.mesh
    I, B = mesh.interior, mesh.boundary_nodes
    F = load_vector(mesh, f, G) if rhs is None else np.asarray(rhs)
    u = np.zeros(mesh.n_nodes, dtype=np.result_type(F.dtype, float))
    u[B] = _boundary_values(mesh, g)
    M = op.matrix
    b = F[I] - M[I][:, B] @ u[B]
    if solver == "direct":
        if factor is None:
            factor = factorize(op)
        u[I] = factor.lu.solve(b) if not np.iscomplexobj(b) else (
            factor.lu.solve(b.real) + 1j * factor.lu.solve(b.imag))
    elif solver == "gmres":
        A_II = M[I][:, I].tocsc()
        ilu = spilu(A_II, drop_tol=1e-5, fill_factor=20)
        pre = LinearOperator(A_II.shape, ilu.solve)
        x, info = gmres(A_II, b, M=pre, rtol=tol, atol=0.0, restart=60, maxiter=500)
        res = np.linalg.norm(A_II @ x - b) / max(np.linalg.norm(b), 1e-300)
        if info != 0 or res > 10 * tol:
            raise NumericalError(f"GMRES did not converge: info={info}, relative residual {res:.3e}")
        u[I] = x
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return u


def galerkin_residual(op: SparseOperator, u: np.ndarray, rhs: np.ndarray) -> float:
    """Max over interior hat functions of |B[u, phi_i] - rhs_i|."""
    I = op.mesh.interior
    return float(np.abs((op.matrix @ u - rhs)[I]).max()) if len(I) else 0.0


@dataclass(frozen=True)
class Region:
    """Annulus ``inner <= |z - center| < outer`` (a disk when inner = 0)."""

    outer: float
    inner: float = 0.0
    center: tuple = (0.0, 0.0)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(pts - np.asarray(self.center), axis=-1)
        return (r < self.outer) & (r >= self.inner)


def _graded_triangle_rule(tri: np.ndarray, depth: int, rule=QUAD7):
    """Quadrature on a triangle whose first vertex is singular.

    The triangle is split repeatedly at edge midpoints; the three children
    away from the singular vertex take the regular rule.
    """
    bary, w = rule
    pts, wts = [], []
    p, a, b = tri
    for _ in range(depth):
        mpa, mpb, mab = (p + a) / 2, (p + b) / 2, (a + b) / 2
        for child in ((mpa, a, mab), (mpb, mab, b), (mpa, mab, mpb)):
            c = np.array(child)
            area = 0.5 * abs((c[1, 0] - c[0, 0]) * (c[2, 1] - c[0, 1]) - (c[1, 1] - c[0, 1]) * (c[2, 0] - c[0, 0]))
            pts.append(bary @ c)
            wts.append(area * w)
        a, b = mpa, mpb
    c = np.array([p, a, b])
    area = 0.5 * abs((c[1, 0] - c[0, 0]) * (c[2, 1] - c[0, 1]) - (c[1, 1] - c[0, 1]) * (c[2, 0] - c[0, 0]))
    pts.append(bary @ c)
    wts.append(area * w)
    return np.concatenate(pts), np.concatenate(wts)


def field_samples(mesh: TriMesh, data, rule=QUAD7, singular_points=(), depth: int = 14):
    """Quadrature points, weights and field magnitudes over the mesh.

    ``data`` may be a callable (scalar or vector valued), a nodal array
    (scalar, complex or (n, 2)), or a per-triangle array.
    """
    pts, wts = quadrature_points(mesh, rule)
    if callable(data):
        vals = np.asarray(data(pts[..., 0], pts[..., 1]))
    else:
        arr = np.asarray(data)
        tail = arr.shape[1:]
        vals = _nodal_or_callable(mesh, arr, pts, tail)
    vec = vals.ndim == 3
    mag = np.linalg.norm(vals, axis=-1) if vec else np.abs(vals)
    pts, wts, mag = pts.reshape(-1, 2), wts.ravel(), mag.reshape(-1)
    if singular_points and callable(data):
        drop = np.zeros(mesh.n_triangles, dtype=bool)
        extra_p, extra_w = [], []
        for s in singular_points:
            s = np.asarray(s, dtype=float)
            d = np.linalg.norm(mesh.vertices - s, axis=-1)
            hit = np.flatnonzero(d.min(axis=1) < 1e-12 * max(mesh.h, 1.0))
            if len(hit) == 0:
                idx, _ = mesh.locate(s[None])
                hit = idx[idx >= 0]
                pieces = [np.array([s, mesh.vertices[t][i], mesh.vertices[t][(i + 1) % 3]])
                          for t in hit for i in range(3)]
            else:
                pieces = []
                for t in hit:
                    v = mesh.vertices[t]
                    k = int(np.argmin(np.linalg.norm(v - s, axis=1)))
                    pieces.append(np.array([v[k], v[(k + 1) % 3], v[(k + 2) % 3]]))
            drop[hit] = True
            for tri in pieces:
                p_, w_ = _graded_triangle_rule(tri, depth)
                extra_p.append(p_)
                extra_w.append(w_)
        nq = len(rule[1])
        keep = np.repeat(~drop, nq)
        pts, wts, mag = pts[keep], wts[keep], mag[keep]
        if extra_p:
            ep = np.concatenate(extra_p)
            ev = np.asarray(data(ep[:, 0], ep[:, 1]))
            em = np.linalg.norm(ev, axis=-1) if ev.ndim == 2 else np.abs(ev)
            pts = np.concatenate([pts, ep])
            wts = np.concatenate([wts, np.concatenate(extra_w)])
            mag = np.concatenate([mag, em])
    return pts, wts, mag


def lebesgue_norm(mesh: TriMesh, data, s: float, region: Region | None = None,
                  singular_points=(), rule=QUAD7) -> float:
    """Quadrature approximation of the L^s norm of a field.

    Parameters
    ----------
    mesh : TriMesh
    data : callable or array
        Scalar/vector callable, nodal array or per-triangle array.
    s : float
        Exponent in [1, inf].
    region : Region, optional
        Restrict integration to a sub-disk or annulus (by quadrature-point
        membership).
    singular_points : sequence of points
        Locations of integrable singularities of a callable field; the
        triangles touching them use a graded subdivision rule.

    Returns
    -------
    float
    """
    if not s >= 1:
        raise DomainError(f"exponent must be >= 1, got {s}")
    pts, wts, mag = field_samples(mesh, data, rule, singular_points)
    if region is not None:
        keep = region.contains(pts)
        if not keep.any():
            raise DomainError("integration region contains no quadrature points")
        pts, wts, mag = pts[keep], wts[keep], mag[keep]
    if np.isinf(s):
        m = float(mag.max()) if len(mag) else 0.0
        if not callable(data):
            arr = np.asarray(data)
            if arr.shape[0] == mesh.n_nodes:
                nodes = mesh.nodes
                sel = region.contains(nodes) if region is not None else np.ones(len(nodes), bool)
                nv = np.linalg.norm(arr, axis=-1) if arr.ndim == 2 else np.abs(arr)
                if sel.any():
                    m = max(m, float(nv[sel].max()))
        else:
            nodes = mesh.nodes
            sel = region.contains(nodes) if region is not None else np.ones(len(nodes), bool)
            nv = np.asarray(data(nodes[sel, 0], nodes[sel, 1]))
            nv = np.linalg.norm(nv, axis=-1) if nv.ndim == 2 else np.abs(nv)
            if len(nv):
                finite = nv[np.isfinite(nv)]
                m = max(m, float(finite.max()) if len(finite) else m)
        return m
    return float(np.sum(wts * mag**s) ** (1.0 / s))


def p1_gradient(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
    """Per-triangle gradient of a nodal P1 field, shape (m, 2)."""
    return np.einsum("ti,tid->td", np.asarray(u)[mesh.triangles], mesh.basis_gradients())


def recovered_gradient(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
    """Area-weighted nodal average of the P1 gradient, shape (n, 2)."""
    g = p1_gradient(mesh, u)
    area = mesh.areas
    out = np.zeros((mesh.n_nodes, 2), dtype=g.dtype)
    wsum = np.zeros(mesh.n_nodes)
    for k in range(3):
        np.add.at(out, mesh.triangles[:, k], g * area[:, None])
        np.add.at(wsum, mesh.triangles[:, k], area)
    return out / wsum[:, None]


def mass_matrix(mesh: TriMesh) -> sp.csr_matrix:
    return assemble_bilinear(mesh, CoefficientSet(A=lambda x, y: np.zeros(np.shape(x) + (2, 2)),
                                                  V=constant_scalar(1.0), lam=0.0),
                             check=False).matrix


def stiffness_matrix(mesh: TriMesh) -> sp.csr_matrix:
    return assemble_bilinear(mesh, CoefficientSet(), check=False).matrix


def coercivity_margin(op: SparseOperator, tol: float = 1e-6, maxiter: int = 120) -> float:
    """Smallest Rayleigh quotient of the symmetric part over interior vectors.

    The quotient is taken against the Dirichlet energy, so the value is a
    discrete coercivity constant ``B[v, v] >= gamma * ||grad v||^2``.
    """
    mesh = op.mesh
    I = mesh.interior
    M = op.matrix
    S = (0.5 * (M + M.T))[I][:, I].tocsc()
    K = stiffness_matrix(mesh)[I][:, I].tocsc()
    if len(I) < 400:
        from scipy.linalg import eigh
        return float(eigh(S.toarray(), K.toarray(), eigvals_only=True)[0])
    # The spectrum clusters near the Dirichlet-energy scale, which stalls
    # shift-invert Lanczos; block LOBPCG preconditioned by K converges in value.
    lu = splu(K)
    pre = LinearOperator(K.shape, lu.solve)
    X = np.random.default_rng(0).standard_normal((len(I), 4))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        vals = lobpcg(S, X, B=K, M=pre, largest=False, tol=tol, maxiter=maxiter)[0]
    return float(np.min(vals))


def tau0(q1: float, q2: float, p: float) -> float:
    """Upper integrability exponent for the Caccioppoli estimate."""
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p}")
    if p < 2:
        return float(min(q1, q2, 2 * p / (2 - p)))
    return float(min(q1, q2))


def _power(r, q):
    return r**2 if np.isinf(q) else r ** (2 - 4 / q)


def caccioppoli_check(mesh: TriMesh, u: np.ndarray, coeffs: CoefficientSet, r: float,
                      alpha: float, t: float, center=(0.0, 0.0)) -> dict:
    """Ratio of ``||grad u||_{L^t(B_r)}`` to the interior energy bound with C = 1.

    Returns
    -------
    dict with keys ``ratio``, ``tau0``, ``lhs``, ``rhs``.
    """
    q1, q2, p = coeffs.q1, coeffs.q2, coeffs.p
    t0 = tau0(q1, q2, p)
    if t < 2 or t > t0:
        raise DomainError(f"t={t} outside [2, tau0={t0}]")
    if alpha <= 1:
        raise DomainError("alpha must exceed 1")
    big = Region(alpha * r, 0.0, tuple(center))
    small = Region(r, 0.0, tuple(center))
    lhs = lebesgue_norm(mesh, p1_gradient(mesh, u), t, small)
    K1 = lebesgue_norm(mesh, coeffs.W1, q1, big)
    K2 = lebesgue_norm(mesh, coeffs.W2, q2, big)
    M = lebesgue_norm(mesh, coeffs.V, p, big)
    sup = lebesgue_norm(mesh, u, np.inf, big)
    vpow = r**2 if np.isinf(p) else r ** (2 - 2 / p)
    rhs = r ** (2 / t - 1) * (1 + _power(r, q1) * K1**2 + _power(r, q2) * K2**2 + vpow * M) * sup
    return {"ratio": lhs / rhs if rhs > 0 else np.inf, "tau0": t0, "lhs": lhs, "rhs": rhs}
