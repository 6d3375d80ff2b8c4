"""Fundamental solutions of -div(A grad) and their level sets.

The fundamental solution is normalized so that it behaves like ``log|z|``
for the Laplacian.  Its level sets ``{G = ln s}`` are the quasi-circles
``Z_s``; their sublevel sets are the quasi-balls ``Q_s``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from shapely.geometry import Polygon

from .fem import (QUAD7, CoefficientSet, assemble_bilinear, check_coefficients,
                  quadrature_points, solve_dirichlet)
from .mesh import TriMesh, triangulate_disk

LOGGER = logging.getLogger(__name__)


class QuasiGeometryError(ValueError):
    """Level set outside the computable range or not a closed curve."""


@dataclass(frozen=True)
class FundamentalSolution:
    """``G = G0 + H`` with ``G0`` the frozen-coefficient kernel at the pole.

    Attributes
    ----------
    mesh : TriMesh
    A : callable
        Matrix field.
    A0 : (2, 2) array
        Symmetric part of A at the pole.
    correction : (n,) array
        Nodal values of the smooth correction ``H`` (zero on the outer circle).
    pole : (2,) array
    """

    mesh: TriMesh
    A: object
    A0: np.ndarray
    correction: np.ndarray
    pole: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def _inv(self):
        return np.linalg.inv(self.A0)

    @property
    def _sqrt_det(self):
        return float(np.sqrt(np.linalg.det(self.A0)))

    def frozen(self, pts: np.ndarray) -> np.ndarray:
        """Constant-coefficient part ``log(x^T A0^{-1} x) / (2 sqrt(det A0))``."""
        d = np.asarray(pts, dtype=float) - self.pole
        q = np.einsum("...i,ij,...j->...", d, self._inv, d)
        with np.errstate(divide="ignore"):
            return np.log(q) / (2.0 * self._sqrt_det)

    def frozen_gradient(self, pts: np.ndarray) -> np.ndarray:
        d = np.asarray(pts, dtype=float) - self.pole
        Ad = np.einsum("ij,...j->...i", self._inv, d)
        q = np.einsum("...i,...i->...", d, Ad)
        return Ad / (self._sqrt_det * q[..., None])

    def nodal(self) -> np.ndarray:
        """Nodal values of G; the pole node gets -inf."""
        return self.frozen(self.mesh.nodes) + self.correction

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return self.frozen(pts) + self.mesh.interpolate(self.correction, pts)

    def level(self, pts: np.ndarray) -> np.ndarray:
        """The level function ``l = exp(G)``."""
        return np.exp(self(pts))


def fundamental_solution(A, outer_radius: float = 2.0, h: float = 0.02,
                         mesh: TriMesh | None = None, lam: float | None = None,
                         Lam: float | None = None) -> FundamentalSolution:
    """Compute the fundamental solution of ``-div(A grad)`` with pole at 0.

    The frozen kernel of ``A(0)`` is subtracted; the correction ``H`` solves

        int A grad H . grad v = -int (A - A(0)) grad G0 . grad v

    with ``H = 0`` on the outer circle.

    Parameters
    ----------
    A : callable
        Matrix field ``A(x, y) -> (..., 2, 2)``.
    outer_radius : float
        Radius of the computational disk.
    h : float
        Mesh size (the pole patch is refined geometrically).
    mesh : TriMesh, optional
        Use this mesh instead (must contain the origin as a node).
    lam, Lam : float, optional
        Ellipticity and bound constants to validate against.
    """
    if mesh is None:
        mesh = triangulate_disk(outer_radius, h, refine=[(0.0, 0.0)])
    A0_full = np.asarray(A(np.zeros(1), np.zeros(1)), dtype=float).reshape(-1, 2, 2)[0]
    A0 = 0.5 * (A0_full + A0_full.T)
    coeffs = CoefficientSet(A=A, lam=lam if lam is not None else 0.0,
                            Lam=Lam if Lam is not None else np.inf)
    check_coefficients(mesh, coeffs)
    if np.linalg.eigvalsh(A0)[0] <= 0:
        raise ValueError("A(0) is not elliptic")
    proto = FundamentalSolution(mesh, A, A0, np.zeros(mesh.n_nodes))
    pts, wts = quadrature_points(mesh, QUAD7)
    Aq = np.broadcast_to(A(pts[..., 0], pts[..., 1]), pts.shape[:2] + (2, 2))
    dG0 = proto.frozen_gradient(pts)
    flux = np.einsum("tqij,tqj->tqi", Aq - A0_full, dG0)
    grads = mesh.basis_gradients()
    local = -np.einsum("tq,tqd,tid->ti", wts, flux, grads)
    F = np.zeros(mesh.n_nodes)
    np.add.at(F, mesh.triangles.ravel(), local.ravel())
    op = assemble_bilinear(mesh, coeffs, check=False)
    H = solve_dirichlet(op, g=0.0, rhs=F)
    return FundamentalSolution(mesh, A, A0, H)


def operator_residual(fs: FundamentalSolution, exclude: float | None = None) -> float:
    """Relative weak residual of ``-div(A grad G)`` on hat functions away from the pole."""
    mesh = fs.mesh
    pts, wts = quadrature_points(mesh, QUAD7)
    Aq = np.broadcast_to(fs.A(pts[..., 0], pts[..., 1]), pts.shape[:2] + (2, 2))
    from .fem import p1_gradient
    gH = p1_gradient(mesh, fs.correction)
    flux = np.einsum("tqij,tqj->tqi", Aq, fs.frozen_gradient(pts) + gH[:, None, :])
    grads = mesh.basis_gradients()
    local = np.einsum("tq,tqd,tid->ti", wts, flux, grads)
    scale_local = np.einsum("tq,tq,ti->ti", wts, np.linalg.norm(flux, axis=-1),
                            np.linalg.norm(grads, axis=-1))
    R = np.zeros(mesh.n_nodes)
    S = np.zeros(mesh.n_nodes)
    np.add.at(R, mesh.triangles.ravel(), local.ravel())
    np.add.at(S, mesh.triangles.ravel(), scale_local.ravel())
    exclude = 4 * mesh.h if exclude is None else exclude
    r = np.linalg.norm(mesh.nodes - fs.pole, axis=1)
    sel = (~mesh.boundary) & (r > exclude)
    return float(np.max(np.abs(R[sel]) / S[sel]))


@dataclass(frozen=True)
class QuasiCircle:
    """Closed counterclockwise polyline approximating ``{G = ln s}``."""

    s: float
    points: np.ndarray

    @property
    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)

    def polygon(self) -> Polygon:
        return Polygon(self.points)

    def resample(self, n: int = 512) -> np.ndarray:
        """Vertices plus equally spaced arclength samples, at least ``n`` points."""
        closed = np.vstack([self.points, self.points[:1]])
        seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        t = np.linspace(0.0, cum[-1], n, endpoint=False)
        x = np.interp(t, cum, closed[:, 0])
        y = np.interp(t, cum, closed[:, 1])
        return np.vstack([self.points, np.column_stack([x, y])])


def quasi_circle(fs: FundamentalSolution, s: float, refine: bool = True) -> QuasiCircle:
    """Extract the level set ``{G = ln s}`` by marching triangles.

    Crossing points are located on triangle edges by linear interpolation
    of nodal values; with ``refine`` they are then polished with a root
    solve of ``G0 + H`` along the edge.
    """
    if not s > 0:
        raise QuasiGeometryError("s must be positive")
    mesh = fs.mesh
    level = np.log(s)
    G = fs.nodal()
    finite = np.isfinite(G)
    G = np.where(finite, G, np.min(G[finite]) - 50.0)
    above = G > level
    t = mesh.triangles
    crossing = [(0, 1), (1, 2), (2, 0)]
    edges = {}
    segments = []
    for tri in np.flatnonzero(above[t].any(axis=1) & ~above[t].all(axis=1)):
        ends = []
        for a, b in crossing:
            i, j = t[tri, a], t[tri, b]
            if above[i] != above[j]:
                key = (min(i, j), max(i, j))
                edges.setdefault(key, None)
                ends.append(key)
        if len(ends) == 2:
            segments.append(tuple(ends))
    if not segments:
        raise QuasiGeometryError(f"level ln({s}) not attained on the computational disk")
    bnd = mesh.boundary
    if any(bnd[i] and bnd[j] for i, j in edges):
        raise QuasiGeometryError(f"level ln({s}) reaches the outer circle")

    for key in edges:
        i, j = key
        gi, gj = G[i], G[j]
        lam = (level - gi) / (gj - gi)
        p = (1 - lam) * mesh.nodes[i] + lam * mesh.nodes[j]
        if refine:
            pi, pj = mesh.nodes[i], mesh.nodes[j]
            hi, hj = fs.correction[i], fs.correction[j]

            def phi(x):
                q = (1 - x) * pi + x * pj
                return float(fs.frozen(q) + (1 - x) * hi + x * hj - level)
            lo, hi_ = 0.0, 1.0
            if not np.isfinite(fs.frozen(pi)):
                lo = 1e-14
            if not np.isfinite(fs.frozen(pj)):
                hi_ = 1 - 1e-14
            try:
                x = brentq(phi, lo, hi_, xtol=1e-15)
                p = (1 - x) * pi + x * pj
            except ValueError:
                pass
        edges[key] = p

    # chain segments into a closed loop
    adj = {}
    for a, b in segments:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    if any(len(v) != 2 for v in adj.values()):
        raise QuasiGeometryError("level set is not a simple closed curve")
    start = next(iter(adj))
    loop = [start]
    prev, cur = None, start
    while True:
        nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
        if nxt == start:
            break
        loop.append(nxt)
        prev, cur = cur, nxt
    if len(loop) != len(adj):
        raise QuasiGeometryError("level set has several components")
    pts = np.array([edges[k] for k in loop])
    x, y = pts[:, 0], pts[:, 1]
    if 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) < 0:
        pts = pts[::-1]
    # start at the vertex of smallest angle for a canonical ordering
    ang = np.mod(np.arctan2(pts[:, 1] - fs.pole[1], pts[:, 0] - fs.pole[0]), 2 * np.pi)
    pts = np.roll(pts, -int(np.argmin(ang)), axis=0)
    return QuasiCircle(float(s), pts)


def sigma_rho(fs: FundamentalSolution, s: float) -> tuple[float, float]:
    """Inner and outer radii ``(min |z|, max |z|)`` over ``Z_s``."""
    r = quasi_circle(fs, s).radii
    return float(r.min()), float(r.max())


@dataclass(frozen=True)
class QuasiGeometry:
    """Quasi-circles for a grid of radii with derived constants."""

    fs: FundamentalSolution
    circles: dict

    def sigma(self, s: float) -> float:
        return float(self._circle(s).radii.min())

    def rho(self, s: float) -> float:
        return float(self._circle(s).radii.max())

    def _circle(self, s):
        key = float(s)
        if key not in self.circles:
            self.circles[key] = quasi_circle(self.fs, key)
        return self.circles[key]

    @property
    def d(self) -> float:
        return self.rho(7 / 5) + 2 / 5

    @property
    def b(self) -> float:
        return self.sigma(1.0)

    @property
    def b_tilde(self) -> float:
        return self.sigma(6 / 5)

    def table(self) -> np.ndarray:
        """Rows ``(s, sigma, rho)`` sorted by s."""
        keys = sorted(self.circles)
        return np.array([(s, self.sigma(s), self.rho(s)) for s in keys])

    def containment_ok(self, tol: float | None = None) -> bool:
        """Check ``B_sigma ⊆ Q_s ⊆ B_rho`` and nesting of consecutive quasi-balls.

        The default tolerance is the largest chord sagitta of the polylines.
        """
        keys = sorted(self.circles)
        if tol is None:
            tol = max(_sagitta(self.circles[s]) for s in keys) + 1e-12
        polys = [self.circles[s].polygon() for s in keys]
        for s, poly in zip(keys, polys):
            inner = Polygon(_circle_points(self.sigma(s), 256))
            if not poly.buffer(tol).contains(inner):
                return False
            outer = Polygon(_circle_points(self.rho(s) / np.cos(np.pi / 512), 512))
            if not outer.contains(poly):
                return False
        return all(b.buffer(tol).contains(a) for a, b in zip(polys, polys[1:]))


def _sagitta(c: QuasiCircle) -> float:
    seg = np.linalg.norm(np.diff(np.vstack([c.points, c.points[:1]]), axis=0), axis=1)
    return float(np.max(seg) ** 2 / (8 * c.radii.min()) * 1.5)


def _circle_points(r: float, n: int) -> np.ndarray:
    th = 2 * np.pi * np.arange(n) / n
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def quasi_geometry(fs: FundamentalSolution, s_values=None) -> QuasiGeometry:
    """Extract quasi-circles for ``s_values`` (always including 1, 6/5, 7/5)."""
    if s_values is None:
        s_values = np.round(np.arange(0.2, 1.61, 0.1), 10)
    wanted = sorted(set(float(s) for s in s_values) | {1.0, 1.2, 1.4})
    circles = {s: quasi_circle(fs, s) for s in wanted}
    return QuasiGeometry(fs, circles)


def power_envelopes(table: np.ndarray) -> tuple[float, float]:
    """Fit ``s^{c1} <= |z| <= s^{c2}`` on rows with s < 1 and rho(s) < 1.

    Returns the tightest exponents ``(c1, c2)`` valid for the sampled
    sigma (lower) and rho (upper) values.
    """
    rows = table[(table[:, 0] < 1) & (table[:, 2] < 1)]
    if len(rows) == 0:
        raise ValueError("need rows with s < 1 and rho(s) < 1")
    ls = np.log(rows[:, 0])
    c1 = float(np.max(np.log(rows[:, 1]) / ls))
    c2 = float(np.min(np.log(rows[:, 2]) / ls))
    return c1, c2


def log_bound_constants(fs: FundamentalSolution, R1: float = 0.5, n: int = 400,
                        seed: int = 0) -> tuple[float, float]:
    """Fit ``C1 log(1/|z|) <= -G(z) <= C2 log(1/|z|)`` on ``|z| < R1``."""
    rng = np.random.default_rng(seed)
    r = R1 * np.sqrt(rng.uniform(1e-4, 1.0, n))
    th = rng.uniform(0, 2 * np.pi, n)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    ratio = -fs(pts) / np.log(1 / r)
    return float(ratio.min()), float(ratio.max())


def ray_monotone(fs: FundamentalSolution, n_rays: int = 16, n: int = 200, r_max=None) -> bool:
    """True if G increases along sampled rays from the pole."""
    r_max = 0.95 * fs.mesh.radius if r_max is None else r_max
    r = np.linspace(0.02 * r_max, r_max, n)
    for th in 2 * np.pi * np.arange(n_rays) / n_rays:
        vals = fs(np.column_stack([r * np.cos(th), r * np.sin(th)]))
        if np.any(np.diff(vals) <= 0):
            return False
    return True
