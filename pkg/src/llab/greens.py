"""Averaged Dirichlet Green's functions on a disk and their estimates.

For a pole ``y`` and radius ``rho`` the averaged Green's function solves

    B[G, v] = mean of v over B_rho(y)    for every test function v,

with zero boundary values.  The adjoint object solves the same problem for
the adjoint form, so with ``M[i, j] = B(phi_j, phi_i)`` the two are
``M G = a`` and ``M^T G* = a``.  ``rho = 0`` uses point evaluation.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fem import (QUAD7, CoefficientSet, DomainError, Region, assemble_bilinear,
                  coercivity_margin, factorize, lebesgue_norm, p1_gradient,
                  quadrature_points, solve_dirichlet)
from .mesh import TriMesh, triangulate_disk

LOGGER = logging.getLogger(__name__)

EPS_GRID = np.linspace(0.0, 4.0, 4001)
ESTIMATE_IDS = ("energy_outside", "lebesgue_near", "gradient_near", "level_set",
                "gradient_level_set", "pointwise")
CSV_HEADER = "pole_x,pole_y,estimate_id,s_or_tau,fitted_C,fitted_eps"


class GreenError(RuntimeError):
    """The form is not coercive, so the Green's function is not computed."""


@dataclass
class GreenFunction:
    """Nodal averaged Green's function with its pole and solver metadata."""

    mesh: TriMesh
    values: np.ndarray
    pole: tuple
    rho: float
    adjoint: bool = False
    info: dict = field(default_factory=dict)
    table: list = field(default_factory=list)

    def __call__(self, pts) -> np.ndarray:
        return self.mesh.interpolate(self.values, np.atleast_2d(pts))

    def gradient(self) -> np.ndarray:
        """Per-triangle gradient, shape (m, 2)."""
        return p1_gradient(self.mesh, self.values)

    def pair(self, functional: np.ndarray) -> float:
        """Apply a nodal functional (for instance an averaging vector)."""
        return float(functional @ self.values)


def disk_rule(center, rho: float, n_r: int = 12, n_theta: int = 48):
    """Polar Gauss rule for the mean over a disk: points (k, 2), weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * rho * (x + 1.0)
    wr = 0.5 * rho * w * r
    th = 2.0 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    R, T = np.meshgrid(r, th, indexing="ij")
    pts = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()]) + np.asarray(center, float)
    wts = np.repeat(wr, n_theta) * (2.0 * np.pi / n_theta)
    return pts, wts / wts.sum()


def averaging_vector(mesh: TriMesh, y, rho: float, n_r: int = 12, n_theta: int = 48) -> np.ndarray:
    """``a_i`` = mean of the hat function ``phi_i`` over ``B_rho(y)``.

    ``rho = 0`` gives point evaluation at ``y``.

    Raises
    ------
    DomainError
        If the averaging disk is not contained in the mesh domain.
    """
    y = np.asarray(y, dtype=float)
    if np.linalg.norm(y - np.asarray(mesh.center)) + rho >= mesh.radius:
        raise DomainError(f"B_{rho}({y.tolist()}) is not inside the domain")
    if rho > 1e-12 * mesh.radius:
        pts, wts = disk_rule(y, rho, n_r, n_theta)
    else:
        pts, wts = y[None], np.ones(1)
    idx, bary = mesh.locate(pts)
    if np.any(idx < 0):
        raise DomainError("averaging points fall outside the mesh")
    a = np.zeros(mesh.n_nodes)
    np.add.at(a, mesh.triangles[idx].ravel(), (bary * wts[:, None]).ravel())
    return a


def pole_mesh(poles, radius: float = 1.0, h: float = 0.02, levels: int = 3) -> TriMesh:
    """Disk mesh refined geometrically around each pole."""
    return triangulate_disk(radius, h, refine=[tuple(p) for p in poles], levels=levels)


@dataclass
class GreenSolver:
    """One assembled and factorized form, reused for many poles."""

    mesh: TriMesh
    coeffs: CoefficientSet
    op: object
    factor: object
    coercivity: float

    def solve(self, a: np.ndarray, adjoint: bool = False) -> np.ndarray:
        I = self.mesh.interior
        g = np.zeros(self.mesh.n_nodes)
        g[I] = self.factor.lu.solve(a[I], trans="T" if adjoint else "N")
        return g

    def green(self, y, rho: float, adjoint: bool = False) -> GreenFunction:
        a = averaging_vector(self.mesh, y, rho)
        vals = self.solve(a, adjoint)
        res = self.op.matrix.T @ vals if adjoint else self.op.matrix @ vals
        I = self.mesh.interior
        info = {"coercivity": self.coercivity, "n_nodes": self.mesh.n_nodes,
                "identity_residual": float(np.abs(res[I] - a[I]).max())}
        return GreenFunction(self.mesh, vals, tuple(map(float, y)), float(rho), adjoint, info)


def green_solver(coeffs: CoefficientSet, mesh: TriMesh, check_coercive: bool = True) -> GreenSolver:
    """Assemble and factorize the form once.

    Raises
    ------
    GreenError
        If the discrete coercivity margin is not positive.
    """
    op = assemble_bilinear(mesh, coeffs)
    margin = coercivity_margin(op) if check_coercive else np.nan
    if check_coercive and not margin > 0:
        raise GreenError(f"form is not coercive (margin {margin:.3e})")
    return GreenSolver(mesh, coeffs, op, factorize(op), margin)


def averaged_green(coeffs: CoefficientSet, y, rho: float, mesh: TriMesh | None = None,
                   radius: float = 1.0, h: float = 0.02, adjoint: bool = False,
                   check_coercive: bool = True) -> GreenFunction:
    """Averaged Green's function with pole ``y`` (adjoint form if ``adjoint``).

    Parameters
    ----------
    coeffs : CoefficientSet
    y : (2,) sequence
        Pole.
    rho : float
        Averaging radius; 0 for point evaluation.
    mesh : TriMesh, optional
        Defaults to a disk of ``radius`` refined around ``y``.
    """
    if mesh is None:
        mesh = pole_mesh([y], radius, h)
    return green_solver(coeffs, mesh, check_coercive).green(y, rho, adjoint)


def laplace_green_disk(pts, y=(0.0, 0.0), radius: float = 1.0) -> np.ndarray:
    """Closed-form Dirichlet Green's function of ``-Laplace`` on a disk."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    y = np.asarray(y, dtype=float)
    c = pts[:, 0] + 1j * pts[:, 1]
    w = complex(y[0], y[1])
    num = np.abs(radius**2 - c * np.conj(w))
    return np.log(num / (radius * np.abs(c - w))) / (2.0 * np.pi)


def closed_form_deviation(gf: GreenFunction, exclude: float = 0.1) -> float:
    """Max nodal deviation from the Laplacian disk formula outside ``B_exclude(y)``."""
    mesh = gf.mesh
    keep = np.linalg.norm(mesh.nodes - np.asarray(gf.pole), axis=1) >= exclude
    exact = laplace_green_disk(mesh.nodes[keep], gf.pole, mesh.radius)
    return float(np.abs(gf.values[keep] - exact).max())


def energy_power(coeffs: CoefficientSet, y=(0.0, 0.0), rhos=(0.02, 0.04, 0.08),
                 mesh: TriMesh | None = None) -> dict:
    """Log-log slope of ``||D G^rho||_2`` against ``rho``."""
    mesh = mesh if mesh is not None else pole_mesh([y])
    solver = green_solver(coeffs, mesh, check_coercive=False)
    norms = [lebesgue_norm(mesh, solver.green(y, r).gradient(), 2.0) for r in rhos]
    slope = float(np.polyfit(np.log(rhos), np.log(norms), 1)[0])
    return {"rho": list(map(float, rhos)), "norms": norms, "power": slope}


def rho_convergence(coeffs: CoefficientSet, y=(0.0, 0.0), rhos=(0.08, 0.04, 0.02),
                    mesh: TriMesh | None = None) -> dict:
    """L1 differences of successive halvings outside ``B_{4 rho}(y)``."""
    mesh = mesh if mesh is not None else pole_mesh([y])
    solver = green_solver(coeffs, mesh, check_coercive=False)
    gs = [solver.green(y, r).values for r in rhos]
    diffs = []
    for k in range(1, len(rhos)):
        reg = Region(np.inf, 4 * rhos[k - 1], tuple(map(float, y)))
        diffs.append(lebesgue_norm(mesh, gs[k] - gs[k - 1], 1.0, reg))
    ratios = [diffs[k - 1] / diffs[k] for k in range(1, len(diffs))]
    return {"rho": list(map(float, rhos)), "diffs": diffs, "ratios": ratios}


def symmetry_check(coeffs: CoefficientSet, y1, y2, rho: float = 0.02,
                   mesh: TriMesh | None = None) -> dict:
    """Compare ``G(., y1)`` averaged near ``y2`` with ``G*(., y2)`` averaged near ``y1``.

    Returns
    -------
    dict
        ``deviation`` is the pairing difference of the two averages;
        ``pointwise`` compares the interpolated values at the poles.
    """
    mesh = mesh if mesh is not None else pole_mesh([y1, y2])
    solver = green_solver(coeffs, mesh)
    g = solver.green(y1, rho)
    gs = solver.green(y2, rho, adjoint=True)
    a1 = averaging_vector(mesh, y1, rho)
    a2 = averaging_vector(mesh, y2, rho)
    left, right = g.pair(a2), gs.pair(a1)
    point = abs(float(g(np.asarray(y2))[0]) - float(gs(np.asarray(y1))[0]))
    scale = max(abs(left), abs(right), 1e-300)
    return {"deviation": abs(left - right), "relative": abs(left - right) / scale,
            "pointwise": point, "value": left}


def probe_points(n: int = 10, radius: float = 1.0, seed: int = 0, fraction: float = 0.6) -> np.ndarray:
    """Seeded probe points uniformly distributed in ``B_{fraction * radius}``."""
    rng = np.random.default_rng(seed)
    r = fraction * radius * np.sqrt(rng.uniform(size=n))
    th = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def _field_at(data, pts, shape_tail=()):
    if data is None:
        return np.zeros(pts.shape[:-1] + shape_tail)
    if callable(data):
        return np.broadcast_to(data(pts[..., 0], pts[..., 1]), pts.shape[:-1] + shape_tail)
    return np.broadcast_to(np.asarray(data, dtype=float), pts.shape[:-1] + shape_tail)


def representation(solver: GreenSolver, f=None, G=None, probes=(), rho: float = 0.02) -> np.ndarray:
    """``u(y) = int G*(x, y) f(x) + D G*(x, y) . G(x) dx`` at each probe.

    The kernel is the adjoint Green's function, so the result represents the
    solution of ``B[u, v] = int f v + G . grad v`` with zero boundary values.
    ``f`` and ``G`` must be callables or constants.
    """
    mesh = solver.mesh
    bary, _ = QUAD7
    pts, wts = quadrature_points(mesh, QUAD7)
    fv = _field_at(f, pts)
    Gv = _field_at(G, pts, (2,))
    out = np.zeros(len(probes))
    for k, y in enumerate(np.atleast_2d(probes)):
        g = solver.green(y, rho, adjoint=True)
        gq = np.einsum("qi,ti->tq", bary, g.values[mesh.triangles])
        dg = g.gradient()
        out[k] = np.sum(wts * (gq * fv + np.einsum("td,tqd->tq", dg, Gv)))
    return out


def representation_check(coeffs: CoefficientSet, f=None, G=None, mesh: TriMesh | None = None,
                         probes=None, rho: float = 0.02, n_probes: int = 10, seed: int = 0) -> dict:
    """Compare the integral representation with a direct zero-boundary solve.

    Returns
    -------
    dict with ``deviation`` (max over probes), ``direct`` and ``represented``.
    """
    mesh = mesh if mesh is not None else triangulate_disk(1.0, 0.02)
    if probes is None:
        probes = probe_points(n_probes, mesh.radius, seed)
    probes = np.atleast_2d(probes)
    solver = green_solver(coeffs, mesh)
    u = solve_dirichlet(solver.op, g=0.0, f=f, G=G, factor=solver.factor)
    direct = mesh.interpolate(u, probes)
    rep = representation(solver, f, G, probes, rho)
    return {"deviation": float(np.abs(rep - direct).max()) if len(probes) else 0.0,
            "direct": direct, "represented": rep, "probes": probes}


def multiplier_reconstruction(mesh: TriMesh, coeffs: CoefficientSet, phi: np.ndarray,
                              probes=None, rho: float = 0.02, seed: int = 0) -> dict:
    """Rebuild ``phi - 1`` from the Green representation of the adjoint problem.

    ``phi - 1`` solves the adjoint problem with sources ``f = -V`` and
    ``G = -W2``; the comparison is against the supplied multiplier values.
    """
    if probes is None:
        probes = probe_points(10, mesh.radius, seed)
    probes = np.atleast_2d(probes)
    W2, V = coeffs.W2, coeffs.V
    solver = green_solver(coeffs.adjoint(), mesh)
    rep = representation(solver, lambda x, y: -np.asarray(V(x, y)),
                         lambda x, y: -np.asarray(W2(x, y)), probes, rho)
    target = mesh.interpolate(np.asarray(phi) - 1.0, probes)
    return {"deviation": float(np.abs(rep - target).max()), "represented": rep,
            "multiplier": target, "probes": probes}


# --- estimate suite -------------------------------------------------------

def fit_power_bound(x, m, exponent, eps_grid=EPS_GRID, C_max: float = 100.0) -> tuple[float, float]:
    """Smallest ``eps`` on the grid with ``max m / x**exponent(eps) <= C_max``.

    Returns ``(C, eps)``; when no grid value qualifies, the minimal ``C``
    and its ``eps`` are returned.
    """
    x, m = np.asarray(x, float), np.asarray(m, float)
    ok = (x > 0) & (m > 0)
    if not ok.any():
        return 0.0, float(eps_grid[0])
    lx, lm = np.log(x[ok]), np.log(m[ok])
    best = (np.inf, float(eps_grid[0]))
    for eps in eps_grid:
        e = exponent(eps)
        if not np.isfinite(e):
            continue
        C = float(np.exp(np.max(lm - e * lx)))
        if C <= C_max:
            return C, float(eps)
        if C < best[0]:
            best = (C, float(eps))
    return best


def _loglog_slope(x, m) -> float:
    x, m = np.asarray(x, float), np.asarray(m, float)
    ok = (x > 0) & (m > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(m[ok]), 1)[0])


def _level_measure(wts, mag, taus):
    return np.array([float(wts[mag > t].sum()) for t in taus])


def holder_probe(gf: GreenFunction, R: float = 0.5, n_pairs: int = 400, seed: int = 0) -> dict:
    """Fit ``|G(x) - G(z)| <= C (|x - z| / R)**eta`` over pairs away from the pole.

    Pairs satisfy ``|x - z| < R / 2`` and both points lie outside
    ``B_R(y)``; ``eta`` is the log-log slope of the binned maxima.
    """
    mesh = gf.mesh
    rng = np.random.default_rng(seed)
    y = np.asarray(gf.pole)
    c = np.asarray(mesh.center)
    rad = mesh.radius * 0.98
    pts = []
    while len(pts) < n_pairs:
        x = c + rad * np.sqrt(rng.uniform()) * np.array([np.cos(t := rng.uniform(0, 2 * np.pi)), np.sin(t)])
        d = 0.5 * R * 10 ** rng.uniform(-2.5, 0)
        phi = rng.uniform(0, 2 * np.pi)
        z = x + d * np.array([np.cos(phi), np.sin(phi)])
        if (np.linalg.norm(z - c) < rad and np.linalg.norm(x - y) > R and np.linalg.norm(z - y) > R):
            pts.append((x, z))
    X = np.array([p[0] for p in pts])
    Z = np.array([p[1] for p in pts])
    dist = np.linalg.norm(X - Z, axis=1) / R
    diff = np.abs(gf(X) - gf(Z))
    edges = np.quantile(dist, np.linspace(0, 1, 9))
    bx, by = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (dist >= lo) & (dist <= hi)
        if sel.any() and diff[sel].max() > 0:
            bx.append(np.exp(np.mean(np.log(dist[sel]))))
            by.append(diff[sel].max())
    eta = _loglog_slope(bx, by)
    C = float(np.max(diff / dist**eta)) if np.isfinite(eta) else float("nan")
    return {"R": R, "eta": eta, "C": C}


def green_estimate_suite(gf: GreenFunction, grids: dict | None = None, C_max: float = 100.0) -> dict:
    """Fit the power-type bounds near the pole for one Green's function.

    Parameters
    ----------
    gf : GreenFunction
    grids : dict, optional
        ``r`` (radii), ``s`` (Lebesgue exponents), ``s_grad`` (exponents
        below 2), ``tau`` and ``tau_grad`` (level-set thresholds).  Missing
        entries get defaults scaled to the pole distance and the value range.

    Returns
    -------
    dict
        ``rows`` (CSV records), ``powers`` (raw log-log slopes) and
        ``holder``.  The rows are also stored on ``gf.table``.
    """
    mesh = gf.mesh
    y = np.asarray(gf.pole)
    grids = dict(grids or {})
    dist_b = mesh.radius - np.linalg.norm(y - np.asarray(mesh.center))
    r_grid = np.asarray(grids.get("r", np.geomspace(max(2 * gf.rho, 2 * mesh.h), 0.9 * dist_b, 8)))
    s_list = grids.get("s", (1.0, 2.0, 4.0))
    sg_list = grids.get("s_grad", (1.0, 1.5))
    pts, wts = quadrature_points(mesh, QUAD7)
    bary, _ = QUAD7
    gq = np.einsum("qi,ti->tq", bary, gf.values[mesh.triangles]).ravel()
    wq = wts.ravel()
    dg = np.linalg.norm(gf.gradient(), axis=1)
    area = mesh.areas
    gmax = float(np.abs(gf.values).max())
    tau = np.asarray(grids.get("tau", np.geomspace(0.05 * gmax, 0.9 * gmax, 10)))
    tau_g = np.asarray(grids.get("tau_grad", np.geomspace(0.2 * np.median(dg), 0.9 * dg.max(), 10)))

    rows, powers = [], {}
    px, py = map(float, y)

    def add(eid, s, C, eps):
        rows.append({"pole_x": px, "pole_y": py, "estimate_id": eid,
                     "s_or_tau": float(s), "fitted_C": float(C), "fitted_eps": float(eps)})

    ext = []
    for r in r_grid:
        reg = Region(np.inf, r, (px, py))
        ext.append(np.hypot(lebesgue_norm(mesh, gf.values, 2.0, reg),
                            lebesgue_norm(mesh, gf.gradient(), 2.0, reg)))
    add("energy_outside", np.nan, *fit_power_bound(r_grid, ext, lambda e: -e, C_max=C_max))
    powers["energy_outside"] = _loglog_slope(r_grid, ext)

    for s in s_list:
        m = [lebesgue_norm(mesh, gf.values, s, Region(r, 0.0, (px, py))) for r in r_grid]
        add("lebesgue_near", s, *fit_power_bound(r_grid, m, lambda e, s=s: 2 / s - e, C_max=C_max))
        powers[f"lebesgue_near_{s:g}"] = _loglog_slope(r_grid, m)
    for s in sg_list:
        if not 1 <= s < 2:
            raise DomainError(f"gradient exponent must lie in [1, 2), got {s}")
        m = [lebesgue_norm(mesh, gf.gradient(), s, Region(r, 0.0, (px, py))) for r in r_grid]
        add("gradient_near", s, *fit_power_bound(r_grid, m, lambda e, s=s: -1 + 2 / s - e, C_max=C_max))
        powers[f"gradient_near_{s:g}"] = _loglog_slope(r_grid, m)

    lv = _level_measure(wq, np.abs(gq), tau)
    add("level_set", np.nan, *fit_power_bound(tau, lv, lambda e: -2 / e if e > 0 else np.nan,
                                              C_max=C_max))
    powers["level_set"] = _loglog_slope(tau, lv)
    lg = _level_measure(area, dg, tau_g)
    add("gradient_level_set", np.nan, *fit_power_bound(tau_g, lg, lambda e: -2 / (1 + e), C_max=C_max))
    powers["gradient_level_set"] = _loglog_slope(tau_g, lg)

    dist = np.linalg.norm(mesh.nodes - y, axis=1)
    keep = dist >= max(2 * gf.rho, mesh.h)
    add("pointwise", np.nan, *fit_power_bound(dist[keep], np.abs(gf.values[keep]), lambda e: -e,
                                              C_max=C_max))

    holder = holder_probe(gf, R=min(0.5, 0.5 * dist_b))
    gf.table = rows
    return {"rows": rows, "powers": powers, "holder": holder,
            "lebesgue_l1": {"r": r_grid.tolist()}, "tau": tau.tolist(), "tau_grad": tau_g.tolist()}


def pole_grid(radius: float, n: int = 5, fraction: float = 0.6) -> np.ndarray:
    """``n x n`` grid of poles in ``[-fraction R, fraction R]^2``."""
    t = np.linspace(-fraction * radius, fraction * radius, n)
    X, Y = np.meshgrid(t, t, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def dual_exponent(s: float) -> float:
    """Hoelder conjugate, with ``inf`` and 1 exchanged."""
    if np.isinf(s):
        return 1.0
    if s == 1:
        return np.inf
    if s < 1:
        raise DomainError(f"exponent must be at least 1, got {s}")
    return s / (s - 1.0)


def green_constants(coeffs: CoefficientSet, radius: float, rho: float = 0.02, h: float = 0.04,
                    n_grid: int = 5, jobs: int = 1, mesh: TriMesh | None = None) -> dict:
    """Sup over a pole grid of the Green norms that feed the multiplier hypotheses.

    ``C_q2`` is the sup of ``||D_x G*(x, z)||`` in ``L^{q2'}`` and ``C_p``
    the sup of ``||G*(x, z)||`` in ``L^{p'}``, both over the whole disk
    (which the ``2 radius`` ball around any interior pole contains).  All
    poles share one factorization.

    Returns
    -------
    dict with ``C_q2``, ``C_p`` and per-pole ``rows``.
    """
    poles = pole_grid(radius, n_grid)
    mesh = mesh if mesh is not None else pole_mesh(poles, radius, h)
    solver = green_solver(coeffs, mesh)
    q2d, pd = dual_exponent(coeffs.q2), dual_exponent(coeffs.p)

    def one(z):
        g = solver.green(z, rho, adjoint=True)
        return (float(z[0]), float(z[1]), lebesgue_norm(mesh, g.gradient(), q2d),
                lebesgue_norm(mesh, g.values, pd))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            rows = list(pool.map(one, poles))
    else:
        rows = [one(z) for z in poles]
    rows = [{"pole_x": r[0], "pole_y": r[1], "grad_norm": r[2], "norm": r[3]} for r in rows]
    return {"C_q2": max(r["grad_norm"] for r in rows), "C_p": max(r["norm"] for r in rows),
            "q2_dual": q2d, "p_dual": pd, "rho": rho, "rows": rows,
            "coercivity": solver.coercivity}


def write_constants_table(rows, path) -> None:
    """Write estimate-suite rows as CSV with the fixed header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fh.write(f"{r['pole_x']:.12g},{r['pole_y']:.12g},{r['estimate_id']},"
                     f"{r['s_or_tau']:.12g},{r['fitted_C']:.12g},{r['fitted_eps']:.12g}\n")
