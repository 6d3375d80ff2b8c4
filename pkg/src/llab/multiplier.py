"""Positive multipliers for divergence-form operators with lower-order terms.

The multiplier ``phi`` solves the adjoint problem

    -div(A^T grad phi + W2 phi) + W1 . grad phi + V phi = 0,   phi = 1 on the boundary,

and ``Phi = log phi`` carries the integrability estimates used downstream.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fem import (QUAD3, CoefficientSet, DomainError, Region, assemble_bilinear,
                  coercivity_margin, lebesgue_norm, p1_gradient, quadrature_points,
                  solve_dirichlet)
from .mesh import TriMesh

LOGGER = logging.getLogger(__name__)

DEFAULT_CONSTANTS = {"c_q2": 1.0, "C_q2": 1.0, "C_p": 1.0}


class MultiplierError(RuntimeError):
    """The adjoint form is not coercive, so no multiplier is computed."""


def mu_exponent(q1: float, q2: float, p: float) -> float:
    """``min{2 - 4/q1, 2 - 4/q2, 2 - 2/p}``."""
    return float(min(2 - 4 / q1, 2 - 4 / q2, 2 - 2 / p))


def positivity_functionals(mesh: TriMesh, coeffs: CoefficientSet, clamp: bool = True):
    """Values of the two positivity functionals on each interior hat function.

    Returns
    -------
    pos1, pos2 : arrays over interior nodes
        ``int W1 . grad phi_i`` and ``int W2 . grad phi_i + V phi_i``.
    """
    bary, w = QUAD3
    pts, _ = quadrature_points(mesh, QUAD3)
    _, W1, W2, V = coeffs.sample(pts, clamp=1.0 / mesh.h if clamp else None)
    G = mesh.basis_gradients()
    area = mesh.areas[:, None]
    loc1 = area * np.einsum("q,tqd,tid->ti", w, W1, G)
    loc2 = area * (np.einsum("q,tqd,tid->ti", w, W2, G) + np.einsum("q,qi,tq->ti", w, bary, V))
    out1, out2 = np.zeros(mesh.n_nodes), np.zeros(mesh.n_nodes)
    np.add.at(out1, mesh.triangles.ravel(), loc1.ravel())
    np.add.at(out2, mesh.triangles.ravel(), loc2.ravel())
    I = mesh.interior
    return out1[I], out2[I]


@dataclass(frozen=True)
class HypothesisRecord:
    """Smallness and positivity conditions for the multiplier bounds."""

    W1_norm: float
    W2_norm: float
    V_norm: float
    W2_bound: float
    V_bound: float
    small_W2: bool
    small_V: bool
    pos1: bool
    pos2: bool
    pos1_witness: int | None = None
    pos2_witness: int | None = None
    constants: dict = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return self.small_W2 and self.small_V and self.pos1 and self.pos2

    def to_dict(self) -> dict:
        return {"W1_norm": self.W1_norm, "W2_norm": self.W2_norm, "V_norm": self.V_norm,
                "W2_bound": self.W2_bound, "V_bound": self.V_bound,
                "small_W2": self.small_W2, "small_V": self.small_V,
                "pos1": self.pos1, "pos2": self.pos2,
                "pos1_witness": self.pos1_witness, "pos2_witness": self.pos2_witness,
                "constants": dict(self.constants), "all_hold": self.all_hold}


def check_hypotheses(mesh: TriMesh, coeffs: CoefficientSet, constants: dict | None = None,
                     tol: float = 1e-12, singular_points=()) -> HypothesisRecord:
    """Report which smallness and positivity conditions hold on the mesh.

    Parameters
    ----------
    mesh : TriMesh
    coeffs : CoefficientSet
    constants : dict, optional
        ``c_q2``, ``C_q2`` and ``C_p``; defaults are 1.
    tol : float
        Relative tolerance for the positivity tests (scaled by the largest
        functional value and the mesh area).
    singular_points : sequence
        Integrable singularities of the coefficient callables.

    Returns
    -------
    HypothesisRecord
        Witnesses are node indices of a hat function violating positivity.
    """
    const = dict(DEFAULT_CONSTANTS)
    const.update(constants or {})
    n1 = lebesgue_norm(mesh, coeffs.W1, coeffs.q1, singular_points=singular_points)
    n2 = lebesgue_norm(mesh, coeffs.W2, coeffs.q2, singular_points=singular_points)
    nV = lebesgue_norm(mesh, coeffs.V, coeffs.p, singular_points=singular_points)
    W2_bound = min(coeffs.lam / (2 * const["c_q2"]), 1 / (3 * const["C_q2"]))
    V_bound = 1 / (3 * const["C_p"])
    pos1, pos2 = positivity_functionals(mesh, coeffs)
    scale = tol * max(1.0, np.abs(pos1).max(initial=0), np.abs(pos2).max(initial=0)) * mesh.h**2
    I = mesh.interior
    w1 = int(I[np.argmin(pos1)]) if len(pos1) and pos1.min() < -scale else None
    w2 = int(I[np.argmin(pos2)]) if len(pos2) and pos2.min() < -scale else None
    return HypothesisRecord(n1, n2, nV, W2_bound, V_bound, n2 <= W2_bound, nV <= V_bound,
                            w1 is None, w2 is None, w1, w2, const)


@dataclass
class MultiplierResult:
    """Multiplier ``phi``, its logarithm and the associated diagnostics."""

    mesh: TriMesh
    coeffs: CoefficientSet
    phi: np.ndarray
    hypotheses: HypothesisRecord
    coercivity: float
    t0: float = 2.5
    grad_table: dict = field(default_factory=dict)

    @property
    def Phi(self) -> np.ndarray:
        return np.log(self.phi)

    @property
    def mu_exp(self) -> float:
        return mu_exponent(self.coeffs.q1, self.coeffs.q2, self.coeffs.p)

    @property
    def bounds_ok(self) -> bool:
        """``1/3 <= phi <= 1`` up to a 0.02 tolerance."""
        return bool(self.phi.min() >= 1 / 3 - 0.02 and self.phi.max() <= 1 + 0.02)

    def grad_Phi(self) -> np.ndarray:
        return p1_gradient(self.mesh, self.Phi)


def solve_multiplier(mesh: TriMesh, coeffs: CoefficientSet, constants: dict | None = None,
                     t0: float = 2.5, check_coercive: bool = True,
                     solver: str = "direct") -> MultiplierResult:
    """Solve the adjoint Dirichlet problem with boundary value 1.

    Raises
    ------
    MultiplierError
        If the adjoint form has a non-positive coercivity margin.
    """
    hyp = check_hypotheses(mesh, coeffs, constants)
    op = assemble_bilinear(mesh, coeffs, adjoint=True)
    margin = coercivity_margin(op) if check_coercive else np.nan
    if check_coercive and not margin > 0:
        raise MultiplierError(f"adjoint form is not coercive (margin {margin:.3e})")
    phi = solve_dirichlet(op, g=1.0, solver=solver)
    if hyp.all_hold and not (phi.min() >= 1 / 3 - 0.02 and phi.max() <= 1 + 0.02):
        LOGGER.warning("multiplier bounds violated: min %.4f max %.4f", phi.min(), phi.max())
    if phi.min() <= 0:
        raise MultiplierError(f"multiplier is not positive (min {phi.min():.3e})")
    return MultiplierResult(mesh, coeffs, phi, hyp, margin, t0)


def log_gradient_table(result: MultiplierResult, t_list, radius: float) -> dict:
    """``t -> ||grad Phi||_{L^t(B_radius)}``.

    Exponents outside ``[2, t0]`` are computed but listed under
    ``"extrapolated"``.
    """
    g = result.grad_Phi()
    region = Region(radius)
    table = {float(t): lebesgue_norm(result.mesh, g, t, region) for t in t_list}
    table_ext = sorted(t for t in table if t < 2 or t > result.t0)
    result.grad_table.update(table)
    return {"norms": table, "extrapolated": table_ext}


def growth_exponent(K_values, values) -> float:
    """Least-squares slope of ``log value`` against ``log K``."""
    x, y = np.log(np.asarray(K_values, float)), np.log(np.asarray(values, float))
    return float(np.polyfit(x, y, 1)[0])


def k_family_scan(mesh: TriMesh, coeffs: CoefficientSet, K_values, t_list, radius: float,
                  jobs: int = 1, constants: dict | None = None) -> np.ndarray:
    """Scale W1 by each K and tabulate ``||grad Phi||_t``.

    Returns
    -------
    (len(K_values) * len(t_list), 3) array of rows ``(K, t, norm)``.
    """
    def one(K):
        res = solve_multiplier(mesh, coeffs.scaled_drift(K), constants, check_coercive=False)
        norms = log_gradient_table(res, t_list, radius)["norms"]
        return [(K, t, norms[float(t)]) for t in t_list]

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            rows = list(pool.map(one, K_values))
    else:
        rows = [one(K) for K in K_values]
    return np.array([r for block in rows for r in block], dtype=float)


def interpolation_check(result: MultiplierResult, t: float, t0: float, radius: float) -> dict:
    """Compare ``||f||_t^t`` with ``||f||_2^{2g} ||f||_{t0}^{t0(1-g)}``, ``g = (t0-t)/(t0-2)``."""
    if not 2 <= t <= t0:
        raise DomainError(f"need 2 <= t <= t0, got t={t}, t0={t0}")
    g = result.grad_Phi()
    region = Region(radius)
    n2 = lebesgue_norm(result.mesh, g, 2, region)
    nt = lebesgue_norm(result.mesh, g, t, region)
    nt0 = lebesgue_norm(result.mesh, g, t0, region)
    gamma = (t0 - t) / (t0 - 2) if t0 > 2 else 1.0
    lhs = nt**t
    rhs = n2 ** (2 * gamma) * nt0 ** (t0 * (1 - gamma))
    return {"lhs": lhs, "rhs": rhs, "gamma": gamma, "holds": bool(lhs <= rhs * (1 + 1e-10))}


def max_energy_radius(z, rho75: float) -> float:
    """Largest ``c`` with ``B_{2c/5}(z)`` inside ``B_{rho75 + 1/5}``."""
    return 2.5 * (rho75 + 0.2 - float(np.linalg.norm(z)))


def local_energy_check(result: MultiplierResult, rho75: float, n_centers: int = 9,
                       n_radii: int = 6) -> dict:
    """Fit ``int_{B_r(z)} |grad phi~|^2 <= C r^mu`` for the rescaled ``phi~``.

    ``phi~ = Phi / s`` with ``s`` the smallest scale making the sup norm, the
    W1 norm and the local Dirichlet energy all at most 1; radii range over
    ``(max(1/s, 2h), c(z)/5)``.

    Returns
    -------
    dict with ``C`` (fitted constant), ``scale``, ``mu`` and the sampled rows
    ``(x, y, r, energy)``.
    """
    mesh, coeffs = result.mesh, result.coeffs
    Phi = result.Phi
    g = p1_gradient(mesh, Phi)
    big = Region(rho75 + 0.2)
    s = max(np.abs(Phi).max(), lebesgue_norm(mesh, g, 2, big),
            lebesgue_norm(mesh, coeffs.W1, coeffs.q1), 1e-300)
    gs = g / s
    eps = 1.0 / s
    mu = result.mu_exp
    rows = []
    side = np.linspace(-rho75, rho75, int(np.ceil(np.sqrt(n_centers))) + 2)[1:-1]
    centers = [np.array([x, y]) for x in side for y in side if np.hypot(x, y) < rho75]
    for z in centers:
        r_hi = max_energy_radius(z, rho75) / 5
        r_lo = max(eps, 2 * mesh.h)
        if r_hi <= r_lo:
            continue
        for r in np.geomspace(r_lo, r_hi, n_radii):
            e = lebesgue_norm(mesh, gs, 2, Region(r, 0.0, tuple(z))) ** 2
            rows.append((z[0], z[1], r, e))
    rows = np.array(rows).reshape(-1, 4)
    C = float(np.max(rows[:, 3] / rows[:, 2] ** mu)) if len(rows) else 0.0
    return {"C": C, "scale": float(s), "mu": mu, "rows": rows}


@dataclass(frozen=True)
class MaxPrincipleResult:
    """Outcome of a maximum-principle check."""

    slack: float | None
    subsolution: bool
    residual: float
    pos2: bool

    @property
    def passed(self) -> bool | None:
        if not (self.subsolution and self.pos2):
            return None
        return bool(self.slack >= -1e-10)


def max_principle_check(mesh: TriMesh, u: np.ndarray, coeffs: CoefficientSet,
                        tol: float = 1e-10) -> MaxPrincipleResult:
    """Slack ``sup_boundary u^+ - sup u`` for a discrete adjoint subsolution.

    ``u`` is a subsolution when ``B*[u, phi_i] <= 0`` for every interior hat
    function (up to ``tol`` relative to the row scale).  No verdict is given
    when this precondition or the positivity condition on (W2, V) fails.
    """
    op = assemble_bilinear(mesh, coeffs, adjoint=True)
    r = (op.matrix @ u)[mesh.interior]
    scale = tol * max(1.0, float(np.abs(u).max())) * float(abs(op.matrix).max())
    sub = bool(np.all(r <= scale))
    _, pos2 = positivity_functionals(mesh, coeffs)
    ok2 = bool(pos2.min(initial=0.0) >= -1e-12 * max(1.0, np.abs(pos2).max(initial=0)))
    slack = float(max(u[mesh.boundary_nodes].max(), 0.0) - u.max())
    return MaxPrincipleResult(slack if (sub and ok2) else None, sub, float(r.max(initial=0)), ok2)


def random_admissible_suite(n_sets: int = 10, seed: int = 0, radius: float = 1.8,
                            h: float = 0.02, constants: dict | None = None,
                            mesh: TriMesh | None = None) -> list[dict]:
    """Solve the multiplier for seeded admissible coefficient sets.

    Returns one record per set with the extremes of ``phi``, whether the
    hypotheses hold and the wall-clock solve time.
    """
    import time
    from .mesh import triangulate_disk
    from .presets import random_admissible
    mesh = mesh if mesh is not None else triangulate_disk(radius, h)
    out = []
    for k in range(n_sets):
        t0 = time.perf_counter()
        res = solve_multiplier(mesh, random_admissible(seed + k), constants)
        out.append({"seed": seed + k, "phi_min": float(res.phi.min()), "phi_max": float(res.phi.max()),
                    "hypotheses": res.hypotheses.all_hold, "bounds_ok": res.bounds_ok,
                    "seconds": time.perf_counter() - t0})
    return out


def max_principle_suite(n_seeds: int = 50, seed: int = 0, radius: float = 1.0,
                        h: float = 0.05, mesh: TriMesh | None = None) -> dict:
    """Maximum-principle slacks for seeded discrete adjoint subsolutions.

    Each subsolution solves the adjoint problem with a nonpositive source and
    random boundary data, for drifts satisfying the sign condition.
    """
    from .fem import solve_dirichlet
    from .mesh import triangulate_disk
    from .presets import random_sign_condition
    mesh = mesh if mesh is not None else triangulate_disk(radius, h)
    slacks, verdicts = [], []
    for k in range(n_seeds):
        rng = np.random.default_rng(seed + k)
        coeffs = random_sign_condition(seed + k)
        op = assemble_bilinear(mesh, coeffs, adjoint=True)
        f = -rng.uniform(0, 1, mesh.n_nodes)
        g = rng.normal(size=len(mesh.boundary_nodes))
        u = solve_dirichlet(op, g=g, f=f)
        r = max_principle_check(mesh, u, coeffs)
        verdicts.append(r.passed)
        slacks.append(np.nan if r.slack is None else r.slack)
    slacks = np.asarray(slacks)
    return {"slacks": slacks, "min_slack": float(np.nanmin(slacks)) if np.isfinite(slacks).any() else np.nan,
            "n_checked": int(np.isfinite(slacks).sum()), "passed": all(v is True for v in verdicts)}
