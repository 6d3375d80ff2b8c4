"""Three-circle checks, vanishing orders, rescaling, decay harness and the
closed-form sharpness gallery."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad
from scipy.optimize import curve_fit
from scipy.special import hyp1f1

from .beltrami import HatOperator, _relative_l2, complex_derivatives
from .fem import CoefficientSet, DomainError, constant_matrix
from .mesh import TriMesh, triangulate_disk
from .quasigeometry import FundamentalSolution, quasi_circle

LOGGER = logging.getLogger(__name__)


# Point evaluation ------------------------------------------------------------

def _point_function(f):
    """Normalize ``f`` to a callable on (n, 2) points.

    Accepts a callable ``f(x, y)`` or a pair ``(mesh, nodal values)``.
    """
    if callable(f):
        return lambda p: np.asarray(f(p[:, 0], p[:, 1]))
    mesh, vals = f
    vals = np.asarray(vals)
    if np.iscomplexobj(vals):
        return lambda p: mesh.interpolate(vals.real, p) + 1j * mesh.interpolate(vals.imag, p)
    return lambda p: mesh.interpolate(vals, p)


def disk_samples(center, r: float, n_rings: int = 32, n_angles: int = 128) -> np.ndarray:
    """Polar sample points of the closed disk ``B_r(center)``, center included."""
    rho = r * np.arange(1, n_rings + 1) / n_rings
    th = 2 * np.pi * np.arange(n_angles) / n_angles
    pts = (rho[:, None] * np.exp(1j * th)[None, :]).ravel()
    pts = np.concatenate([[0.0], pts]) + complex(*np.asarray(center, float))
    return np.column_stack([pts.real, pts.imag])


# Three circles ---------------------------------------------------------------

@dataclass(frozen=True)
class ThreeCircleRecord:
    s1: float
    s2: float
    s3: float
    M1: float
    M2: float
    M3: float
    residual: float = np.nan

    @property
    def theta(self) -> float:
        return float(np.log(self.s3 / self.s2) / np.log(self.s3 / self.s1))

    @property
    def slack(self) -> float:
        t = self.theta
        return float(t * np.log(self.M1) + (1 - t) * np.log(self.M3) - np.log(self.M2))

    def row(self) -> tuple:
        return (self.s1, self.s2, self.s3, self.theta, self.slack)


def three_circle_check(f, fs: FundamentalSolution, s1: float, s2: float, s3: float,
                       n: int = 512, residual: float = np.nan) -> ThreeCircleRecord:
    """Maxima of ``|f|`` on three quasi-circles and the log-convexity slack."""
    if not 0 < s1 < s2 < s3:
        raise ValueError("need 0 < s1 < s2 < s3")
    F = _point_function(f)
    M = [float(np.abs(F(quasi_circle(fs, s).resample(n))).max()) for s in (s1, s2, s3)]
    return ThreeCircleRecord(s1, s2, s3, *M, residual=residual)


def constant_fundamental_solution(A0, mesh: TriMesh) -> FundamentalSolution:
    """Fundamental solution of a constant symmetric matrix (no correction)."""
    A0 = np.asarray(A0, float)
    return FundamentalSolution(mesh, constant_matrix(A0), A0, np.zeros(mesh.n_nodes))


def random_null_field(rng: np.random.Generator, mu_max: float = 0.5, degree: int = 4):
    """Random ``f = F(z - mu conj z)`` with ``F`` a polynomial; ``Dhat f = 0``.

    Returns ``(hat, f)`` with ``f`` a callable ``f(x, y)``.
    """
    mu = mu_max * np.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
    c = rng.normal(size=degree + 1) + 1j * rng.normal(size=degree + 1)
    c[0] += 3.0 * np.exp(2j * np.pi * rng.random())

    def f(x, y):
        z = np.asarray(x) + 1j * np.asarray(y)
        return np.polyval(c[::-1], z - mu * np.conj(z))
    return HatOperator(float(mu.real), float(mu.imag)), f


def null_field_scenario(seed: int, mesh: TriMesh | None = None, n: int = 512,
                        mu_max: float = 0.5) -> ThreeCircleRecord:
    """Three-circle record for one random discrete null field.

    The field is interpolated from its nodal values and the recorded
    residual is the relative ``Dhat`` residual on the mesh.
    """
    rng = np.random.default_rng(seed)
    mesh = mesh or triangulate_disk(2.0, 0.05, refine=[(0.0, 0.0)])
    hat, f = random_null_field(rng, mu_max)
    Ah = hat.A_hat
    fs = constant_fundamental_solution(Ah, mesh)
    vals = f(mesh.nodes[:, 0], mesh.nodes[:, 1])
    res = _dhat_only(mesh, vals, hat)
    s_max = 0.85 * mesh.radius / np.sqrt(np.linalg.eigvalsh(Ah)[-1])
    s = np.sort(rng.uniform(0.15, 1.0, 3)) * s_max
    s = s + np.array([0.0, 1e-3, 2e-3]) * s_max
    return three_circle_check((mesh, vals), fs, *s, n=n, residual=res)


def _dhat_only(mesh, vals, hat):
    d, db = complex_derivatives(mesh, vals)
    return _relative_l2(mesh, hat.apply(mesh, vals), np.abs(d) + np.abs(db))


# Vanishing order ---------------------------------------------------------------

@dataclass
class VanishingOrderFit:
    r: np.ndarray
    sup: np.ndarray
    order: float
    fit_residual: float
    used: np.ndarray
    K: float | None = None
    normalization: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"order": self.order, "fit_residual": self.fit_residual, "K": self.K,
                "n_used": int(self.used.sum()), "normalization": self.normalization,
                "notes": list(self.notes)}


def sup_norms(u, r_grid, center=(0.0, 0.0), log: bool = False) -> np.ndarray:
    """``sup_{B_r} |u|`` on polar samples for each r (``log|u|`` maxima if
    ``log`` and ``u`` already returns ``log|u|``)."""
    F = _point_function(u)
    out = []
    for r in r_grid:
        v = F(disk_samples(center, r))
        out.append(np.max(v) if log else np.max(np.abs(v)))
    return np.asarray(out, dtype=float)


def vanishing_order(u, r_grid, K: float | None = None, center=(0.0, 0.0),
                    floor: float = 1e-13, log: bool = False,
                    normalization: dict | None = None) -> VanishingOrderFit:
    """Fit ``sup_{B_r}|u| ~ r^ord`` over the smallest usable decade of r.

    Radii whose sup falls below ``floor`` are dropped; the fit is weighted
    least squares with weights ``1/log(1/r)``.  ``log=True`` means ``u``
    returns ``log|u|`` (for profiles that would underflow).
    """
    r = np.asarray(r_grid, dtype=float)
    if np.any(np.diff(r) >= 0):
        raise ValueError("r_grid must be strictly decreasing")
    s = sup_norms(u, r, center, log=log)
    ls = s if log else np.log(np.where(s > 0, s, np.nan))
    ok = np.isfinite(ls) & (ls > np.log(floor))
    notes = []
    if np.any(~ok):
        notes.append(f"dropped {int((~ok).sum())} radii below {floor:g}")
    if ok.sum() < 2:
        raise DomainError("fewer than two usable radii for the order fit")
    rmin = r[ok].min()
    used = ok & (r <= 10 * rmin * (1 + 1e-12))
    if used.sum() < 2:
        used = ok & (r <= np.sort(r[ok])[1] * (1 + 1e-12))
    w = 1.0 / np.maximum(np.log(1.0 / r[used]), 1e-3)
    coef, res, *_ = np.polyfit(np.log(r[used]), ls[used], 1, w=np.sqrt(w), full=True)
    resid = float(np.sqrt(res[0] / used.sum())) if len(res) else 0.0
    return VanishingOrderFit(r, np.exp(ls) if log else s, float(coef[0]), resid, used, K,
                             normalization or {}, notes)


def kummer_solution(n: int, c: float):
    """``u = r^n M(n+1, 2n+1, c r) cos(n theta)`` solving
    ``div(grad u - c e_r u) = 0``.

    Returns ``(u, R, log_u)``; ``log_u`` gives ``log|u|`` without underflow.
    """
    def R(r):
        return np.asarray(r, float) ** n * hyp1f1(n + 1, 2 * n + 1, c * np.asarray(r, float))

    def u(x, y):
        r, th = np.hypot(x, y), np.arctan2(y, x)
        return R(r) * np.cos(n * th)

    def log_u(x, y):
        r, th = np.hypot(x, y), np.arctan2(y, x)
        with np.errstate(divide="ignore"):
            return (n * np.log(r) + np.log(hyp1f1(n + 1, 2 * n + 1, c * r))
                    + np.log(np.abs(np.cos(n * th))))
    return u, R, log_u


def drift_family_member(K: float, q: float = 4.0, C0: float = 1.0, d: float = 1.8,
                        b: float = 1.0, n_max: int = 2000):
    """Extremal member of the radial-drift family at drift size K.

    The drift ``W = -c e_r`` has ``||W||_{L^q(B_d)} = K``.  The order n is
    the largest one for which the solution normalized by
    ``sup_{B_b}|u| = 1`` keeps ``sup_{B_d}|u| <= exp(C0 K)``.

    Returns ``(n, c, u, log_u)`` for the normalized solution.
    """
    c = K if np.isinf(q) else K / (np.pi * d**2) ** (1 / q)
    best = 0
    for n in range(1, n_max + 1):
        _, R, _ = kummer_solution(n, c)
        if np.log(R(d)) - np.log(R(b)) <= C0 * K:
            best = n
        else:
            break
    if best == 0:
        raise DomainError("no admissible order for this K and C0")
    u, R, log_u = kummer_solution(best, c)
    scale = R(b)
    return best, c, (lambda x, y: u(x, y) / scale), (lambda x, y: log_u(x, y) - np.log(scale))


def k_scan(K_values=(8, 16, 32, 64), q: float = 4.0, C0: float = 1.0, d: float = 1.8,
           b: float = 1.0, r_grid=None) -> dict:
    """Fitted orders across the radial-drift family and the log-log slope
    of order against K."""
    r_grid = np.geomspace(0.5, 0.005, 31) if r_grid is None else r_grid
    rows = []
    for K in K_values:
        n, c, _, log_u = drift_family_member(K, q, C0, d, b)
        fit = vanishing_order(log_u, r_grid, K=K, log=True, floor=1e-300,
                              normalization={"C0": C0, "d": d, "b": b})
        rows.append((K, n, c, fit.order))
    rows = np.array(rows)
    slope = float(np.polyfit(np.log(rows[:, 0]), np.log(rows[:, 3]), 1)[0])
    return {"rows": rows, "slope": slope}


def gradient_normalized_monomial(n: int, b_tilde: float, log: bool = False):
    """``Re z^n`` scaled to ``||grad u||_{L^2(B_b~)} = 1`` (or its ``log|u|``)."""
    log_scale = 0.5 * np.log(np.pi * n) + n * np.log(b_tilde)
    if log:
        def log_u(x, y):
            r, th = np.hypot(x, y), np.arctan2(y, x)
            with np.errstate(divide="ignore"):
                return n * np.log(r) + np.log(np.abs(np.cos(n * th))) - log_scale
        return log_u
    return lambda x, y: np.real((np.asarray(x) + 1j * np.asarray(y)) ** n) / np.exp(log_scale)


def m_scan(M_values, K: float = 0.0, d: float = 1.8, b_tilde: float = 1.2,
           r_grid=None) -> dict:
    """Largest admissible monomial order for each bound M and the envelope
    constant ``max ord / (log M + K^2)``."""
    r_grid = np.geomspace(0.5, 0.005, 31) if r_grid is None else r_grid
    rows = []
    for M in M_values:
        n = 0
        while True:
            m = n + 1
            log_sup_d = m * np.log(d / b_tilde) - 0.5 * np.log(np.pi * m)
            if log_sup_d > np.log(M):
                break
            n = m
        if n == 0:
            continue
        fit = vanishing_order(gradient_normalized_monomial(n, b_tilde, log=True), r_grid,
                              log=True, floor=1e-300)
        rows.append((M, n, fit.order, fit.order / (np.log(M) + K**2)))
    rows = np.array(rows)
    return {"rows": rows, "C": float(rows[:, 3].max())}


def sucp_probe(u, decades: int = 4, per_decade: int = 8, log: bool = False) -> dict:
    """Fitted order on successive decades ``[10^-k-1, 10^-k]``.

    A profile is flagged as infinite-order when the orders keep growing by
    more than a factor 2 per decade.
    """
    orders = []
    for k in range(decades):
        r = np.geomspace(10.0**-k, 10.0 ** -(k + 1), per_decade)
        try:
            orders.append(vanishing_order(u, r, log=log, floor=1e-300 if log else 1e-13).order)
        except DomainError:
            break
    o = np.asarray(orders)
    growing = len(o) >= 3 and bool(np.all(o[1:] > 2 * o[:-1]))
    return {"orders": o, "infinite_order": growing}


# Rescaling --------------------------------------------------------------------

def disk_lq_norm(F, center, radius: float, q: float, n_r: int = 48,
                 n_theta: int = 192) -> float:
    """L^q norm of a scalar or vector field on a disk by polar Gauss quadrature."""
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = radius * (x + 1) / 2
    wr = radius / 2 * w * r
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    c = np.asarray(center, float)
    X = c[0] + r[:, None] * np.cos(th)[None, :]
    Y = c[1] + r[:, None] * np.sin(th)[None, :]
    v = np.asarray(F(X, Y), float)
    mag = np.linalg.norm(v, axis=-1) if v.ndim == 3 else np.abs(v)
    if np.isinf(q):
        Xb, Yb = c[0] + radius * np.cos(th), c[1] + radius * np.sin(th)
        vb = np.asarray(F(Xb, Yb), float)
        mb = np.linalg.norm(vb, axis=-1) if vb.ndim == 2 else np.abs(vb)
        return float(max(mag.max(), mb.max()))
    return float((np.sum(wr[:, None] * mag**q) * 2 * np.pi / n_theta) ** (1 / q))


@dataclass(frozen=True)
class RescaledProblem:
    u: object
    coeffs: CoefficientSet
    z0: tuple
    R: float


def rescale_problem(u, coeffs: CoefficientSet, z0, R: float) -> RescaledProblem:
    """``u_R(z) = u(z0 + R z)`` with ``A_R = A(z0 + R z)``,
    ``W_R = R W(z0 + R z)`` and ``V_R = R^2 V(z0 + R z)``."""
    x0, y0 = float(z0[0]), float(z0[1])
    A, W1, W2, V = coeffs.A, coeffs.W1, coeffs.W2, coeffs.V

    def mv(x, y):
        return x0 + R * np.asarray(x), y0 + R * np.asarray(y)
    scaled = replace(coeffs, A=lambda x, y: A(*mv(x, y)),
                     W1=lambda x, y: R * np.asarray(W1(*mv(x, y))),
                     W2=lambda x, y: R * np.asarray(W2(*mv(x, y))),
                     V=lambda x, y: R**2 * np.asarray(V(*mv(x, y))),
                     name=coeffs.name + f"@R={R:g}", norms={})
    uR = None if u is None else (lambda x, y: u(*mv(x, y)))
    return RescaledProblem(uR, scaled, (x0, y0), R)


def rescaling_identity(W, z0, R: float, r: float, q: float) -> dict:
    """Both sides of ``||W_R||_{L^q(B_r)} = R^{1-2/q} ||W||_{L^q(B_{rR}(z0))}``."""
    prob = rescale_problem(None, CoefficientSet(W1=W), z0, R)
    lhs = disk_lq_norm(prob.coeffs.W1, (0.0, 0.0), r, q)
    e = 1.0 if np.isinf(q) else 1 - 2 / q
    rhs = R**e * disk_lq_norm(W, z0, r * R, q)
    return {"lhs": lhs, "rhs": rhs, "relative": abs(lhs - rhs) / max(abs(rhs), 1e-300)}


# Decay harness -----------------------------------------------------------------

DECAY_FAMILIES = ("divergence_drift", "gradient_drift", "full_three_term", "constant")


@dataclass
class DecayTable:
    R: np.ndarray
    value: np.ndarray
    exponent: float
    coef: float
    offset: float
    degenerate: bool
    target: float

    def rows(self):
        return [(float(R), float(v), self.exponent) for R, v in zip(self.R, self.value)]


def landis_harness(u, R_grid, q: float = np.inf, family: str = "divergence_drift",
                   n_angles: int = 16) -> DecayTable:
    """Decay of ``min_{|z0|=R} sup_{B_1(z0)} |u|`` and a fit ``-log v = c R^a + b``.

    Only scenario families with a scaling argument are accepted.
    """
    if family not in DECAY_FAMILIES:
        raise DomainError(f"family {family!r} has no decay estimate; use one of {DECAY_FAMILIES}")
    F = _point_function(u)
    R_grid = np.asarray(R_grid, float)
    vals = []
    for R in R_grid:
        th = 2 * np.pi * np.arange(n_angles) / n_angles
        best = np.inf
        for t in th:
            z0 = (R * np.cos(t), R * np.sin(t))
            best = min(best, float(np.abs(F(disk_samples(z0, 1.0, 16, 64))).max()))
        vals.append(best)
    vals = np.asarray(vals)
    target = 1.0 if np.isinf(q) else 1 - 2 / q
    y = -np.log(vals)
    if np.ptp(y) < 1e-9 * max(1.0, np.abs(y).max()):
        return DecayTable(R_grid, vals, np.nan, np.nan, np.nan, True, target)
    model = lambda R, c, a, b: c * R**a + b
    p0 = (max(y[-1] - y[0], 1e-3) / (R_grid[-1] - R_grid[0]), 1.0, y[0] - (y[-1] - y[0]) / (R_grid[-1] - R_grid[0]) * R_grid[0])
    (c, a, b), _ = curve_fit(model, R_grid, y, p0=p0, maxfev=20000)
    return DecayTable(R_grid, vals, float(a), float(c), float(b), False, target)


# Sharpness gallery ---------------------------------------------------------------

GALLERY = ("divergence_drift", "gradient_drift", "full_three_term")


def gallery_alpha(q: float, delta: float | None = None) -> tuple[float, float]:
    """``(alpha, delta)`` with ``alpha = 1 - (2 + 2 delta)/q``; alpha = 1 for q = inf."""
    if np.isinf(q):
        return 1.0, 0.0
    if q <= 2:
        raise DomainError("q must exceed 2")
    delta = (q - 2) / 4 if delta is None else delta
    return 1 - (2 + 2 * delta) / q, delta


@dataclass
class SharpnessCase:
    case_id: str
    alpha: float
    q: float
    delta: float

    def _radial(self, x, y):
        r = np.hypot(x, y)
        return r, np.stack([x / r, y / r], -1)

    def u(self, x, y):
        r = np.hypot(x, y)
        return np.exp(-r**self.alpha)

    def coefficients(self) -> CoefficientSet:
        a = self.alpha

        def radial(fn):
            def W(x, y):
                r, e = self._radial(np.asarray(x, float), np.asarray(y, float))
                return fn(r)[..., None] * e
            return W
        if self.case_id == "divergence_drift":
            return CoefficientSet(W1=radial(lambda r: a * r ** (a - 1)), q1=self.q, name=self.case_id)
        if self.case_id == "gradient_drift":
            return CoefficientSet(W2=radial(lambda r: -a * r ** (a - 1) * (1 - r**-a)),
                                  q2=self.q, name=self.case_id)
        return CoefficientSet(W1=radial(lambda r: np.full_like(r, 1 / 3)),
                              W2=radial(lambda r: -(1 - 1 / r) / 3),
                              V=lambda x, y: (1 - 1 / np.hypot(x, y)) / 3,
                              q1=np.inf, q2=np.inf, p=np.inf, name=self.case_id)

    def residual(self, pts: np.ndarray) -> np.ndarray:
        """Pointwise ``-div(grad u + W1 u) + W2 . grad u + V u`` from the
        radial derivative formulas ``u_r = -a r^{a-1} u`` and
        ``lap u = a^2 r^{2a-2}(1 - r^{-a}) u``."""
        x, y = pts[:, 0], pts[:, 1]
        a, r = self.alpha, np.hypot(x, y)
        u = self.u(x, y)
        ur = -a * r ** (a - 1) * u
        lap = a**2 * r ** (2 * a - 2) * (1 - r**-a) * u
        if self.case_id == "divergence_drift":
            w = a * r ** (a - 1)
            div_w = a**2 * r ** (a - 2)
            return -(lap + div_w * u + w * ur)
        if self.case_id == "gradient_drift":
            w = -a * r ** (a - 1) * (1 - r**-a)
            return -lap + w * ur
        w1, w2, V = 1 / 3, -(1 - 1 / r) / 3, (1 - 1 / r) / 3
        return -(lap + w1 * (ur + u / r)) + w2 * ur + V * u

    def lq_norm_power(self) -> dict:
        """``||W||_q^q`` over the exterior of the unit disk by quadrature,
        with the closed form ``2 pi alpha^q / (2 delta)`` for the first case."""
        if np.isinf(self.q):
            W = self.coefficients()
            pts = annulus_samples(200, 1.0, 50.0, seed=1)
            w1 = np.linalg.norm(W.W1(pts[:, 0], pts[:, 1]), axis=-1).max()
            w2 = np.linalg.norm(W.W2(pts[:, 0], pts[:, 1]), axis=-1).max()
            return {"sup_W1": float(w1), "sup_W2": float(w2)}
        a, q = self.alpha, self.q
        if self.case_id == "divergence_drift":
            mag = lambda r: a * r ** (a - 1)
        else:
            mag = lambda r: a * r ** (a - 1) * abs(1 - r**-a)
        val = 2 * np.pi * quad(lambda r: mag(r) ** q * r, 1, np.inf, limit=200)[0]
        out = {"quadrature": float(val)}
        if self.case_id == "divergence_drift":
            out["closed_form"] = float(2 * np.pi * a**q / (2 * self.delta))
        return out


def annulus_samples(n: int, r0: float, r1: float, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.uniform(r0**2, r1**2, n))
    t = rng.uniform(0, 2 * np.pi, n)
    return np.column_stack([r * np.cos(t), r * np.sin(t)])


def symbolic_residual(case: SharpnessCase):
    """Independent residual evaluator built by symbolic differentiation."""
    import sympy as sp
    x, y = sp.symbols("x y", real=True)
    r = sp.sqrt(x**2 + y**2)
    a = sp.nsimplify(case.alpha)
    u = sp.exp(-r**a)
    ex, ey = x / r, y / r
    zero = sp.Integer(0)
    if case.case_id == "divergence_drift":
        W1, W2, V = (a * r ** (a - 1) * ex, a * r ** (a - 1) * ey), (zero, zero), zero
    elif case.case_id == "gradient_drift":
        m = -a * r ** (a - 1) * (1 - r**-a)
        W1, W2, V = (zero, zero), (m * ex, m * ey), zero
    else:
        W1 = (ex / 3, ey / 3)
        W2 = (-(1 - 1 / r) * ex / 3, -(1 - 1 / r) * ey / 3)
        V = (1 - 1 / r) / 3
    flux = (sp.diff(u, x) + W1[0] * u, sp.diff(u, y) + W1[1] * u)
    expr = -(sp.diff(flux[0], x) + sp.diff(flux[1], y)) \
        + W2[0] * sp.diff(u, x) + W2[1] * sp.diff(u, y) + V * u
    f = sp.lambdify((x, y), expr, "numpy")
    return lambda pts: np.asarray(f(pts[:, 0], pts[:, 1]), float) * np.ones(len(pts))


def sharpness_gallery(case_id: str, q: float = np.inf, delta: float | None = None,
                      n_samples: int = 200, r0: float = 1.1, r1: float = 5.0,
                      seed: int = 0) -> dict:
    """Closed-form exterior solution with its residual and norm reports."""
    if case_id not in GALLERY:
        raise DomainError(f"unknown gallery case {case_id!r}; expected one of {GALLERY}")
    if case_id == "full_three_term":
        alpha, delta, q = 1.0, 0.0, np.inf
    else:
        alpha, delta = gallery_alpha(q, delta)
    case = SharpnessCase(case_id, alpha, q, delta)
    pts = annulus_samples(n_samples, r0, r1, seed)
    res = case.residual(pts)
    report = {"case": case, "points": pts, "residual_max": float(np.abs(res).max()),
              "norms": case.lq_norm_power()}
    if case_id == "full_three_term":
        C = case.coefficients()
        x, y = pts[:, 0], pts[:, 1]
        W1, W2, V = C.W1(x, y), C.W2(x, y), C.V(x, y)
        report["sign_min"] = float(np.min(V - np.sum(W1 * W2, axis=-1)))
        hstep = 1e-5
        curl = ((C.W1(x + hstep, y)[:, 1] - C.W1(x - hstep, y)[:, 1])
                - (C.W1(x, y + hstep)[:, 0] - C.W1(x, y - hstep)[:, 0])) / (2 * hstep)
        report["curl_max"] = float(np.abs(curl).max())
    return report


# Sub/supersolution multiplier ------------------------------------------------------

def subsupersolution_multiplier(K: float, coeffs: CoefficientSet | None = None,
                                radius: float = 9 / 5, C1: float = 6.0,
                                n_samples: int = 400, seed: int = 0) -> dict:
    """``phi1 = exp(3 K x)`` and ``phi2 = exp(6 K)`` for
    ``-lap phi + (W1 + W2) . grad phi + (V - W1 . W2) phi = 0`` on ``B_radius``.

    With ``coeffs`` given, the operator applied to phi1 (must be <= 0) and
    to phi2 (must be >= 0) is sampled pointwise.
    """
    eta = 3 * K
    quad_coef = -(eta**2) + 2 * K * eta + 2 * K**2
    lo, hi = np.exp(-eta * radius), np.exp(eta * radius)
    out = {"eta": eta, "quadratic": quad_coef, "phi1_min": lo, "phi1_max": hi,
           "phi2": np.exp(6 * K), "ordered": bool(np.exp(6 * K) >= hi),
           "envelope": bool(np.exp(-C1 * K) <= lo and hi <= np.exp(C1 * K))}
    if coeffs is not None:
        rng = np.random.default_rng(seed)
        rr = radius * np.sqrt(rng.random(n_samples))
        th = 2 * np.pi * rng.random(n_samples)
        x, y = rr * np.cos(th), rr * np.sin(th)
        W1 = np.broadcast_to(coeffs.W1(x, y), x.shape + (2,))
        W2 = np.broadcast_to(coeffs.W2(x, y), x.shape + (2,))
        V = np.broadcast_to(coeffs.V(x, y), x.shape)
        c = V - np.sum(W1 * W2, axis=-1)
        phi1 = np.exp(eta * x)
        L1 = (-(eta**2) + (W1[:, 0] + W2[:, 0]) * eta + c) * phi1
        out["sub_max"] = float((L1 / phi1).max())
        out["super_min"] = float(c.min())
    return out
