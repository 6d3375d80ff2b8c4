"""Cauchy and Beurling transforms on uniform grids and the similarity solver.

``T w(z) = -1/pi int w(zeta) / (zeta - z)`` and ``S w = d(T w)``.  S acts
as the Fourier multiplier ``conj(k)/k`` (``k = k_x + i k_y``) on the
periodic box, which makes it an exact L^2 isometry on the grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

LOGGER = logging.getLogger(__name__)

ZERO_TOL = 1e-12


class ContractionError(ValueError):
    """The Neumann iteration would not contract; carries the measured factor."""

    def __init__(self, factor: float, p: float, C_p: float):
        super().__init__(f"contraction factor {factor:.4f} >= 1 (p={p:g}, C_p={C_p:.4f})")
        self.factor, self.p, self.C_p = factor, p, C_p


@dataclass(frozen=True)
class UniformComplexGrid:
    """Cell-centered ``N x N`` grid on ``[-2R, 2R]^2`` around ``center``.

    Arrays are indexed ``[iy, ix]``.  ``mask`` marks the disk ``|z - c| < R``.
    """

    radius: float
    N: int
    center: complex = 0j
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two >= 8")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def h(self) -> float:
        return 4.0 * self.radius / self.N

    @property
    def x(self) -> np.ndarray:
        return -2 * self.radius + (np.arange(self.N) + 0.5) * self.h

    @property
    def z(self) -> np.ndarray:
        if "z" not in self._cache:
            X, Y = np.meshgrid(self.x, self.x, indexing="xy")
            self._cache["z"] = self.center + X + 1j * Y
        return self._cache["z"]

    @property
    def mask(self) -> np.ndarray:
        return np.abs(self.z - self.center) < self.radius

    def disk(self, r: float) -> np.ndarray:
        return np.abs(self.z - self.center) < r

    @property
    def wavenumber(self) -> np.ndarray:
        """``k_x + i k_y`` on the FFT layout."""
        if "k" not in self._cache:
            k = 2 * np.pi * np.fft.fftfreq(self.N, d=self.h)
            KX, KY = np.meshgrid(k, k, indexing="xy")
            self._cache["k"] = KX + 1j * KY
        return self._cache["k"]

    @property
    def multiplier(self) -> np.ndarray:
        if "m" not in self._cache:
            k = self.wavenumber
            m = np.ones_like(k)
            nz = k != 0
            m[nz] = np.conj(k[nz]) / k[nz]
            self._cache["m"] = m
        return self._cache["m"]

    def l2(self, f, where=None) -> float:
        f = np.asarray(f)
        if where is not None:
            f = f[where]
        return float(np.sqrt(np.sum(np.abs(f) ** 2) * self.h**2))

    def lp(self, f, p: float, where=None) -> float:
        a = np.abs(np.asarray(f))
        if where is not None:
            a = a[where]
        if np.isinf(p):
            return float(a.max())
        return float((np.sum(a**p) * self.h**2) ** (1 / p))

    def d(self, f) -> np.ndarray:
        """Centered finite-difference ``d f``."""
        fy, fx = np.gradient(f, self.h)
        return (fx - 1j * fy) / 2

    def dbar(self, f) -> np.ndarray:
        fy, fx = np.gradient(f, self.h)
        return (fx + 1j * fy) / 2

    def sample(self, func) -> np.ndarray:
        z = self.z
        return np.asarray(func(z.real, z.imag), dtype=complex) * np.ones(z.shape)

    def interior(self, margin: int = 2) -> np.ndarray:
        """Mask points at least ``margin`` cells from the disk edge."""
        return self.disk(self.radius - margin * self.h)


def beurling_transform(grid: UniformComplexGrid, w) -> np.ndarray:
    """``S w`` by the Fourier multiplier ``conj(k)/k`` (with ``m(0) = 1``)."""
    return np.fft.ifft2(np.fft.fft2(np.asarray(w, dtype=complex)) * grid.multiplier)


def beurling_adjoint(grid: UniformComplexGrid, w) -> np.ndarray:
    return np.fft.ifft2(np.fft.fft2(np.asarray(w, dtype=complex)) * np.conj(grid.multiplier))


def _direct_kernel(grid: UniformComplexGrid) -> np.ndarray:
    if "K" not in grid._cache:
        N, h = grid.N, grid.h
        o = (np.arange(2 * N) - N) * h
        OX, OY = np.meshgrid(o, o, indexing="xy")
        off = OX + 1j * OY
        K = np.zeros_like(off)
        nz = off != 0
        # offset z - zeta; the self cell integrates to zero by symmetry
        K[nz] = 1.0 / (np.pi * off[nz])
        grid._cache["K"] = np.fft.fft2(np.fft.ifftshift(K))
    return grid._cache["K"]


def _cauchy_direct(grid: UniformComplexGrid, w: np.ndarray) -> np.ndarray:
    N = grid.N
    pad = np.zeros((2 * N, 2 * N), dtype=complex)
    pad[:N, :N] = w
    out = np.fft.ifft2(np.fft.fft2(pad) * _direct_kernel(grid)) * grid.h**2
    return out[:N, :N]


def _cauchy_at(grid: UniformComplexGrid, w: np.ndarray, pts: np.ndarray) -> np.ndarray:
    z, h2 = grid.z.ravel(), grid.h**2
    wf = w.ravel()
    nz = wf != 0
    return np.array([np.sum(wf[nz] / (z[nz] - p)) for p in pts]) * (-h2 / np.pi)


def cauchy_transform(grid: UniformComplexGrid, w, method: str = "spectral") -> np.ndarray:
    """Cauchy transform of a grid field supported in the mask.

    Parameters
    ----------
    grid : UniformComplexGrid
    w : complex array (N, N)
    method : {"spectral", "direct"}
        ``"spectral"`` divides by the symbol of ``dbar`` on the periodic box,
        so that ``d T = S`` holds exactly with the multiplier S.  The mean
        enters as ``mean * (z + conj z)`` and the additive constant is fixed
        by direct quadrature on the circle ``|z| = 1.25 R``.  ``"direct"`` is
        the zero-padded discrete convolution with the Cauchy kernel.

    Returns
    -------
    complex array (N, N)
    """
    w = np.asarray(w, dtype=complex)
    if method == "direct":
        return _cauchy_direct(grid, w)
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    if not np.any(w):
        return np.zeros_like(w)
    k = grid.wavenumber
    mean = w.mean()
    sym = 1j * k / 2
    sym[0, 0] = 1.0
    That = np.fft.fft2(w - mean) / sym
    That[0, 0] = 0.0
    zc = grid.z - grid.center
    T = np.fft.ifft2(That) + mean * (zc + np.conj(zc))
    # fix the constant against the true transform on a circle off the support
    th = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    pts = grid.center + 1.25 * grid.radius * np.exp(1j * th)
    exact = _cauchy_at(grid, w, pts)
    ix = np.clip(np.round((pts.real - grid.center.real + 2 * grid.radius) / grid.h - 0.5).astype(int), 0, grid.N - 1)
    iy = np.clip(np.round((pts.imag - grid.center.imag + 2 * grid.radius) / grid.h - 0.5).astype(int), 0, grid.N - 1)
    return T + np.mean(exact - T[iy, ix])


def lp_operator_norm(grid: UniformComplexGrid, p: float, n_trials: int = 4,
                     iters: int = 12, seed: int = 0) -> float:
    """Lower estimate of the L^p operator norm of S on the grid.

    Uses the nonlinear power method for p-norms from several random starts
    supported in the mask.  Exactly 1 for ``p = 2``.
    """
    if p == 2:
        return 1.0
    if not (1 < p < np.inf):
        raise ValueError("p must lie in (1, inf)")
    rng = np.random.default_rng(seed)
    q = p / (p - 1)
    mask = grid.mask
    best = 1.0

    def dual(v, r):
        a = np.abs(v)
        return np.where(a > 0, a ** (r - 2) * v, 0)

    for _ in range(n_trials):
        x = (rng.normal(size=mask.shape) + 1j * rng.normal(size=mask.shape)) * mask
        for _ in range(iters):
            Sx = beurling_transform(grid, x)
            best = max(best, grid.lp(Sx, p) / grid.lp(x, p))
            x = dual(beurling_adjoint(grid, dual(Sx, p)), q) * mask
            nrm = grid.lp(x, p)
            if nrm == 0:
                break
            x = x / nrm
    return best


def working_exponent(t: float, cap: float = 4.0) -> float:
    """``p = min(t, 2 + (t - 2)/2)``, capped for unbounded ``t``."""
    if t < 2:
        raise ValueError("t must be >= 2")
    return float(min(t, 2 + (t - 2) / 2, cap))


@dataclass
class SimilarityFactorization:
    """``w = f g`` with ``g = exp(T omega)`` and ``dbar f + q0 d f = 0``."""

    omega: np.ndarray
    h_rhs: np.ndarray
    q0: np.ndarray
    T_omega: np.ndarray
    g: np.ndarray
    f: np.ndarray
    iterations: int
    residual: float
    history: list
    factor: float
    p: float
    C_p: float
    f_residual: float = np.nan

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "residual": self.residual,
                "factor": self.factor, "p": self.p, "C_p": self.C_p,
                "f_residual": self.f_residual,
                "log_g_min": float(np.log(np.abs(self.g)).min()),
                "log_g_max": float(np.log(np.abs(self.g)).max())}


def _field(grid, v):
    if callable(v):
        return grid.sample(v)
    return np.asarray(v, dtype=complex) * np.ones((grid.N, grid.N))


def solve_similarity(grid: UniformComplexGrid, w, q1, q2, A, B, t: float = 2.0,
                     tol: float = 1e-10, maxiter: int = 500, C_p: float | None = None,
                     dw=None) -> SimilarityFactorization:
    """Solve ``omega + q0 S omega = h`` and factor ``w = f exp(T omega)``.

    Parameters
    ----------
    grid : UniformComplexGrid
    w : complex array or callable
        Solution of ``dbar w + q1 d w + q2 conj(d w) = A w + B conj(w)``.
    q1, q2, A, B : arrays, scalars or callables
        Coefficients; set to zero outside the mask.
    t : float
        Integrability exponent of ``A`` and ``B``; selects the working p.
    tol : float
        Relative L^2 residual at which the Neumann iteration stops.
    C_p : float, optional
        Norm of S on L^p; estimated on the grid when omitted.
    dw : array, optional
        ``d w``; finite differences are used when omitted.

    Raises
    ------
    ContractionError
        If ``sup |q0| * C_p >= 1``.
    """
    mask = grid.mask
    w = _field(grid, w)
    q1, q2 = _field(grid, q1) * mask, _field(grid, q2) * mask
    A, B = _field(grid, A) * mask, _field(grid, B) * mask
    if np.max(np.abs(q1) + np.abs(q2)) >= 1:
        raise ContractionError(float(np.max(np.abs(q1) + np.abs(q2))), 2.0, 1.0)
    dw = grid.d(w) if dw is None else np.asarray(dw, dtype=complex)
    small = np.abs(dw) < ZERO_TOL
    q0 = np.where(small, q1 + q2, q1 + q2 * np.conj(dw) / np.where(small, 1, dw))
    wsmall = (np.abs(w) < ZERO_TOL) | ~np.isfinite(w)
    h = np.where(wsmall, A + B, A + B * np.conj(w) / np.where(wsmall, 1, w)) * mask
    p = working_exponent(t)
    if C_p is None:
        C_p = lp_operator_norm(grid, p)
    factor = float(np.abs(q0).max() * C_p)
    if factor >= 1:
        raise ContractionError(factor, p, C_p)
    omega = np.zeros_like(h)
    hn = max(grid.l2(h), 1e-300)
    history = []
    for it in range(1, maxiter + 1):
        omega = h - q0 * beurling_transform(grid, omega)
        res = grid.l2(omega + q0 * beurling_transform(grid, omega) - h) / hn
        history.append(res)
        if res <= tol:
            break
    else:
        LOGGER.warning("similarity iteration stopped at %d with residual %.3e", maxiter, res)
    Tw = cauchy_transform(grid, omega)
    g = np.exp(Tw)
    f = w * np.exp(-Tw)
    out = SimilarityFactorization(omega, h, q0, Tw, g, f, it, res, history, factor, p, C_p)
    inner = grid.interior(3)
    Df = grid.dbar(f) + q0 * grid.d(f)
    ref = np.abs(grid.dbar(f)) + np.abs(grid.d(f))
    out.f_residual = grid.l2(Df, inner) / max(grid.l2(ref, inner), 1e-300)
    return out


def exp_moment(grid: UniformComplexGrid, hfield, s: float, r: float,
               log: bool = False) -> float:
    """Average of ``exp(s |h|)`` over ``B_r`` (grid points), via log-sum-exp."""
    sel = grid.disk(r)
    if not np.any(sel):
        raise ValueError("no grid points inside B_r")
    a = s * np.abs(np.asarray(hfield)[sel])
    val = float(logsumexp(a) - np.log(a.size))
    return val if log else float(np.exp(val))


def moment_fit(grid: UniformComplexGrid, hfield, r_values, s_values) -> dict:
    """Envelope fits for the exponential moments.

    Returns the log-moments on the ``r`` scan at ``s = 1`` with a fitted
    upper line ``a (-log r) + b``, and on the ``s`` scan at the largest r
    with a fitted upper quadratic ``c0 + c1 s + c2 s^2``.
    """
    r_values, s_values = np.asarray(r_values, float), np.asarray(s_values, float)
    lr = np.array([exp_moment(grid, hfield, 1.0, r, log=True) for r in r_values])
    a, b = np.polyfit(-np.log(r_values), lr, 1)
    b = b + max(0.0, float(np.max(lr - (a * -np.log(r_values) + b))))
    ls = np.array([exp_moment(grid, hfield, s, r_values.max(), log=True) for s in s_values])
    deg = min(2, len(s_values) - 1)
    c = np.polyfit(s_values, ls, deg)[::-1]
    c[0] += max(0.0, float(np.max(ls - np.polyval(c[::-1], s_values))))
    return {"r": r_values, "log_r_moment": lr, "r_fit": (float(a), float(b)),
            "s": s_values, "log_s_moment": ls, "s_fit": tuple(float(v) for v in c)}


# Binary grid serialization ---------------------------------------------------

MAGIC = b"LLAB"


def write_grid_field(path, grid: UniformComplexGrid, f) -> None:
    """Little-endian header ``LLAB`` + uint32 N + float64 h, then re/im
    planes as row-major float64."""
    f = np.asarray(f, dtype=complex)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(grid.N).astype("<u4").tobytes())
        fh.write(np.float64(grid.h).astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(f.real, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(f.imag, dtype="<f8").tobytes())


def read_grid_field(path):
    """Inverse of :func:`write_grid_field`; returns ``(N, h, field)``."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError("not an LLAB grid file")
        N = int(np.frombuffer(fh.read(4), "<u4")[0])
        h = float(np.frombuffer(fh.read(8), "<f8")[0])
        data = np.frombuffer(fh.read(), "<f8")
    if data.size != 2 * N * N:
        raise ValueError("truncated LLAB grid file")
    re, im = data[: N * N].reshape(N, N), data[N * N:].reshape(N, N)
    return N, h, re + 1j * im
