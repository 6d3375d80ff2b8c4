"""Named closed-form coefficient recipes.

A recipe is a name plus a parameter map; :func:`build_coefficients` turns
it into a :class:`CoefficientSet`.  Random recipes take an integer seed.
"""
from __future__ import annotations

import numpy as np

from .fem import CoefficientSet, constant_matrix, constant_scalar, constant_vector


class PresetError(ValueError):
    """Unknown recipe or bad parameter."""


def _laplace(**_):
    return CoefficientSet(name="laplace")


def _constant(a11=1.0, a12=0.0, a21=0.0, a22=1.0, W1=(0.0, 0.0), W2=(0.0, 0.0), V=0.0,
              lam=None, Lam=None, q1=np.inf, q2=np.inf, p=np.inf, K=None):
    A = np.array([[a11, a12], [a21, a22]], dtype=float)
    sym = 0.5 * (A + A.T)
    lam = float(np.linalg.eigvalsh(sym)[0]) if lam is None else lam
    Lam = float(np.abs(A).max()) if Lam is None else Lam
    K = float(np.hypot(*W1)) if K is None else K
    return CoefficientSet(A=constant_matrix(A), W1=constant_vector(W1), W2=constant_vector(W2),
                          V=constant_scalar(V), lam=lam, Lam=Lam, q1=q1, q2=q2, p=p,
                          K=max(K, 1e-12), name="constant")


def _bessel(V=0.25):
    return CoefficientSet(V=constant_scalar(V), name="bessel")


def _radial_drift(c=1.0, q1=4.0):
    """``W1 = -c x/|x|`` (zero at the origin)."""
    def W1(x, y):
        r = np.hypot(x, y)
        s = np.where(r > 0, -c / np.where(r > 0, r, 1.0), 0.0)
        return np.stack([s * x, s * y], -1)
    return CoefficientSet(W1=W1, q1=q1, K=abs(c), name="radial_drift")


def _variable_matrix(amp=0.5, off=0.3):
    """Smooth symmetric ``A`` with non-constant entries."""
    def A(x, y):
        x = np.asarray(x, float)
        a11 = 2 + amp * np.sin(x)
        a12 = off * np.cos(y) + 0 * x
        return np.stack([np.stack([a11, a12], -1), np.stack([a12, 1 + 0 * x], -1)], -2)
    lam = (2 - amp + 1 - np.sqrt((1 - amp) ** 2 + 4 * off**2)) / 2
    return CoefficientSet(A=A, lam=float(lam), Lam=2 + amp, name="variable_matrix")


def _rotating_matrix(th0, th1, l1, l2, skew):
    def A(x, y):
        th = th0 + th1 * 0.3 * np.sin(x + y)
        c, s = np.cos(th), np.sin(th)
        R = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
        D = np.zeros(np.shape(x) + (2, 2))
        D[..., 0, 0] = l1
        D[..., 1, 1] = l2 + 0.1 * np.cos(y)
        S = np.zeros_like(D)
        S[..., 0, 1], S[..., 1, 0] = skew, -skew
        return R @ D @ np.swapaxes(R, -1, -2) + S
    return A


def random_admissible(seed: int = 0, K: float = 1.0) -> CoefficientSet:
    """Random coefficients meeting the smallness and sign conditions of the
    multiplier bounds (W1 arbitrary, W2 and V small, ``-div W2 + V >= 0``)."""
    rng = np.random.default_rng(seed)
    th0, th1 = rng.uniform(0, np.pi, 2)
    l1, l2 = rng.uniform(0.6, 1.6, 2)
    skew = rng.uniform(-0.3, 0.3)
    A = _rotating_matrix(th0, th1, l1, l2, skew)
    a = rng.normal(size=4)
    cc = rng.uniform(0, 0.5)

    def W1(x, y):
        return K * np.stack([a[0] * (-y) + a[1] * x + a[2] * y - cc * x,
                             a[0] * x - a[1] * y + a[2] * x - cc * y], -1)
    b = rng.normal(size=2) * 0.03
    c2 = rng.uniform(0, 0.03)

    def W2(x, y):
        return np.stack([b[0] * (-y) - c2 * x, b[0] * x - c2 * y], -1)
    v0 = rng.uniform(0, 0.04)

    def V(x, y):
        return v0 * (1 + 0.5 * np.cos(x * y))
    return CoefficientSet(A=A, W1=W1, W2=W2, V=V, lam=0.5, Lam=2.0, q1=np.inf, q2=4.0, p=2.0,
                          K=K, name=f"random_admissible[{seed}]")


def _random_admissible(seed=0, K=1.0):
    return random_admissible(int(seed), float(K))


def random_sign_condition(seed: int = 0) -> CoefficientSet:
    """Random drifts with ``-div W2 + V >= 0`` and a constant diagonal ``A``."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=3)
    cc = rng.uniform(0, 1)
    b = rng.normal(size=3)
    c2 = rng.uniform(0, 1)
    v0 = rng.uniform(0, 2)
    diag = rng.uniform(0.5, 2, 2)

    def W1(x, y):
        return np.stack([a[0] * (-y) + a[1] * x + a[2] * y - cc * x,
                         a[0] * x - a[1] * y + a[2] * x - cc * y], -1)

    def W2(x, y):
        return np.stack([b[0] + b[1] * (-y) - c2 * x, b[2] + b[1] * x - c2 * y], -1)

    def V(x, y):
        return v0 * (1 + 0.5 * np.sin(3 * x))
    return CoefficientSet(A=constant_matrix(np.diag(diag)), W1=W1, W2=W2, V=V, lam=0.5, Lam=2.0,
                          name=f"random_sign[{seed}]")


def _random_sign_condition(seed=0):
    return random_sign_condition(int(seed))


def _sharpness(case="divergence_drift", q=np.inf, delta=None):
    from .estimates import SharpnessCase, gallery_alpha
    if case == "full_three_term":
        alpha, delta, q = 1.0, 0.0, np.inf
    else:
        alpha, delta = gallery_alpha(float(q), delta)
    return SharpnessCase(case, alpha, float(q), delta).coefficients()


PRESETS = {
    "laplace": (_laplace, "A = I, no lower-order terms"),
    "constant": (_constant, "constant A, W1, W2, V (a11, a12, a21, a22, W1, W2, V)"),
    "bessel": (_bessel, "A = I with constant potential V"),
    "radial_drift": (_radial_drift, "W1 = -c x/|x| (parameter c)"),
    "variable_matrix": (_variable_matrix, "smooth symmetric non-constant A"),
    "random_admissible": (_random_admissible, "seeded coefficients meeting the multiplier conditions"),
    "random_sign_condition": (_random_sign_condition, "seeded drifts with -div W2 + V >= 0"),
    "sharpness": (_sharpness, "closed-form exterior examples (case, q, delta)"),
}

EXPONENT_KEYS = ("q1", "q2", "p")


def _exponent(v):
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return np.inf
    return float(v)


def build_coefficients(name: str, params: dict | None = None) -> CoefficientSet:
    """Coefficient set of a named recipe.

    Raises
    ------
    PresetError
        For an unknown recipe or a parameter the recipe does not accept.
    """
    if name not in PRESETS:
        raise PresetError(f"unknown coefficient preset {name!r}; choose from {sorted(PRESETS)}")
    params = dict(params or {})
    for k in EXPONENT_KEYS + ("q",):
        if k in params:
            params[k] = _exponent(params[k])
    try:
        return PRESETS[name][0](**params)
    except TypeError as exc:
        raise PresetError(f"preset {name!r}: {exc}") from None


def describe_presets() -> list[tuple[str, str]]:
    return [(k, v[1]) for k, v in sorted(PRESETS.items())]
