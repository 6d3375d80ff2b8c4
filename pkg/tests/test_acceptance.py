"""Acceptance criteria at full resolution.

Each test prints one ``PASS``/``FAIL`` line, collected in the terminal
summary.  The scenarios come from the bundled ``acceptance`` config and
each runs at most once per session.
"""
import pytest

from llab import report
from llab.cli import _resolve_configs, run_configs
from llab.io import canonical_json
from llab.scenarios import run_scenario

pytestmark = pytest.mark.acceptance

RESULTS: list[str] = []
_CONFIGS = {c.name: c for c in _resolve_configs("acceptance", None)}
_CACHE: dict = {}


def scenario(name):
    """Checks of one acceptance scenario, keyed by check name."""
    if name not in _CACHE:
        collected, seconds = run_scenario(_CONFIGS[name])
        checks = {c["name"]: dict(c) for c in collected.checks}
        for key, value in collected.timings.items():
            checks[key]["value"] = value
        _CACHE[name] = (checks, seconds)
    return _CACHE[name][0]


def verdict(number: int, title: str, checks: list[dict], extra: str = ""):
    ok = bool(checks) and all(c["passed"] is True for c in checks)
    detail = "; ".join(f"{c['name']}={_short(c['value'])}" for c in checks)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}{extra}"
    RESULTS.append(line)
    print(line)
    failed = [c for c in checks if c["passed"] is not True]
    assert ok, f"failing checks: {failed}"


def _short(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def pick(checks: dict, *names):
    missing = [n for n in names if n not in checks]
    assert not missing, f"scenario did not report {missing}"
    return [checks[n] for n in names]


def test_criterion_01_multiplier_bounds_on_random_sets():
    cfg = _CONFIGS["multiplier-random"]
    assert cfg.opt("random_sets") == 10 and cfg.mesh["h"] == 0.02
    c = scenario("multiplier-random")
    verdict(1, "multiplier bounds, 10 random sets at h=0.02",
            pick(c, "random_phi_min", "random_phi_max", "random_all_admissible", "random_max_seconds"))


def test_criterion_02_bessel_oracle():
    c = scenario("multiplier-random")
    verdict(2, "Bessel multiplier at r in {0, d/2}", pick(c, "bessel_oracle"))


def test_criterion_03_beltrami_bound_and_diagonal():
    assert _CONFIGS["beltrami"].opt("n_samples") == 100
    c = scenario("beltrami")
    verdict(3, "quasiconformality bound on 100 samples, nu(diag(2,2))",
            pick(c, "kqc_bound_holds", "kqc_max", "diag2_nu"))


def test_criterion_04_isometry_and_transform_constants():
    cfg = _CONFIGS["similarity"]
    assert cfg.grid["N"] == 512 and cfg.opt("n_fields") == 20
    c = scenario("similarity")
    verdict(4, "isometry on 512^2 with 20 fields, stable derivative constants",
            pick(c, "isometry", "dbar_T_stable", "d_T_stable"))


def test_criterion_05_neumann_iteration_and_factorization():
    c = scenario("similarity")
    verdict(5, "Neumann iterations to 1e-10, factorization",
            pick(c, "neumann_iterations", "neumann_residual", "factorization"))


def test_criterion_06_three_circle():
    assert _CONFIGS["three-circle"].opt("n_null_fields") == 50
    c = scenario("three-circle")
    verdict(6, "three-circle inequality for z^k and 50 null fields",
            pick(c, "monomial_slack", "null_field_margin"))


def test_criterion_07_vanishing_order():
    c = scenario("vanishing-order")
    verdict(7, "vanishing order of Re z^n and K-scan slope",
            pick(c, "order_re_z1", "order_re_z2", "order_re_z3", "k_scan_slope"))


def test_criterion_08_sharpness_gallery_and_decay():
    assert _CONFIGS["sharpness"].opt("n_samples") == 200
    s = scenario("sharpness")
    gallery = [v for k, v in s.items() if k.startswith(("residual_", "symbolic_", "norm_identity_"))]
    assert any(k.startswith("norm_identity_") for k in s)
    checks = gallery + pick(s, "runtime") + pick(scenario("landis"), "decay_exponent_inf")
    verdict(8, "gallery residuals on 200 samples, norm identity, decay exponent, runtime", checks)


def test_criterion_09_rescaling_identity():
    c = scenario("landis")
    verdict(9, "rescaling identity for q in {2, 4, inf}", pick(c, "rescaling_identity"))


def test_criterion_10_greens_function():
    assert _CONFIGS["greens"].opt("max_principle_seeds") == 50
    c = scenario("greens")
    verdict(10, "Green's function closed form, symmetry, representation, maximum principle",
            pick(c, "laplace_closed_form", "symmetry", "representation_laplace", "representation_drift",
                 "max_principle_slack", "max_principle_all_checked"))


def test_criterion_11_reproducible_reports(tmp_path):
    runs = []
    for k in range(2):
        configs = _resolve_configs("suite", 7)
        runs.append(run_configs(configs, tmp_path / f"run{k}", log=lambda *_: None))
    a, b = runs
    assert set(a) == set(b)
    checks = []
    for name in sorted(a):
        same = (a[name]["sha256"] == b[name]["sha256"]
                and canonical_json(a[name]["hashable"]) == canonical_json(b[name]["hashable"])
                and report.digest(report.read_report(tmp_path / "run1" / name / "report.json")["hashable"])
                == a[name]["sha256"])
        checks.append({"name": name, "value": a[name]["sha256"][:12], "passed": same})
    verdict(11, "identical hashable sections across two seeded suite runs", checks)
