import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llab.presets import PresetError, build_coefficients, describe_presets, random_admissible
from llab.scenarios import Collector, ConfigError, parse_config


def test_every_preset_builds():
    for name, text in describe_presets():
        assert text
        c = build_coefficients(name)
        x = np.array([0.3, -0.4])
        assert np.all(np.isfinite(c.A(x[None, 0], x[None, 1])))


def test_preset_errors():
    with pytest.raises(PresetError, match="unknown"):
        build_coefficients("nope")
    with pytest.raises(PresetError, match="bessel"):
        build_coefficients("bessel", {"bogus": 1})


def test_exponent_strings():
    c = build_coefficients("radial_drift", {"q1": "inf"})
    assert np.isinf(c.q1)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_random_admissible_is_reproducible(seed):
    a, b = random_admissible(seed), random_admissible(seed)
    x, y = np.array([0.1, -0.5]), np.array([0.2, 0.7])
    np.testing.assert_array_equal(a.A(x, y), b.A(x, y))
    np.testing.assert_array_equal(a.V(x, y), b.V(x, y))


def test_minimal_config():
    (cfg,) = parse_config('type = "beltrami"\nseed = 3\n')
    assert cfg.type == "beltrami" and cfg.seed == 3 and cfg.name == "beltrami"
    assert cfg.tol("x", 0.5) == 0.5 and cfg.opt("y", 7) == 7


def test_seed_override():
    (cfg,) = parse_config('type = "beltrami"\nseed = 3\n', seed_override=9)
    assert cfg.seed == 9
    (cfg,) = parse_config('type = "beltrami"\n', seed_override=1)
    assert cfg.seed == 1


def test_scenario_array():
    text = """
seed = 5
[[scenario]]
type = "beltrami"
name = "a"
[[scenario]]
type = "landis"
name = "b"
seed = 6
[scenario.coefficients]
preset = "radial_drift"
params = {c = 1.0, q1 = 2}
"""
    a, b = parse_config(text)
    assert (a.name, a.seed) == ("a", 5)
    assert (b.name, b.seed) == ("b", 6)
    assert b.coefficients["params"]["q1"] == 2


@pytest.mark.parametrize("text, path", [
    ('type = "nope"\nseed = 1', "scenario.type"),
    ('type = "beltrami"', "scenario.seed"),
    ('type = "beltrami"\nseed = -1', "scenario.seed"),
    ('type = "beltrami"\nseed = 1\ncolour = 2', "scenario.colour"),
    ('type = "beltrami"\nseed = 1\nmesh = 3', "scenario.mesh"),
    ('type = "multiplier"\nseed = 1\n[mesh]\nh = -0.1', "scenario.mesh.h"),
    ('type = "similarity"\nseed = 1\n[grid]\nN = 100', "scenario.grid.N"),
    ('type = "beltrami"\nseed = 1\n[tolerances]\nx = "a"', "scenario.tolerances.x"),
    ('type = "multiplier"\nseed = 1\n[coefficients]\npreset = "radial_drift"\n'
     'params = {q1 = 2}', "scenario.coefficients.params.q1"),
    ('type = "multiplier"\nseed = 1\n[coefficients]\npreset = "radial_drift"\n'
     'params = {q1 = "big"}', "scenario.coefficients.params.q1"),
    ('type = "greens"\nseed = 1\n[coefficients]\npreset = "laplace"\nparams = {p = 1}',
     "scenario.coefficients.params.p"),
    ('type = "greens"\nseed = 1\n[coefficients]\npreset = "missing"', "scenario.coefficients"),
    ('seed = 1\n[[scenario]]\ntype = "beltrami"\n[[scenario]]\ntype = "beltrami"', "scenario"),
    ('seed = 1\nextra = 2\n[[scenario]]\ntype = "beltrami"', "extra"),
    ('[[scenario]]\ntype = "beltrami"\nseed = 1\n[[scenario]]\ntype = "nope"\nseed = 1',
     "scenario[1].type"),
    ('type = "greens"\nseed = 1\noptions = { sobolev_exponent = 2 }',
     "scenario.options.sobolev_exponent"),
    ("type = ", "<file>"),
])
def test_config_errors_name_the_field(text, path):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.path == path


def test_collector_relations():
    out = Collector()
    assert out.check("a", "x", 1.0, 2.0, "<=")
    assert out.check("b", "x", 3, (1, 4), "in")
    assert not out.check("c", "x", float("nan"), 1.0, ">=")
    assert not out.check("d", "x", "text", 1.0)
    out.info("e", "x", 4)
    out.error("f", "x", RuntimeError("boom"))
    assert [c["passed"] for c in out.checks] == [True, True, False, False, None, False]
    assert out.checks[-1]["value"] == "RuntimeError: boom"
