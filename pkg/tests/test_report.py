import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from llab import io, plotting, report
from llab.scenarios import Collector, parse_config


def _collector():
    out = Collector()
    out.check("ok", "beltrami.kqc", np.float64(0.5), 1.0)
    out.info("note", "plumbing", np.inf)
    out.table("t", ("a", "b"), [(1, 2.5), (2, 3.5)])
    out.fields["f"] = np.array([1 + 2j, 3 - 1j])
    out.plot("p", plotting.plot_spec("loglog", [plotting.series([1, 2, 4], [1, 0.5, 0.25], "decay")]))
    return out


def test_empty_report():
    rep = report.build_report({"type": "x"}, [])
    assert rep["schema"] == report.SCHEMA
    assert rep["hashable"]["summary"] == {"n_checks": 0, "n_passed": 0, "n_failed": 0, "n_info": 0}
    assert report.passed(rep)
    assert rep["sha256"] == report.digest(rep["hashable"])


def test_unknown_anchor_is_rejected():
    out = Collector()
    out.check("x", "no.such.anchor", 1, 2)
    with pytest.raises(ValueError, match="no.such.anchor"):
        report.build_report({}, out.checks)


def test_digest_ignores_key_order_and_timings():
    a = report.build_report({"a": 1, "b": 2}, [], seconds=1.0)
    b = report.build_report({"b": 2, "a": 1}, [], seconds=9.0)
    assert a["sha256"] == b["sha256"]
    assert a["timings"] != b["timings"]


def test_emit_outputs_and_rerender(tmp_path):
    (cfg,) = parse_config('type = "beltrami"\nseed = 1\nname = "demo"\n')
    rep = report.emit_outputs(cfg, _collector(), 0.1, tmp_path)
    d = tmp_path / "demo"
    assert sorted(rep["hashable"]["artifacts"]) == ["f.csv", "p.svg", "t.csv"]
    assert report.read_report(d / "report.json") == json.loads(json.dumps(rep))
    np.testing.assert_array_equal(io.read_complex_field(d / "f.csv"), [1 + 2j, 3 - 1j])
    ET.parse(d / "p.svg")
    first = (d / "p.svg").read_bytes()
    (d / "p.svg").unlink()
    assert report.rerender(tmp_path) == [d / "p.svg"]
    assert (d / "p.svg").read_bytes() == first
    summary = report.write_summary({"demo": rep}, tmp_path)
    assert summary["scenarios"]["demo"]["passed"]


def test_table_round_trip(tmp_path):
    p = io.write_table(tmp_path / "d.csv", "decay", [(1.0, 0.5, 2.0), {"R": 2, "min_sup": 0.1,
                                                                         "fit_exponent": 1.0}])
    header, data = io.read_table(p)
    assert header == ["R", "min_sup", "fit_exponent"]
    np.testing.assert_array_equal(data, [[1, 0.5, 2], [2, 0.1, 1]])
    with pytest.raises(ValueError):
        io.write_table(tmp_path / "e.csv", "decay", [(1, 2)])
    header, rows = io.read_table(io.write_table(tmp_path / "s.csv", ("k", "v"), [("a", True)]))
    assert rows == [["a", "true"]]


def test_to_jsonable():
    obj = {1: np.array([np.nan, np.inf, -np.inf]), "c": 1 + 2j, "b": np.bool_(True), "i": np.int64(3)}
    assert io.to_jsonable(obj) == {"1": ["nan", "inf", "-inf"], "c": {"re": 1.0, "im": 2.0},
                                   "b": True, "i": 3}
    assert io.canonical_json({"b": 1, "a": (1.5,)}) == '{"a":[1.5],"b":1}'


def test_plot_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        plotting.plot_spec("polar", [])
    spec = plotting.plot_spec("semilogy", [plotting.series([0, 1], [0, 1], style="dashed")], hline=0.5)
    plotting.render(spec, tmp_path / "a.svg")
    plotting.render(spec, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_timings_stay_out_of_the_digest():
    reports = []
    for seconds in (0.5, 7.0):
        out = Collector()
        out.timing("runtime", "plumbing", seconds, 60.0)
        reports.append(report.build_report({}, out.checks, timings=out.timings))
    a, b = reports
    assert a["sha256"] == b["sha256"]
    assert a["timings"]["runtime"] == 0.5 and b["timings"]["runtime"] == 7.0
    out = Collector()
    assert not out.timing("runtime", "plumbing", 61.0, 60.0)
