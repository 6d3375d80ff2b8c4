import json

import pytest

from llab import cli

SMALL = """
seed = 2
[[scenario]]
type = "three_circle"
name = "monomials"
options = { max_power = 2, n_null_fields = 0 }
[[scenario]]
type = "vanishing_order"
name = "orders"
options = { powers = [1, 2], K_values = [], M_values = [10, 100] }
"""


def test_list_presets(capsys):
    assert cli.main(["list-presets"]) == 0
    text = capsys.readouterr().out
    assert "bessel" in text and "suite" in text and "acceptance" in text


def test_run_and_report(tmp_path, capsys):
    cfg = tmp_path / "small.toml"
    cfg.write_text(SMALL)
    out = tmp_path / "out"
    assert cli.main(["run", str(cfg), "--out", str(out), "--jobs", "2"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["scenarios"]) == {"monomials", "orders"}
    assert all(s["passed"] for s in summary["scenarios"].values())
    assert cli.main(["report", str(out)]) == 0
    assert "PASS monomials" in capsys.readouterr().out


def test_seed_override_is_recorded(tmp_path):
    cfg = tmp_path / "small.toml"
    cfg.write_text(SMALL)
    cli.main(["run", str(cfg), "--out", str(tmp_path / "o"), "--seed", "11"])
    rep = json.loads((tmp_path / "o" / "orders" / "report.json").read_text())
    assert rep["hashable"]["config"]["seed"] == 11


def test_out_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", "three_circle_monomial"]) == 0
    assert (tmp_path / "env" / "summary.json").exists()


@pytest.mark.parametrize("text", ['type = "nope"\nseed = 1', "not toml ="])
def test_bad_config_exits_2(tmp_path, capsys, text):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(text)
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_missing_config_and_empty_report_dir(tmp_path):
    assert cli.main(["run", str(tmp_path / "missing.toml")]) == 2
    assert cli.main(["report", str(tmp_path)]) == 2


def test_failing_check_exits_1(tmp_path):
    cfg = tmp_path / "strict.toml"
    cfg.write_text('type = "three_circle"\nseed = 0\noptions = { max_power = 1, n_null_fields = 0 }\n'
                   '[tolerances]\nmonomial = -1.0\n')
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 1
