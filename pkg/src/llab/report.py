"""Scenario reports: JSON with a hashable section, CSV tables and SVG figures.

Layout of an output directory::

    summary.json
    <scenario name>/report.json
    <scenario name>/<table>.csv, <field>.csv, <plot>.svg, <grid field>.llab

Everything except ``timings`` is deterministic for a fixed config and seed;
``sha256`` is the digest of the canonical JSON of the ``hashable`` section.
"""
from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path

from . import plotting
from .io import canonical_json, to_jsonable, write_complex_field, write_json, write_scalar_field, write_table

SCHEMA = "llab-report-1"


def load_anchors() -> dict:
    text = resources.files("llab").joinpath("data/anchors.json").read_text(encoding="utf-8")
    return json.loads(text)


def unresolved_anchors(checks, anchors: dict | None = None) -> list[str]:
    anchors = load_anchors() if anchors is None else anchors
    return sorted({c["anchor"] for c in checks if c["anchor"] != "plumbing" and c["anchor"] not in anchors})


def summarize(checks) -> dict:
    return {"n_checks": len(checks),
            "n_passed": sum(1 for c in checks if c["passed"] is True),
            "n_failed": sum(1 for c in checks if c["passed"] is False),
            "n_info": sum(1 for c in checks if c["passed"] is None)}


def digest(hashable: dict) -> str:
    return hashlib.sha256(canonical_json(hashable).encode("utf-8")).hexdigest()


def build_report(config_echo: dict, checks, constants=None, artifacts=(), plots=None,
                 seconds: float = 0.0, timings: dict | None = None) -> dict:
    """Assemble a JSON-ready report.

    Raises
    ------
    ValueError
        If a check names an anchor missing from the bundled manifest.
    """
    checks = list(checks)
    missing = unresolved_anchors(checks)
    if missing:
        raise ValueError(f"unknown anchors {missing}")
    hashable = to_jsonable({"config": config_echo, "checks": checks, "constants": dict(constants or {}),
                            "artifacts": sorted(artifacts), "summary": summarize(checks)})
    return {"schema": SCHEMA, "hashable": hashable, "sha256": digest(hashable),
            "plots": to_jsonable(plots or {}),
            "timings": {"seconds": round(float(seconds), 6),
                        **{k: round(float(v), 6) for k, v in sorted((timings or {}).items())}}}


def passed(report: dict) -> bool:
    return report["hashable"]["summary"]["n_failed"] == 0


def emit_outputs(cfg, out, seconds: float, directory) -> dict:
    """Write tables, fields, figures and ``report.json`` for one scenario."""
    from .transforms import write_grid_field
    d = Path(directory) / cfg.name
    d.mkdir(parents=True, exist_ok=True)
    artifacts = []
    for name, (kind, rows) in sorted(out.tables.items()):
        write_table(d / f"{name}.csv", kind, rows)
        artifacts.append(f"{name}.csv")
    for name, values in sorted(out.fields.items()):
        if hasattr(values, "dtype") and values.dtype.kind == "c":
            write_complex_field(d / f"{name}.csv", values)
        else:
            write_scalar_field(d / f"{name}.csv", values)
        artifacts.append(f"{name}.csv")
    for name, (grid, values) in sorted(out.binary.items()):
        write_grid_field(d / f"{name}.llab", grid, values)
        artifacts.append(f"{name}.llab")
    artifacts += plotting.render_all(out.plots, d)
    report = build_report(cfg.echo(), out.checks, out.constants, artifacts, out.plots, seconds,
                          out.timings)
    write_json(d / "report.json", report)
    return report


def write_summary(reports: dict, directory) -> dict:
    """``summary.json`` with per-scenario digests and verdicts."""
    summary = {"schema": SCHEMA,
               "scenarios": {name: {"sha256": r["sha256"], "passed": passed(r),
                                    "summary": r["hashable"]["summary"]}
                             for name, r in sorted(reports.items())}}
    summary["sha256"] = hashlib.sha256(
        "".join(summary["scenarios"][n]["sha256"] for n in sorted(reports)).encode()).hexdigest()
    write_json(Path(directory) / "summary.json", summary)
    return summary


def read_report(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def rerender(directory) -> list[Path]:
    """Re-render the figures of every report under ``directory``."""
    done = []
    for rp in sorted(Path(directory).glob("*/report.json")):
        rep = read_report(rp)
        for name in plotting.render_all(rep.get("plots", {}), rp.parent):
            done.append(rp.parent / name)
    return done
