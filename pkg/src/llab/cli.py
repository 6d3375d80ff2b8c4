"""Command-line entry point: ``llab run | list-presets | report``.

Exit codes: 0 when every check passes, 1 when any check fails, 2 for
configuration or output errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

from .presets import describe_presets
from .report import emit_outputs, passed, read_report, rerender, write_summary
from .scenarios import ConfigError, load_config, parse_config, run_scenario

OUT_ENV = "LLAB_OUT"
DEFAULT_OUT = "llab-out"


def bundled_configs() -> list[str]:
    root = resources.files("llab").joinpath("configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def _resolve_configs(spec: str, seed):
    path = Path(spec)
    if path.exists():
        return load_config(path, seed)
    if spec in bundled_configs():
        text = resources.files("llab").joinpath(f"configs/{spec}.toml").read_text(encoding="utf-8")
        return parse_config(text, seed)
    raise ConfigError(spec, "no such file or bundled config")


def run_configs(configs, out_dir, jobs: int = 1, log=print) -> dict:
    """Run scenarios with a bounded pool; outputs are written serially."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(run_scenario, configs))
    else:
        results = [run_scenario(c) for c in configs]
    reports = {}
    for cfg, (collected, seconds) in zip(configs, results):
        rep = emit_outputs(cfg, collected, seconds, out_dir)
        reports[cfg.name] = rep
        s = rep["hashable"]["summary"]
        log(f"{'PASS' if passed(rep) else 'FAIL'} {cfg.name}: {s['n_passed']} passed, "
            f"{s['n_failed']} failed, {s['n_info']} info ({seconds:.1f} s)")
        for c in rep["hashable"]["checks"]:
            if c["passed"] is False:
                log(f"    failed {c['name']}: value {c['value']} {c['relation']} {c['bound']}")
    write_summary(reports, out_dir)
    return reports


def _cmd_run(args) -> int:
    try:
        configs = _resolve_configs(args.config, args.seed)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out = args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT
    try:
        reports = run_configs(configs, out, max(1, args.jobs))
    except OSError as exc:
        print(f"cannot write outputs to {out}: {exc}", file=sys.stderr)
        return 2
    return 0 if all(passed(r) for r in reports.values()) else 1


def _cmd_list(args) -> int:
    print("coefficient presets:")
    for name, desc in describe_presets():
        print(f"  {name:24s} {desc}")
    print("bundled configs:")
    for name in bundled_configs():
        print(f"  {name}")
    return 0


def _cmd_report(args) -> int:
    d = Path(args.dir)
    reports = sorted(d.glob("*/report.json"))
    if not reports:
        print(f"no reports under {d}", file=sys.stderr)
        return 2
    rendered = rerender(d)
    ok = True
    for rp in reports:
        rep = read_report(rp)
        s = rep["hashable"]["summary"]
        ok = ok and passed(rep)
        print(f"{'PASS' if passed(rep) else 'FAIL'} {rp.parent.name}: {s['n_passed']}/{s['n_checks']} "
              f"sha256 {rep['sha256'][:16]}")
    print(f"re-rendered {len(rendered)} figures")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="llab", description="Verification scenarios for planar elliptic equations.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file or bundled config")
    r.add_argument("config")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or {DEFAULT_OUT})")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--seed", type=int, help="override every scenario seed")
    r.set_defaults(func=_cmd_run)
    sub.add_parser("list-presets", help="list coefficient presets and bundled configs").set_defaults(func=_cmd_list)
    rp = sub.add_parser("report", help="re-render figures and summarize a report directory")
    rp.add_argument("dir")
    rp.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
