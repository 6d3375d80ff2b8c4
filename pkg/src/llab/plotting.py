"""SVG figures rendered from plain plot specifications.

A spec is a dict with ``kind`` ("loglog", "semilogy", "semilogx" or
"linear"), optional ``title``/``xlabel``/``ylabel`` and a list of
``series`` entries ``{"x", "y", "label", "style"}`` where ``style`` is
"line", "marker" or "dashed".  Specs are stored in the report, so figures
can be re-rendered from a report directory alone.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("loglog", "semilogy", "semilogx", "linear")
_STYLES = {"line": dict(ls="-", marker=None), "marker": dict(ls="none", marker="o", ms=4),
           "dashed": dict(ls="--", marker=None), "linemarker": dict(ls="-", marker="o", ms=3)}


def series(x, y, label: str = "", style: str = "linemarker") -> dict:
    return {"x": [float(v) for v in np.ravel(x)], "y": [float(v) for v in np.ravel(y)],
            "label": label, "style": style}


def plot_spec(kind: str, series_list, title: str = "", xlabel: str = "", ylabel: str = "",
              hline: float | None = None) -> dict:
    if kind not in KINDS:
        raise ValueError(f"unknown plot kind {kind!r}")
    spec = {"kind": kind, "title": title, "xlabel": xlabel, "ylabel": ylabel,
            "series": list(series_list)}
    if hline is not None:
        spec["hline"] = float(hline)
    return spec


def render(spec: dict, path) -> Path:
    """Write one spec as an SVG file with reproducible bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": "llab", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        for s in spec["series"]:
            x = np.asarray(s["x"], float)
            y = np.asarray(s["y"], float)
            if spec["kind"] in ("loglog", "semilogy"):
                keep = y > 0
                x, y = x[keep], y[keep]
            ax.plot(x, y, label=s.get("label") or None, **_STYLES[s.get("style", "linemarker")])
        if spec["kind"] in ("loglog", "semilogx"):
            ax.set_xscale("log")
        if spec["kind"] in ("loglog", "semilogy"):
            ax.set_yscale("log")
        if "hline" in spec:
            ax.axhline(spec["hline"], color="0.5", lw=0.8)
        ax.set_title(spec.get("title", ""))
        ax.set_xlabel(spec.get("xlabel", ""))
        ax.set_ylabel(spec.get("ylabel", ""))
        if any(s.get("label") for s in spec["series"]):
            ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return path


def render_all(specs: dict, directory) -> list[str]:
    """Render ``{name: spec}`` into ``directory/<name>.svg``; returns file names."""
    out = []
    for name in sorted(specs):
        render(specs[name], Path(directory) / f"{name}.svg")
        out.append(f"{name}.svg")
    return out
