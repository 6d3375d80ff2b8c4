"""CSV and JSON writers for fields and tables."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

HEADERS = {
    "scalar_field": ("node_index", "value"),
    "complex_field": ("node", "re", "im"),
    "quasi_circle": ("s", "x", "y"),
    "sigma_rho": ("s", "sigma", "rho"),
    "gradient_norms": ("K", "t", "norm"),
    "decay": ("R", "min_sup", "fit_exponent"),
    "three_circle": ("s1", "s2", "s3", "theta", "slack"),
    "green_constants": ("pole_x", "pole_y", "estimate_id", "s_or_tau", "fitted_C", "fitted_eps"),
    "vanishing_order": ("K", "n", "c", "order"),
}


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_table(path, kind_or_header, rows) -> Path:
    """Write rows under a known header (by kind name) or an explicit header."""
    header = HEADERS[kind_or_header] if isinstance(kind_or_header, str) else tuple(kind_or_header)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row[k] for k in header]
            if len(row) != len(header):
                raise ValueError(f"row of length {len(row)} does not match header {header}")
            w.writerow([_fmt(v) for v in row])
    return path


def read_table(path) -> tuple[list[str], np.ndarray | list]:
    """Header and rows; rows are a float array when every cell parses."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = list(r)
    try:
        return header, np.array([[float(v) for v in row] for row in rows], dtype=float).reshape(-1, len(header))
    except ValueError:
        return header, rows


def write_scalar_field(path, values) -> Path:
    return write_table(path, "scalar_field", enumerate(np.asarray(values, float)))


def write_complex_field(path, values) -> Path:
    v = np.asarray(values, complex)
    return write_table(path, "complex_field", ((i, z.real, z.imag) for i, z in enumerate(v)))


def read_complex_field(path) -> np.ndarray:
    _, data = read_table(path)
    return data[:, 1] + 1j * data[:, 2]


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    return obj


def canonical_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n",
                    encoding="utf-8")
    return path
