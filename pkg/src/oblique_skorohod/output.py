"""Deterministic result serialization.

Floats are written with repr(), the shortest string that round-trips the
exact binary value, so identical inputs produce byte-identical files on any
platform.  JSON keys are sorted for the same reason.
"""

from __future__ import annotations

import json
import os
import platform

import numpy as np

from .paths import SampledPath
from .solver import SkorohodSolution


def fmt_float(x: float) -> str:
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"refusing to serialize non-finite value {x}")
    return repr(x)


def solution_csv_text(sol: SkorohodSolution) -> str:
    """Grid nodes as CSV: t, x_1..x_d, k_1..k_d.  LF line endings."""
    d = sol.x.dim
    header = ["t"] + [f"x_{i + 1}" for i in range(d)] + \
        [f"k_{i + 1}" for i in range(d)]
    lines = [",".join(header)]
    xv, kv = sol.x.values, sol.k.values
    dt = sol.x.dt
    for i in range(xv.shape[0]):
        row = [fmt_float(i * dt)]
        row += [fmt_float(v) for v in xv[i]]
        row += [fmt_float(v) for v in kv[i]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def path_csv_text(p: SampledPath, prefix: str = "v") -> str:
    header = ["t"] + [f"{prefix}_{i + 1}" for i in range(p.dim)]
    lines = [",".join(header)]
    for i in range(p.values.shape[0]):
        row = [fmt_float(p.t0 + i * p.dt)]
        row += [fmt_float(v) for v in p.values[i]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples for json.dumps."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if not np.isfinite(x):
            return None
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def summary_json_text(summary: dict) -> str:
    return json.dumps(to_jsonable(summary), sort_keys=True, indent=2) + "\n"


def versions() -> dict:
    from . import __version__

    return {"oblique_skorohod": __version__, "numpy": np.__version__,
            "python": platform.python_version()}


def solution_summary(sol: SkorohodSolution) -> dict:
    """The JSON-safe core of a solution: grid shape, eps, refinement
    history, total variation, and the solver diagnostics block."""
    return {
        "eps_final": sol.eps,
        "dt": sol.grid_dt,
        "horizon": sol.horizon,
        "dim": sol.x.dim,
        "tv_k": sol.tv_k,
        "system_id": sol.system_id,
        "refinement_history": [[e, g] for e, g in sol.refinement_history],
        "diagnostics": to_jsonable(sol.diagnostics),
        "x_final": sol.x.values[-1],
        "k_final": sol.k.values[-1],
    }


def write_text(path: str, text: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path
