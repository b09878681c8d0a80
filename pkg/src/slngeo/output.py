"""CSV and JSON serialization of trajectories.

Floats are written with ``repr`` so that reading a file back gives the
in-memory values bit for bit.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .integrate import REPORT_FIELDS, Trajectory

__all__ = ["column_names", "trajectory_table", "write_csv", "write_json", "read_csv", "read_json"]

_COMPONENTS = {
    "phase": ("A", "Adot"),
    "reduced": ("beta", "omega", "zeta"),
    "jacobi": ("A", "Adot", "J", "Jdot"),
}


def _matrix_columns(name: str, n: int) -> list[str]:
    sep = "_" if n >= 10 else ""
    return [f"{name}_{i}{sep}{j}" for i in range(1, n + 1) for j in range(1, n + 1)]


def _report_keys(traj: Trajectory) -> list[str]:
    if traj.kind == "block":
        return ["energy"] + sorted((k for k in traj.reports if k.startswith("axis_")),
                                   key=lambda k: int(k.split("_")[1]))
    keys = list(REPORT_FIELDS)
    return keys + [k for k in traj.reports if k not in REPORT_FIELDS]


def column_names(traj: Trajectory) -> list[str]:
    """Header row: ``t``, the flattened state, then the report fields."""
    cols = ["t"]
    if traj.kind == "block":
        m = traj.meta["m"]
        for name in ("b0", "b1", "b2", "w0", "w1", "w2"):
            cols += [f"{name}_{i}" for i in range(1, m + 1)]
        if traj.meta["odd"]:
            cols += ["b_inf", "w_inf"]
    else:
        for name in _COMPONENTS[traj.kind]:
            cols += _matrix_columns(name, traj.n)
    return cols + _report_keys(traj)


def trajectory_table(traj: Trajectory) -> tuple[list[str], np.ndarray]:
    keys = _report_keys(traj)
    table = np.column_stack([traj.times, traj.states] + [traj.reports[k] for k in keys])
    return column_names(traj), table


def write_csv(traj: Trajectory, path) -> Path:
    path = Path(path)
    cols, table = trajectory_table(traj)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in table:
            w.writerow([repr(float(x)) for x in row])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)


def _jsonable(v):
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def write_json(traj: Trajectory, path) -> Path:
    """Column-oriented JSON with the same field names as the CSV."""
    path = Path(path)
    cols, table = trajectory_table(traj)
    doc = {
        "kind": traj.kind,
        "n": traj.n,
        "truncated": traj.truncated,
        "meta": {k: _jsonable(v) for k, v in traj.meta.items()},
        "columns": cols,
        "data": {c: table[:, j].tolist() for j, c in enumerate(cols)},
    }
    path.write_text(json.dumps(doc, indent=1, allow_nan=False) + "\n")
    return path


def read_json(path) -> dict:
    """Parse a trajectory JSON; ``data`` columns come back as float arrays."""
    doc = json.loads(Path(path).read_text())
    doc["data"] = {c: np.asarray(doc["data"][c], dtype=float) for c in doc["columns"]}
    return doc
