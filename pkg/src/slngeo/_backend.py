"""Pick the compiled integration loop when it is importable.

Set ``SLNGEO_BACKEND=python`` to force the pure-Python loop.
"""

from __future__ import annotations

import os

import numpy as np

from ._stepper import dopri5

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

KINDS = {"phase": 0, "reduced": 1, "jacobi": 2, "block": 3}


def available() -> list[str]:
    return ["compiled", "python"] if _core is not None else ["python"]


def default_backend() -> str:
    if _core is None or os.environ.get("SLNGEO_BACKEND", "").lower() == "python":
        return "python"
    return "compiled"


def resolve(backend: str) -> str:
    if backend == "auto":
        return default_backend()
    if backend == "compiled" and _core is None:
        raise RuntimeError("compiled backend requested but slngeo._core is not built")
    if backend not in ("compiled", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend


def run(kind, y0, t0, t_end, opts, *, n, py_rhs, py_project, m=0, odd=False, z=None):
    """Integrate one of the built-in systems; returns (times, states, status)."""
    backend = resolve(opts.backend)
    y0 = np.ascontiguousarray(y0, dtype=float)
    if backend == "compiled":
        zz = np.ascontiguousarray(z if z is not None else np.zeros(max(m, 1)), dtype=float)
        return _core.integrate(
            KINDS[kind], y0, float(t0), float(t_end), opts.rtol, opts.atol,
            opts.dt_out, int(n), int(m), int(bool(odd)), zz, int(opts.max_steps),
        )
    return dopri5(
        lambda t, y: py_rhs(y), y0, t0, t_end,
        rtol=opts.rtol, atol=opts.atol, dt_out=opts.dt_out,
        project=py_project, max_steps=opts.max_steps,
    )
