"""Geodesic flow on SL(n) with the Hilbert-Schmidt metric.

Submodules: ``linalg`` (matrix helpers), ``geometry`` (normal bundle and
curvature), ``integrate`` (geodesic and Jacobi integrators), ``families``
(lines and exponentials), ``blockdiag`` (block-diagonal reductions) and
``cli``. The integration loop runs in the compiled ``_core`` extension when
it is built, and in pure Python otherwise.
"""

from ._backend import available as available_backends, default_backend
from .blockdiag import BlockState, integrate_block, preset
from .families import (
    ExpKind, LinearGeodesicSpec, RotationalSpec, build_rotational, classify_exponential,
    classify_line, unbounded_certificate,
)
from .integrate import (
    IntegratorOptions, InvariantReport, JacobiState, PhaseState, ReducedState, Trajectory,
    integrate_geodesic, integrate_jacobi, invariant_report, to_reduced,
)
from .linalg import GroupPoint

__version__ = "0.1.0"

__all__ = [
    "available_backends", "default_backend",
    "GroupPoint",
    "PhaseState", "ReducedState", "JacobiState", "IntegratorOptions", "InvariantReport", "Trajectory",
    "integrate_geodesic", "integrate_jacobi", "invariant_report", "to_reduced",
    "LinearGeodesicSpec", "RotationalSpec", "ExpKind",
    "classify_line", "classify_exponential", "build_rotational", "unbounded_certificate",
    "BlockState", "integrate_block", "preset",
]
