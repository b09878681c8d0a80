"""Numerical integration of the geodesic flow on SL(n) and of Jacobi fields.

Two formulations are supported. The phase formulation integrates (A, A') in
ambient matrix space; the reduced formulation integrates (beta, omega, zeta)
with beta = A^-1 A^-T, omega = A^T A' + A'^T A and zeta = A^T A' - A'^T A.
Both use an adaptive Dormand-Prince 5(4) pair, project back onto the
constraint set after every accepted step and emit samples on a fixed grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _backend
from ._stepper import STATUS_MESSAGES
from .linalg import GroupPoint, as_square, hs_norm

__all__ = [
    "PhaseState",
    "ReducedState",
    "JacobiState",
    "IntegratorOptions",
    "InvariantReport",
    "Trajectory",
    "TruncationWarning",
    "REPORT_FIELDS",
    "geodesic_rhs",
    "reduced_rhs",
    "to_reduced",
    "jacobi_rhs",
    "integrate_geodesic",
    "integrate_jacobi",
    "invariant_report",
]

REPORT_FIELDS = (
    "energy", "det_drift", "zeta_drift", "angmom_drift", "sff", "virial_residual", "trace_omega",
)


class TruncationWarning(RuntimeWarning):
    """The integrator stopped before reaching t_end."""


# ---------------------------------------------------------------------------
# state types


def _check_tangent(Ainv: np.ndarray, X: np.ndarray, tol: float, what: str) -> None:
    lhs = abs(float(np.sum(Ainv.T * X)))
    if lhs > tol * max(1.0, hs_norm(Ainv) * hs_norm(X)):
        raise ValueError(f"{what} is not tangent: |tr(A^-1 X)| = {lhs:.3e}")


@dataclass(frozen=True)
class PhaseState:
    """A point (A, A') of the tangent bundle of SL(n)."""

    A: GroupPoint
    Adot: np.ndarray
    tolerance: float = 1e-9

    def __post_init__(self):
        if not isinstance(self.A, GroupPoint):
            object.__setattr__(self, "A", GroupPoint(self.A, det_tolerance=self.tolerance))
        V = as_square(self.Adot, "Adot").copy()
        if V.shape != self.A.mat.shape:
            raise ValueError(f"dimension mismatch: {V.shape} vs {self.A.mat.shape}")
        V.setflags(write=False)
        object.__setattr__(self, "Adot", V)
        _check_tangent(self.A.inv, V, self.tolerance, "Adot")

    @property
    def n(self) -> int:
        return self.A.n

    def vector(self) -> np.ndarray:
        return np.concatenate([self.A.mat.ravel(), self.Adot.ravel()])

    @classmethod
    def from_vector(cls, y, n: int, tolerance: float = 1e-9) -> "PhaseState":
        y = np.asarray(y, dtype=float)
        return cls(y[: n * n].reshape(n, n), y[n * n: 2 * n * n].reshape(n, n), tolerance)


@dataclass(frozen=True)
class ReducedState:
    """The triple (beta, omega, zeta) of the first-order formulation."""

    beta: np.ndarray
    omega: np.ndarray
    zeta: np.ndarray
    tolerance: float = 1e-9

    def __post_init__(self):
        b = as_square(self.beta, "beta").copy()
        w = as_square(self.omega, "omega").copy()
        z = as_square(self.zeta, "zeta").copy()
        if not (b.shape == w.shape == z.shape):
            raise ValueError("beta, omega, zeta must have the same shape")
        for M in (b, w, z):
            M.setflags(write=False)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "zeta", z)
        tol = self.tolerance
        if np.max(np.abs(b - b.T)) > 1e-12 * max(1.0, np.max(np.abs(b))):
            raise ValueError("beta is not symmetric")
        if np.max(np.abs(w - w.T)) > 1e-12 * max(1.0, np.max(np.abs(w))):
            raise ValueError("omega is not symmetric")
        if np.max(np.abs(z + z.T)) > 1e-12 * max(1.0, np.max(np.abs(z))):
            raise ValueError("zeta is not antisymmetric")
        try:
            np.linalg.cholesky(b)
        except np.linalg.LinAlgError:
            raise ValueError("beta is not positive definite") from None
        d = float(np.linalg.det(b))
        if abs(d - 1.0) > tol:
            raise ValueError(f"det(beta) = {d!r} is not 1")
        c = abs(float(np.sum(b * w)))
        if c > tol * max(1.0, hs_norm(b) * hs_norm(w)):
            raise ValueError(f"compatibility tr(beta omega) = 0 violated ({c:.3e})")

    @property
    def n(self) -> int:
        return self.beta.shape[0]

    def vector(self) -> np.ndarray:
        return np.concatenate([self.beta.ravel(), self.omega.ravel(), self.zeta.ravel()])

    @classmethod
    def from_vector(cls, y, n: int, tolerance: float = 1e-9) -> "ReducedState":
        y = np.asarray(y, dtype=float)
        k = n * n
        return cls(y[:k].reshape(n, n), y[k:2 * k].reshape(n, n), y[2 * k:3 * k].reshape(n, n),
                   tolerance)


@dataclass(frozen=True)
class JacobiState:
    """A Jacobi field (J, J') along the geodesic through ``along``."""

    along: PhaseState
    J: np.ndarray
    Jdot: np.ndarray
    tolerance: float = 1e-9

    def __post_init__(self):
        if not isinstance(self.along, PhaseState):
            raise TypeError("along must be a PhaseState")
        J = as_square(self.J, "J").copy()
        Jd = as_square(self.Jdot, "Jdot").copy()
        if J.shape != self.along.Adot.shape or Jd.shape != J.shape:
            raise ValueError("J, Jdot must match the dimension of the geodesic")
        J.setflags(write=False)
        Jd.setflags(write=False)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "Jdot", Jd)
        _check_tangent(self.along.A.inv, J, self.tolerance, "J")

    @property
    def n(self) -> int:
        return self.along.n

    def vector(self) -> np.ndarray:
        return np.concatenate([self.along.vector(), self.J.ravel(), self.Jdot.ravel()])

    @classmethod
    def from_vector(cls, y, n: int, tolerance: float = 1e-9) -> "JacobiState":
        y = np.asarray(y, dtype=float)
        k = n * n
        along = PhaseState.from_vector(y[:2 * k], n, tolerance)
        return cls(along, y[2 * k:3 * k].reshape(n, n), y[3 * k:4 * k].reshape(n, n), tolerance)


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    dt_out: float = 0.01
    max_steps: int = 10_000_000
    backend: str = "auto"  # "auto", "compiled" or "python"

    def __post_init__(self):
        for name in ("rtol", "atol", "dt_out"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.backend not in ("auto", "compiled", "python"):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass(frozen=True)
class InvariantReport:
    energy: float
    det_drift: float
    zeta_drift: float
    angmom_drift: float
    sff: float
    virial_residual: float
    trace_omega: float

    @property
    def total_energy(self) -> float:
        """Twice the kinetic energy; the normalization used for block flows."""
        return 2.0 * self.energy

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in REPORT_FIELDS}


# ---------------------------------------------------------------------------
# flat right-hand sides and projections (pure-Python path)


def _phase_split(y: np.ndarray, n: int):
    k = n * n
    return y[:k].reshape(n, n), y[k:2 * k].reshape(n, n)


def phase_rhs_flat(y: np.ndarray, n: int) -> np.ndarray:
    A, V = _phase_split(y, n)
    Ainv = np.linalg.inv(A)
    P = V @ Ainv
    q = np.sum(P * P.T)
    s = np.sum(Ainv * Ainv)
    return np.concatenate([V.ravel(), (q / s * Ainv.T).ravel()])


def _project_group(A: np.ndarray, n: int) -> np.ndarray:
    d = np.linalg.det(A)
    if not (math.isfinite(d) and d > 0.0):
        raise ArithmeticError("det(A) left the positive half-line")
    return A * d ** (-1.0 / n)


def _project_tangent(Ainv: np.ndarray, V: np.ndarray) -> np.ndarray:
    return V - np.sum(Ainv.T * V) / np.sum(Ainv * Ainv) * Ainv.T


def phase_project_flat(y: np.ndarray, n: int) -> np.ndarray:
    A, V = _phase_split(y, n)
    A = _project_group(A, n)
    V = _project_tangent(np.linalg.inv(A), V)
    return np.concatenate([A.ravel(), V.ravel()])


def reduced_rhs_flat(y: np.ndarray, n: int) -> np.ndarray:
    k = n * n
    b = y[:k].reshape(n, n)
    w = y[k:2 * k].reshape(n, n)
    z = y[2 * k:3 * k].reshape(n, n)
    wb = w @ b
    zb = z @ b
    T = np.sum(wb * wb.T) + np.sum(zb * zb.T)
    db = -(b @ wb)
    dw = 0.5 * ((w - z) @ b @ (w + z)) + (0.5 * T / np.trace(b)) * np.eye(n)
    return np.concatenate([db.ravel(), dw.ravel(), np.zeros(k)])


def reduced_project_flat(y: np.ndarray, n: int) -> np.ndarray:
    k = n * n
    b = y[:k].reshape(n, n)
    w = y[k:2 * k].reshape(n, n)
    z = y[2 * k:3 * k].reshape(n, n)
    b = 0.5 * (b + b.T)
    w = 0.5 * (w + w.T)
    z = 0.5 * (z - z.T)
    b = _project_group(b, n)
    w = w - np.sum(b * w) / np.trace(b) * np.eye(n)
    return np.concatenate([b.ravel(), w.ravel(), z.ravel()])


def jacobi_rhs_flat(y: np.ndarray, n: int) -> np.ndarray:
    k = n * n
    A = y[:k].reshape(n, n)
    V = y[k:2 * k].reshape(n, n)
    J = y[2 * k:3 * k].reshape(n, n)
    W = y[3 * k:4 * k].reshape(n, n)
    Ainv = np.linalg.inv(A)
    AiT = Ainv.T
    P = V @ Ainv
    R = J @ Ainv
    q = np.sum(P * P.T)
    s = np.sum(Ainv * Ainv)
    dq = 2.0 * np.sum((W @ Ainv) * P.T) - 2.0 * np.sum((P @ R) * P.T)
    coef = dq / s + 2.0 * q * np.sum((Ainv @ R) * Ainv) / s**2
    Jdd = coef * AiT - (q / s) * (AiT @ J.T @ AiT)
    return np.concatenate([V.ravel(), (q / s * AiT).ravel(), W.ravel(), Jdd.ravel()])


def jacobi_project_flat(y: np.ndarray, n: int) -> np.ndarray:
    k = n * n
    A = _project_group(y[:k].reshape(n, n), n)
    Ainv = np.linalg.inv(A)
    s = np.sum(Ainv * Ainv)
    V = _project_tangent(Ainv, y[k:2 * k].reshape(n, n))
    J = _project_tangent(Ainv, y[2 * k:3 * k].reshape(n, n))
    W = y[3 * k:4 * k].reshape(n, n)
    # d/dt tr(A^-1 J) = 0 forces tr(A^-1 J') = tr(A^-1 A' A^-1 J)
    target = np.sum((Ainv @ V @ Ainv).T * J)
    W = W - (np.sum(Ainv.T * W) - target) / s * Ainv.T
    return np.concatenate([A.ravel(), V.ravel(), J.ravel(), W.ravel()])


# ---------------------------------------------------------------------------
# public single-state operations


def geodesic_rhs(state: PhaseState) -> np.ndarray:
    """A'' = [tr(A' A^-1 A' A^-1) / tr(A^-1 A^-T)] A^-T."""
    n = state.n
    return phase_rhs_flat(state.vector(), n)[n * n:].reshape(n, n)


def reduced_rhs(state: ReducedState) -> tuple[np.ndarray, np.ndarray]:
    """(beta', omega'); zeta is conserved."""
    n = state.n
    d = reduced_rhs_flat(state.vector(), n)
    return d[:n * n].reshape(n, n), d[n * n:2 * n * n].reshape(n, n)


def to_reduced(state: PhaseState) -> ReducedState:
    A, V = state.A.mat, state.Adot
    Ainv = state.A.inv
    X = A.T @ V
    beta = Ainv @ Ainv.T
    beta = 0.5 * (beta + beta.T)
    return ReducedState(beta, X + X.T, X - X.T)


def jacobi_rhs(state: JacobiState) -> np.ndarray:
    """J'' from the linearized geodesic equation."""
    n = state.n
    return jacobi_rhs_flat(state.vector(), n)[3 * n * n:].reshape(n, n)


# ---------------------------------------------------------------------------
# invariant reports


def _fd_first_derivative(t: np.ndarray, f: np.ndarray, width: int = 5) -> np.ndarray:
    """Derivative of sampled f by local polynomial (central when possible) stencils."""
    N = t.size
    w = min(width, N)
    start = np.clip(np.arange(N) - w // 2, 0, N - w)
    idx = start[:, None] + np.arange(w)[None, :]
    h = np.median(np.abs(np.diff(t)))
    x = (t[idx] - t[:, None]) / h
    V = x[:, :, None] ** np.arange(w)[None, None, :]  # V[i, j, k] = x_j^k
    rhs = np.zeros((N, w))
    rhs[:, 1] = 1.0
    weights = np.linalg.solve(np.transpose(V, (0, 2, 1)), rhs[:, :, None])[:, :, 0]
    return np.sum(weights * f[idx], axis=1) / h


def _phase_reports(times, Y, n, ref_vec):
    k = n * n
    A = Y[:, :k].reshape(-1, n, n)
    V = Y[:, k:2 * k].reshape(-1, n, n)
    A0, V0 = ref_vec[:k].reshape(n, n), ref_vec[k:2 * k].reshape(n, n)
    Ainv = np.linalg.inv(A)
    AT = np.transpose(A, (0, 2, 1))
    VT = np.transpose(V, (0, 2, 1))
    X = AT @ V
    zeta = X - np.transpose(X, (0, 2, 1))
    L = V @ AT - A @ VT
    zeta0 = A0.T @ V0 - V0.T @ A0
    L0 = V0 @ A0.T - A0 @ V0.T
    energy = np.sum(V * V, axis=(1, 2))
    P = V @ Ainv
    rinv = np.sqrt(np.sum(Ainv * Ainv, axis=(1, 2)))
    sff = np.sum(P * np.transpose(P, (0, 2, 1)), axis=(1, 2)) / rinv
    trw = 2.0 * np.trace(X, axis1=1, axis2=2)
    rhs = 2.0 * energy + 2.0 * n * sff / rinv
    return {
        "energy": energy,
        "det_drift": np.abs(np.linalg.det(A) - 1.0),
        "zeta_drift": np.sqrt(np.sum((zeta - zeta0) ** 2, axis=(1, 2))),
        "angmom_drift": np.sqrt(np.sum((L - L0) ** 2, axis=(1, 2))),
        "sff": sff,
        "trace_omega": trw,
        "_virial_rhs": rhs,
        "_analytic_d_trace_omega": None,
    }


def _reduced_angmom_norm(b, w, z):
    binv = np.linalg.inv(b)
    D = 0.5 * (b @ (w + z) - (w - z) @ b)
    DT = np.transpose(D, (0, 2, 1))
    val = np.trace(D @ binv @ DT @ binv, axis1=-2, axis2=-1)
    return np.sqrt(np.maximum(val, 0.0))


def _reduced_reports(times, Y, n, ref_vec):
    k = n * n
    b = Y[:, :k].reshape(-1, n, n)
    w = Y[:, k:2 * k].reshape(-1, n, n)
    z = Y[:, 2 * k:3 * k].reshape(-1, n, n)
    b0 = ref_vec[:k].reshape(1, n, n)
    w0 = ref_vec[k:2 * k].reshape(1, n, n)
    z0 = ref_vec[2 * k:3 * k].reshape(1, n, n)
    U = w + z
    UT = np.transpose(U, (0, 2, 1))
    energy = 0.25 * np.trace(UT @ b @ U, axis1=1, axis2=2)
    trb = np.trace(b, axis1=1, axis2=2)
    Ub = U @ b
    sff = np.sum(Ub * np.transpose(Ub, (0, 2, 1)), axis=(1, 2)) / (4.0 * np.sqrt(trb))
    trw = np.trace(w, axis1=1, axis2=2)
    rhs = 2.0 * energy + 2.0 * n * sff / np.sqrt(trb)
    return {
        "energy": energy,
        "det_drift": np.abs(np.linalg.det(b) - 1.0),
        "zeta_drift": np.sqrt(np.sum((z - z0) ** 2, axis=(1, 2))),
        "angmom_drift": np.abs(_reduced_angmom_norm(b, w, z) - _reduced_angmom_norm(b0, w0, z0)[0]),
        "sff": sff,
        "trace_omega": trw,
        "_virial_rhs": rhs,
    }


def _analytic_d_trace_omega(kind: str, Y: np.ndarray, n: int) -> np.ndarray:
    k = n * n
    out = np.empty(Y.shape[0])
    for i, y in enumerate(Y):
        if kind == "reduced":
            r = y[:3 * k]
        else:
            A = y[:k].reshape(n, n)
            V = y[k:2 * k].reshape(n, n)
            Ainv = np.linalg.inv(A)
            X = A.T @ V
            r = np.concatenate([(Ainv @ Ainv.T).ravel(), (X + X.T).ravel(), (X - X.T).ravel()])
        out[i] = np.trace(reduced_rhs_flat(r, n)[k:2 * k].reshape(n, n))
    return out


def _reports(kind: str, times: np.ndarray, Y: np.ndarray, n: int, ref_vec: np.ndarray) -> dict:
    base = "reduced" if kind == "reduced" else "phase"
    rep = (_reduced_reports if base == "reduced" else _phase_reports)(times, Y, n, ref_vec)
    virial_rhs = rep.pop("_virial_rhs")
    rep.pop("_analytic_d_trace_omega", None)
    # d/dt |A|^2 = tr(omega) exactly, so the second derivative of |A|^2 is
    # the (fourth-order, central where possible) difference of tr(omega).
    if times.size >= 3:
        lhs = _fd_first_derivative(times, rep["trace_omega"])
    else:
        lhs = _analytic_d_trace_omega(base, Y, n)
    rep["virial_residual"] = np.abs(lhs - virial_rhs)
    if kind == "jacobi":
        k = n * n
        A = Y[:, :k].reshape(-1, n, n)
        J = Y[:, 2 * k:3 * k].reshape(-1, n, n)
        W = Y[:, 3 * k:4 * k].reshape(-1, n, n)
        N = np.transpose(np.linalg.inv(A), (0, 2, 1))
        N = N / np.sqrt(np.sum(N * N, axis=(1, 2)))[:, None, None]
        Wcov = W - np.sum(W * N, axis=(1, 2))[:, None, None] * N
        rep["J_norm"] = np.sqrt(np.sum(J * J, axis=(1, 2)))
        rep["Jdot_norm"] = np.sqrt(np.sum(Wcov * Wcov, axis=(1, 2)))
    return rep


def invariant_report(state, reference=None) -> InvariantReport:
    """Invariant report of a single state relative to ``reference``.

    The virial residual of a lone state uses the exact derivative of tr(omega)
    from the reduced equations instead of finite differences.
    """
    reference = state if reference is None else reference
    if type(reference) is not type(state):
        raise TypeError("state and reference must be of the same kind")
    if isinstance(state, JacobiState):
        state, reference = state.along, reference.along
    kind = "reduced" if isinstance(state, ReducedState) else "phase"
    Y = state.vector()[None, :]
    rep = _reports(kind, np.zeros(1), Y, state.n, reference.vector())
    return InvariantReport(**{k: float(rep[k][0]) for k in REPORT_FIELDS})


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class Trajectory:
    """Samples of an integrated state with per-sample invariant reports.

    ``states`` holds one flattened state per row; ``reports`` maps each
    report field to an array aligned with ``times``.
    """

    kind: str  # "phase", "reduced", "jacobi" or "block"
    n: int
    times: np.ndarray
    states: np.ndarray
    reports: dict
    truncated: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.times, self.states, *self.reports.values()):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return self.times.size

    def state(self, i: int):
        y = self.states[i]
        if self.kind == "phase":
            return PhaseState.from_vector(y, self.n, tolerance=1e-8)
        if self.kind == "reduced":
            return ReducedState.from_vector(y, self.n, tolerance=1e-8)
        if self.kind == "jacobi":
            return JacobiState.from_vector(y, self.n, tolerance=1e-8)
        raise ValueError(f"no state type for kind {self.kind!r}")

    def report(self, i: int) -> InvariantReport:
        return InvariantReport(**{k: float(self.reports[k][i]) for k in REPORT_FIELDS})

    @property
    def samples(self) -> list[tuple[float, Any, InvariantReport]]:
        return [(float(t), self.state(i), self.report(i)) for i, t in enumerate(self.times)]

    def matrices(self, name: str) -> np.ndarray:
        """Stack of one matrix component, e.g. ``"A"`` or ``"omega"``, shape (N, n, n)."""
        k = self.n * self.n
        names = {
            "phase": ("A", "Adot"),
            "reduced": ("beta", "omega", "zeta"),
            "jacobi": ("A", "Adot", "J", "Jdot"),
        }.get(self.kind, ())
        if name not in names:
            raise KeyError(f"{name!r} is not a component of a {self.kind} trajectory")
        j = names.index(name)
        return self.states[:, j * k:(j + 1) * k].reshape(-1, self.n, self.n)

    def validate(self) -> None:
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times are not strictly increasing")
        for key, arr in self.reports.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"report field {key} has non-finite values")
        if self.kind in ("phase", "reduced", "jacobi"):
            for i in range(len(self)):
                self.state(i)


_SYSTEMS = {
    "phase": (phase_rhs_flat, phase_project_flat),
    "reduced": (reduced_rhs_flat, reduced_project_flat),
    "jacobi": (jacobi_rhs_flat, jacobi_project_flat),
}


def _run(kind: str, y0: np.ndarray, n: int, t_end: float, opts: IntegratorOptions):
    if not math.isfinite(t_end):
        raise ValueError("t_end must be finite")
    rhs, proj = _SYSTEMS[kind]
    times, Y, status = _backend.run(
        kind, y0, 0.0, float(t_end), opts, n=n,
        py_rhs=lambda y: rhs(y, n), py_project=lambda y: proj(y, n),
    )
    truncated = None
    if status != 0:
        truncated = f"stopped at t = {times[-1]!r}: {STATUS_MESSAGES[status]}"
        warnings.warn(truncated, TruncationWarning, stacklevel=3)
    if times.size > 1 and times[-1] < times[0]:
        times, Y = times[::-1].copy(), Y[::-1].copy()
    meta = {"backend": _backend.resolve(opts.backend), "status": status, "t_end": float(t_end)}
    return times, Y, truncated, meta


def integrate_geodesic(init, t_end: float, opts: IntegratorOptions | None = None) -> Trajectory:
    """Integrate a geodesic from a PhaseState or a ReducedState over [0, t_end].

    Negative ``t_end`` integrates backward; samples are always returned in
    increasing time order. If the step size underflows the partial trajectory
    is returned with ``truncated`` set and a :class:`TruncationWarning`.
    """
    opts = opts or IntegratorOptions()
    if isinstance(init, PhaseState):
        kind = "phase"
    elif isinstance(init, ReducedState):
        kind = "reduced"
    else:
        raise TypeError("init must be a PhaseState or ReducedState")
    y0 = init.vector()
    times, Y, truncated, meta = _run(kind, y0, init.n, t_end, opts)
    reports = _reports(kind, times, Y, init.n, y0)
    return Trajectory(kind, init.n, times, Y, reports, truncated, meta)


def integrate_jacobi(init: JacobiState, t_end: float, opts: IntegratorOptions | None = None) -> Trajectory:
    """Co-integrate a geodesic and a Jacobi field along it.

    Reports carry the geodesic invariants plus ``J_norm`` and ``Jdot_norm``,
    the norm of the covariant derivative (tangential part of J').
    """
    opts = opts or IntegratorOptions()
    if not isinstance(init, JacobiState):
        raise TypeError("init must be a JacobiState")
    y0 = init.vector()
    times, Y, truncated, meta = _run("jacobi", y0, init.n, t_end, opts)
    reports = _reports("jacobi", times, Y, init.n, y0)
    return Trajectory("jacobi", init.n, times, Y, reports, truncated, meta)
