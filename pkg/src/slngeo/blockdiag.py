"""Block-diagonal reduction of the first-order geodesic system.

Under the block ansatz every 2x2 diagonal block of beta is
``b0 I2 + b1 K2 + b2 S2``, of omega ``w0 I2 + w1 K2 + w2 S2`` and of zeta
``z Z2`` with z constant. Odd n carries one extra 1x1 block (b_inf, w_inf)
with zero vorticity.

Flat block vectors are laid out as
``[b0 (m), b1 (m), b2 (m), w0 (m), w1 (m), w2 (m), b_inf, w_inf]`` with the
last two entries present only for odd parity; z is passed separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from ._stepper import dopri5
from .integrate import IntegratorOptions, ReducedState, Trajectory, TruncationWarning
from .linalg import I2, K2, S2, Z2

__all__ = [
    "BlockState",
    "BlockDerivative",
    "BoundednessReport",
    "PulseSystem",
    "SwirlSystem",
    "InstabilityReport",
    "PRESETS",
    "PRESET_WINDOWS",
    "embed",
    "extract",
    "block_rhs",
    "block_energy",
    "boundedness_verdict",
    "integrate_block",
    "axes",
    "detect_period",
    "pulse_hamiltonian",
    "swirl_system",
    "instability_demo",
    "preset",
]


def _vec(x, m: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if arr.shape != (m,):
        raise ValueError(f"{name} must have length {m}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BlockState:
    """Coefficients of (beta, omega, zeta) in the block basis."""

    b0: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    w0: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    z: np.ndarray
    b_inf: float | None = None
    w_inf: float | None = None
    tolerance: float = 1e-9

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.b0)).size
        if m < 1:
            raise ValueError("need at least one 2x2 block")
        for name in ("b0", "b1", "b2", "w0", "w1", "w2", "z"):
            object.__setattr__(self, name, _vec(getattr(self, name), m, name))
        if (self.b_inf is None) != (self.w_inf is None):
            raise ValueError("b_inf and w_inf must be given together")
        if self.odd:
            object.__setattr__(self, "b_inf", float(self.b_inf))
            object.__setattr__(self, "w_inf", float(self.w_inf))
            if not (math.isfinite(self.b_inf) and math.isfinite(self.w_inf)):
                raise ValueError("b_inf, w_inf must be finite")
            if not self.b_inf > 0:
                raise ValueError("b_inf must be positive")
        rad = np.hypot(self.b1, self.b2)
        if np.any(self.b0 <= rad):
            bad = int(np.argmax(self.b0 <= rad)) + 1
            raise ValueError(f"block {bad} of beta is not positive definite (b0 <= sqrt(b1^2 + b2^2))")
        d = self.det_beta
        if abs(d - 1.0) > self.tolerance:
            raise ValueError(f"det(beta) = {d!r} is not 1")
        c = self.compatibility
        scale = max(1.0, float(np.sum(np.abs(self.b0 * self.w0) + np.abs(self.b1 * self.w1)
                                      + np.abs(self.b2 * self.w2))))
        if abs(c) > self.tolerance * scale:
            raise ValueError(f"compatibility b0.w0 + b1.w1 + b2.w2 = {c:.3e} is not 0")

    @property
    def m(self) -> int:
        return self.b0.size

    @property
    def odd(self) -> bool:
        return self.b_inf is not None

    @property
    def parity(self) -> str:
        return "odd" if self.odd else "even"

    @property
    def n(self) -> int:
        return 2 * self.m + int(self.odd)

    @property
    def det_beta(self) -> float:
        d = float(np.prod(self.b0**2 - self.b1**2 - self.b2**2))
        return d * self.b_inf if self.odd else d

    @property
    def compatibility(self) -> float:
        c = float(self.b0 @ self.w0 + self.b1 @ self.w1 + self.b2 @ self.w2)
        return c + 0.5 * self.b_inf * self.w_inf if self.odd else c

    @property
    def pure_diagonal(self) -> bool:
        return not (np.any(self.b1) or np.any(self.b2) or np.any(self.w1) or np.any(self.w2))

    def vector(self) -> np.ndarray:
        parts = [self.b0, self.b1, self.b2, self.w0, self.w1, self.w2]
        if self.odd:
            parts.append(np.array([self.b_inf, self.w_inf]))
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, y, z, odd: bool = False, tolerance: float = 1e-9) -> "BlockState":
        y = np.asarray(y, dtype=float)
        z = np.atleast_1d(np.asarray(z, dtype=float))
        m = z.size
        if y.size != 6 * m + 2 * int(odd):
            raise ValueError("block vector length does not match m and parity")
        kw = {}
        if odd:
            kw = {"b_inf": y[6 * m], "w_inf": y[6 * m + 1]}
        return cls(*(y[i * m:(i + 1) * m] for i in range(6)), z=z, tolerance=tolerance, **kw)

    @classmethod
    def diagonal(cls, b0, w0, z, b_inf=None, w_inf=None, tolerance: float = 1e-9) -> "BlockState":
        """Pure-diagonal state (b1 = b2 = w1 = w2 = 0)."""
        b0 = np.atleast_1d(np.asarray(b0, dtype=float))
        zeros = np.zeros(b0.size)
        return cls(b0, zeros, zeros, w0, zeros, zeros, z, b_inf, w_inf, tolerance)


@dataclass(frozen=True)
class BlockDerivative:
    b0: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    w0: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    b_inf: float | None = None
    w_inf: float | None = None

    def vector(self) -> np.ndarray:
        parts = [self.b0, self.b1, self.b2, self.w0, self.w1, self.w2]
        if self.b_inf is not None:
            parts.append(np.array([self.b_inf, self.w_inf]))
        return np.concatenate(parts)


# ---------------------------------------------------------------------------
# assembly


def _assemble(c0, c1, c2, inf, basis) -> np.ndarray:
    m = len(c0)
    n = 2 * m + (inf is not None)
    M = np.zeros((n, n))
    E0, E1, E2 = basis
    for i in range(m):
        M[2 * i:2 * i + 2, 2 * i:2 * i + 2] = c0[i] * E0 + c1[i] * E1 + c2[i] * E2
    if inf is not None:
        M[-1, -1] = inf
    return M


def embed(state: BlockState) -> ReducedState:
    """Assemble the full (beta, omega, zeta) from block coefficients."""
    zero = np.zeros(state.m)
    beta = _assemble(state.b0, state.b1, state.b2, state.b_inf, (I2, K2, S2))
    omega = _assemble(state.w0, state.w1, state.w2, state.w_inf, (I2, K2, S2))
    zeta = _assemble(state.z, zero, zero, 0.0 if state.odd else None, (Z2, K2, S2))
    return ReducedState(beta, omega, zeta)


def _coeffs(M: np.ndarray, m: int):
    blocks = [M[2 * i:2 * i + 2, 2 * i:2 * i + 2] for i in range(m)]
    c0 = np.array([0.5 * np.trace(B) for B in blocks])
    c1 = np.array([0.5 * np.sum(B * K2) for B in blocks])
    c2 = np.array([0.5 * np.sum(B * S2) for B in blocks])
    cz = np.array([0.5 * np.sum(B * Z2) for B in blocks])
    return c0, c1, c2, cz


def extract(state: ReducedState, m: int | None = None) -> BlockState:
    """Inverse of :func:`embed`; off-block entries are ignored."""
    n = state.n
    m = n // 2 if m is None else m
    if n not in (2 * m, 2 * m + 1):
        raise ValueError(f"n = {n} does not fit {m} blocks")
    b0, b1, b2, _ = _coeffs(state.beta, m)
    w0, w1, w2, _ = _coeffs(state.omega, m)
    *_, z = _coeffs(state.zeta, m)
    kw = {}
    if n == 2 * m + 1:
        kw = {"b_inf": state.beta[-1, -1], "w_inf": state.omega[-1, -1]}
    return BlockState(b0, b1, b2, w0, w1, w2, z, **kw)


def extract_derivative(dbeta: np.ndarray, domega: np.ndarray, m: int) -> BlockDerivative:
    n = dbeta.shape[0]
    b0, b1, b2, _ = _coeffs(dbeta, m)
    w0, w1, w2, _ = _coeffs(domega, m)
    if n == 2 * m + 1:
        return BlockDerivative(b0, b1, b2, w0, w1, w2, float(dbeta[-1, -1]), float(domega[-1, -1]))
    return BlockDerivative(b0, b1, b2, w0, w1, w2)


# ---------------------------------------------------------------------------
# right-hand side from the closed-form block products


def block_rhs_flat(y: np.ndarray, m: int, odd: bool, z: np.ndarray) -> np.ndarray:
    b0, b1, b2, w0, w1, w2 = (y[i * m:(i + 1) * m] for i in range(6))
    det2 = b0 * b0 - b1 * b1 - b2 * b2
    wb = w0 * b0 + w1 * b1 + w2 * b2
    T = np.sum(4.0 * wb * wb + 2.0 * (w1 * w1 + w2 * w2 - w0 * w0) * det2 - 2.0 * z * z * det2)
    trb = 2.0 * np.sum(b0)
    if odd:
        binf, winf = y[6 * m], y[6 * m + 1]
        T += winf * winf * binf * binf
        trb += binf
    half = 0.5 * T / trb
    z2 = z * z
    out = np.empty_like(y)
    # beta' = -beta omega beta
    out[0:m] = -(w0 * (b0 * b0 + b1 * b1 + b2 * b2) + 2.0 * b0 * b1 * w1 + 2.0 * b0 * b2 * w2)
    out[m:2 * m] = -(b0 * b0 * w1 + 2.0 * b0 * b1 * w0 + b1 * b1 * w1 + 2.0 * b1 * b2 * w2 - b2 * b2 * w1)
    out[2 * m:3 * m] = -(b0 * b0 * w2 + 2.0 * b0 * b2 * w0 - b1 * b1 * w2 + 2.0 * b1 * b2 * w1 + b2 * b2 * w2)
    # omega' = (omega beta omega + cross terms + zeta^T beta zeta) / 2 + trace part
    out[3 * m:4 * m] = 0.5 * (b0 * (w0 * w0 + w1 * w1 + w2 * w2) + 2.0 * b1 * w0 * w1 + 2.0 * b2 * w0 * w2
                              + 2.0 * z * (b2 * w1 - b1 * w2) + z2 * b0) + half
    out[4 * m:5 * m] = 0.5 * (2.0 * b0 * w0 * w1 + b1 * (w0 * w0 + w1 * w1 - w2 * w2) + 2.0 * b2 * w1 * w2
                              + 2.0 * z * (b0 * w2 + b2 * w0) - z2 * b1)
    out[5 * m:6 * m] = 0.5 * (2.0 * b0 * w0 * w2 + 2.0 * b1 * w1 * w2 + b2 * (w0 * w0 - w1 * w1 + w2 * w2)
                              - 2.0 * z * (b0 * w1 + b1 * w0) - z2 * b2)
    if odd:
        out[6 * m] = -binf * binf * winf
        out[6 * m + 1] = 0.5 * winf * winf * binf + half
    return out


def block_project_flat(y: np.ndarray, m: int, odd: bool) -> np.ndarray:
    y = np.array(y, dtype=float)
    b0, b1, b2 = y[:m], y[m:2 * m], y[2 * m:3 * m]
    if np.any(b0 <= 0):
        raise ArithmeticError("block left the positive cone")
    det = float(np.prod(b0 * b0 - b1 * b1 - b2 * b2))
    if odd:
        det *= y[6 * m]
    if not (math.isfinite(det) and det > 0):
        raise ArithmeticError("det(beta) left the positive half-line")
    n = 2 * m + int(odd)
    c = det ** (-1.0 / n)
    y[:3 * m] *= c
    if odd:
        y[6 * m] *= c
    num = 2.0 * np.sum(y[:m] * y[3 * m:4 * m] + y[m:2 * m] * y[4 * m:5 * m] + y[2 * m:3 * m] * y[5 * m:6 * m])
    den = 2.0 * np.sum(y[:m])
    if odd:
        num += y[6 * m] * y[6 * m + 1]
        den += y[6 * m]
    y[3 * m:4 * m] -= num / den
    if odd:
        y[6 * m + 1] -= num / den
    return y


def block_rhs(state: BlockState) -> BlockDerivative:
    """Time derivative of the block coefficients."""
    m = state.m
    d = block_rhs_flat(state.vector(), m, state.odd, state.z)
    parts = [d[i * m:(i + 1) * m] for i in range(6)]
    if state.odd:
        return BlockDerivative(*parts, float(d[6 * m]), float(d[6 * m + 1]))
    return BlockDerivative(*parts)


def _energy_flat(Y: np.ndarray, m: int, odd: bool, z: np.ndarray) -> np.ndarray:
    Y = np.atleast_2d(Y)
    b0, b1, b2, w0, w1, w2 = (Y[:, i * m:(i + 1) * m] for i in range(6))
    E = np.sum(b0 * (w0**2 + w1**2 + w2**2 + z**2) + 2 * w0 * w1 * b1 - 2 * w2 * b1 * z
               + 2 * w0 * w2 * b2 + 2 * w1 * b2 * z, axis=1)
    if odd:
        E = E + 0.5 * Y[:, 6 * m] * Y[:, 6 * m + 1] ** 2
    return E


def block_energy(state: BlockState) -> float:
    """Total conserved energy of a block state.

    This is (1/2) tr((omega + zeta)^T beta (omega + zeta)), twice the kinetic
    energy |A'|^2 of the underlying geodesic.
    """
    return float(_energy_flat(state.vector(), state.m, state.odd, state.z)[0])


def axes(Y: np.ndarray, m: int) -> np.ndarray:
    """Semi-axis lengths b0_i^(-1/2) for each sample; shape (N, m)."""
    return np.atleast_2d(Y)[:, :m] ** -0.5


# ---------------------------------------------------------------------------
# boundedness


@dataclass(frozen=True)
class BoundednessReport:
    verdict: str  # "Bounded" or "Inconclusive"
    energy: float
    ceilings: tuple  # E / z_i^2, or None where z_i = 0
    flagged: tuple  # 1-based indices of blocks with z_i = 0
    reasons: tuple = ()

    def violations(self, Y: np.ndarray, m: int, z: np.ndarray, slack: float = 1e-8) -> np.ndarray:
        """max over samples of z_i^2 (b0_i - |(b1_i, b2_i)|) - E, per block."""
        Y = np.atleast_2d(Y)
        lhs = z**2 * (Y[:, :m] - np.hypot(Y[:, m:2 * m], Y[:, 2 * m:3 * m]))
        return np.max(lhs, axis=0) - self.energy


def boundedness_verdict(state: BlockState, zero_tol: float = 0.0) -> BoundednessReport:
    """Per-block ceilings from the energy-momentum bound and a global verdict."""
    E = block_energy(state)
    ceilings, flagged, reasons = [], [], []
    for i, z in enumerate(state.z):
        if abs(z) > zero_tol:
            ceilings.append(E / z**2)
        else:
            ceilings.append(None)
            flagged.append(i + 1)
    if state.odd:
        reasons.append("odd dimension")
    if not state.pure_diagonal:
        reasons.append("not pure-diagonal")
    if flagged:
        reasons.append("vanishing angular momentum in block(s) " + ", ".join(map(str, flagged)))
    verdict = "Inconclusive" if reasons else "Bounded"
    return BoundednessReport(verdict, E, tuple(ceilings), tuple(flagged), tuple(reasons))


# ---------------------------------------------------------------------------
# integration


def _block_run(y0, z, m, odd, t_end, opts):
    return _backend.run(
        "block", y0, 0.0, float(t_end), opts, n=2 * m + int(odd), m=m, odd=odd, z=z,
        py_rhs=lambda y: block_rhs_flat(y, m, odd, z),
        py_project=lambda y: block_project_flat(y, m, odd),
    )


def integrate_block(state: BlockState, t_span=(0.0, 100.0), opts: IntegratorOptions | None = None) -> Trajectory:
    """Integrate the block system over ``t_span`` (which must contain 0).

    Reports hold ``energy`` (see :func:`block_energy`) and ``axis_1..axis_m``.
    A span reaching both sides of 0 is integrated as two runs from the
    initial state and merged.
    """
    import warnings

    opts = opts or IntegratorOptions()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (t0 <= 0.0 <= t1) or not (math.isfinite(t0) and math.isfinite(t1)):
        raise ValueError("t_span must be finite and contain 0")
    m, odd, z = state.m, state.odd, np.array(state.z)
    y0 = state.vector()
    times, rows, notes = [], [], []
    for end, sign in ((t0, -1), (t1, +1)):
        if end == 0.0 and sign < 0:
            continue
        t, Y, status = _block_run(y0, z, m, odd, end, opts)
        if status:
            from ._stepper import STATUS_MESSAGES

            notes.append(f"stopped at t = {t[-1]!r}: {STATUS_MESSAGES[status]}")
        if sign < 0:
            t, Y = t[::-1][:-1], Y[::-1][:-1]  # drop the duplicate t = 0
        times.append(t)
        rows.append(Y)
    times = np.concatenate(times)
    Y = np.concatenate(rows)
    truncated = "; ".join(notes) or None
    if truncated:
        warnings.warn(truncated, TruncationWarning, stacklevel=2)
    reports = {"energy": _energy_flat(Y, m, odd, z)}
    ax = axes(Y, m)
    for i in range(m):
        reports[f"axis_{i + 1}"] = ax[:, i].copy()
    meta = {"m": m, "odd": odd, "z": tuple(float(v) for v in z),
            "backend": _backend.resolve(opts.backend), "t_span": (t0, t1)}
    return Trajectory("block", 2 * m + int(odd), times, Y, reports, truncated, meta)


def _crossings(t: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Indices i with s[i] > 0 >= s[i+1] (downward zero crossings)."""
    return np.nonzero((s[:-1] > 0) & (s[1:] <= 0))[0]


def detect_period(state: BlockState, t_max: float = 100.0, opts: IntegratorOptions | None = None,
                  xtol: float = 1e-10) -> dict | None:
    """Period of a block orbit via the Poincare section w0_1 = 0 (downward).

    Successive section times are refined by bisection on re-integrated
    segments. Returns ``{"period", "t_first", "residual"}`` where the residual
    is the max-norm distance between the states at the two section hits, or
    None if fewer than two crossings occur before ``t_max``.
    """
    opts = opts or IntegratorOptions()
    tr = integrate_block(state, (0.0, t_max), opts)
    m = state.m
    s = tr.states[:, 3 * m]
    idx = _crossings(tr.times, s)
    if idx.size < 2:
        return None
    z, odd = np.array(state.z), state.odd

    def refine(i):
        ta, ya = tr.times[i], tr.states[i]
        lo, hi = 0.0, tr.times[i + 1] - ta
        y_hi = None
        while hi - lo > xtol:
            mid = 0.5 * (lo + hi)
            _, Y, _ = _block_run(ya, z, m, odd, mid, replace(opts, dt_out=max(mid, 1e-300)))
            if Y[-1, 3 * m] > 0:
                lo = mid
            else:
                hi, y_hi = mid, Y[-1]
        if y_hi is None:
            y_hi = tr.states[i + 1]
        return ta + hi, y_hi

    t_a, y_a = refine(idx[0])
    t_b, y_b = refine(idx[1])
    return {"period": t_b - t_a, "t_first": t_a, "residual": float(np.max(np.abs(y_b - y_a)))}


# ---------------------------------------------------------------------------
# pulsating and swirling two-dimensional systems


def _flow2d(rhs, q0: float, p0: float, t_end: float, dt_out: float, rtol: float, atol: float):
    t, Y, status = dopri5(lambda t, y: rhs(y[0], y[1]), np.array([q0, p0], dtype=float), 0.0,
                          float(t_end), rtol=rtol, atol=atol, dt_out=dt_out)
    if t.size > 1 and t[-1] < t[0]:
        t, Y = t[::-1], Y[::-1]
    return t, Y[:, 0], Y[:, 1], status


@dataclass(frozen=True)
class PulseSystem:
    """Hamiltonian (lambda, v) reduction of the two-valued pulsating ansatz."""

    m0: int
    m: int
    z1: float
    zm: float

    def __post_init__(self):
        if not (1 <= self.m0 < self.m):
            raise ValueError("need 1 <= m0 < m")
        if self.z1 == 0 or self.zm == 0:
            raise ValueError("z1 and zm must be nonzero")

    @property
    def k(self) -> int:
        return self.m - self.m0

    def g(self, lam):
        """Coefficient of v^2 in H."""
        return np.exp(-lam / self.m0) / self.m0 + np.exp(lam / self.k) / self.k

    def __call__(self, lam, v):
        return (self.m0 * np.exp(lam / self.m0) * self.z1**2
                + self.k * np.exp(-lam / self.k) * self.zm**2 + self.g(lam) * v**2)

    def rhs(self, lam, v):
        dH = (np.exp(lam / self.m0) * self.z1**2 - np.exp(-lam / self.k) * self.zm**2
              + (-np.exp(-lam / self.m0) / self.m0**2 + np.exp(lam / self.k) / self.k**2) * v**2)
        return np.array([-v, dH / (2.0 * self.g(lam))])

    def flow(self, lam0: float, v0: float, t_end: float, dt_out: float = 0.01,
             rtol: float = 1e-12, atol: float = 1e-14):
        """Returns (t, lambda, v, status)."""
        return _flow2d(self.rhs, lam0, v0, t_end, dt_out, rtol, atol)

    def critical_point(self) -> float:
        """lambda_0 with e^{lambda/m0} z1^2 = e^{-lambda/(m-m0)} zm^2."""
        return 2.0 * math.log(abs(self.zm) / abs(self.z1)) / (1.0 / self.m0 + 1.0 / self.k)

    def lambda_bounds(self, H: float) -> tuple[float, float]:
        return (-self.k * math.log(H / (self.k * self.zm**2)),
                self.m0 * math.log(H / (self.m0 * self.z1**2)))

    def to_block_state(self, lam: float, v: float, signs=None) -> BlockState:
        """Pure-diagonal block state realizing (lambda, v) under the ansatz."""
        m0, k = self.m0, self.k
        b0 = np.array([math.exp(lam / m0)] * m0 + [math.exp(-lam / k)] * k)
        w0 = np.array([math.exp(-lam / m0) * v / m0] * m0 + [-math.exp(lam / k) * v / k] * k)
        z = np.array([abs(self.z1)] * m0 + [abs(self.zm)] * k)
        if signs is not None:
            z = z * np.asarray(signs)
        return BlockState.diagonal(b0, w0, z)

    def period(self, lam0: float, v0: float, t_max: float = 200.0, xtol: float = 1e-10) -> dict | None:
        """Return-map period on the section v = 0 (v decreasing, so lambda turns upward)."""
        t, lam, v, _ = self.flow(lam0, v0, t_max)
        idx = _crossings(t, v)
        if idx.size < 2:
            return None

        def refine(i):
            lo, hi = 0.0, t[i + 1] - t[i]
            state = (lam[i + 1], v[i + 1])
            while hi - lo > xtol:
                mid = 0.5 * (lo + hi)
                _, L, V, _ = self.flow(lam[i], v[i], mid, dt_out=max(mid, 1e-300))
                if V[-1] > 0:
                    lo = mid
                else:
                    hi, state = mid, (L[-1], V[-1])
            return t[i] + hi, np.array(state)

        ta, sa = refine(idx[0])
        tb, sb = refine(idx[1])
        return {"period": tb - ta, "t_first": ta, "residual": float(np.max(np.abs(sb - sa)))}


def pulse_hamiltonian(m0: int, m: int, z1: float, zm: float) -> PulseSystem:
    return PulseSystem(int(m0), int(m), float(z1), float(zm))


@dataclass(frozen=True)
class SwirlSystem:
    """Hamiltonian (b, v) reduction of the swirling/shear ansatz."""

    n: int
    m0: int
    z0: float

    def __post_init__(self):
        if not (self.m0 >= 1 and 2 * self.m0 < self.n):
            raise ValueError("need 1 <= m0 and 2 m0 < n")

    @property
    def r(self) -> int:
        return self.n - 2 * self.m0

    def g(self, b):
        return np.exp(-b / (2 * self.m0)) / (4 * self.m0) + np.exp(b / self.r) / (2 * self.r)

    def hamiltonian(self, b, v):
        return self.m0 * self.z0**2 * np.exp(b / (2 * self.m0)) + self.g(b) * v**2

    __call__ = hamiltonian

    def rhs(self, b, v):
        m0, r = self.m0, self.r
        dH = (0.5 * self.z0**2 * np.exp(b / (2 * m0))
              + (-np.exp(-b / (2 * m0)) / (8 * m0 * m0) + np.exp(b / r) / (2 * r * r)) * v**2)
        return np.array([-v, dH / (2.0 * self.g(b))])

    def flow(self, b0: float, v0: float, t_end: float, dt_out: float = 0.01,
             rtol: float = 1e-12, atol: float = 1e-14):
        """Returns (t, b, v, status); b' = -v."""
        return _flow2d(self.rhs, b0, v0, t_end, dt_out, rtol, atol)

    def to_reduced(self, b: float, v: float) -> ReducedState:
        """The full (beta, omega, zeta) of the ansatz at (b, v)."""
        m0, r, n = self.m0, self.r, self.n
        beta = np.diag([math.exp(b / (2 * m0))] * (2 * m0) + [math.exp(-b / r)] * r)
        omega = np.diag([v / (2 * m0) * math.exp(-b / (2 * m0))] * (2 * m0)
                        + [-v / r * math.exp(b / r)] * r)
        zeta = np.zeros((n, n))
        for i in range(m0):
            zeta[2 * i:2 * i + 2, 2 * i:2 * i + 2] = self.z0 * Z2
        return ReducedState(beta, omega, zeta)

    def asymptotics(self, b0: float = 0.0, v0: float = 0.0, t_end: float = 1000.0,
                    dt_out: float = 0.1, fit_fraction: float = 0.2) -> dict:
        """Late-time behavior over [0, t_end].

        For z0 != 0 fits the slope of B = e^{-b/(4 m0)} by least squares on the
        last ``fit_fraction`` of the window and compares with (1/2) sqrt(H/m0).
        For z0 = 0 checks that b is strictly monotone and reports its range.
        """
        t, b, v, status = self.flow(b0, v0, t_end, dt_out)
        H = float(self.hamiltonian(b0, v0))
        out = {"H": H, "status": status, "t": t, "b": b, "v": v}
        if self.z0 != 0:
            B = np.exp(-b / (4 * self.m0))
            sel = t >= t[0] + (1.0 - fit_fraction) * (t[-1] - t[0])
            slope = float(np.polyfit(t[sel], B[sel], 1)[0])
            predicted = 0.5 * math.sqrt(H / self.m0)
            out.update(slope=slope, predicted=predicted, rel_error=abs(slope - predicted) / predicted)
        else:
            d = np.diff(b)
            out.update(monotone=bool(np.all(d > 0) or np.all(d < 0)),
                       b_min=float(b.min()), b_max=float(b.max()))
        return out


def swirl_system(n: int, m0: int, z0: float) -> SwirlSystem:
    return SwirlSystem(int(n), int(m0), float(z0))


# ---------------------------------------------------------------------------
# instability demonstration


@dataclass(frozen=True)
class InstabilityReport:
    unperturbed: Trajectory
    perturbed: Trajectory
    norm_growth: float  # max |A(t)| / |A(0)| on the unperturbed run
    verdict: BoundednessReport
    max_b0: tuple  # per block, perturbed run
    within_ceilings: bool
    extras: dict = field(default_factory=dict)


def _hs_norm_from_blocks(Y: np.ndarray, m: int, odd: bool) -> np.ndarray:
    """|A| = sqrt(tr beta^-1) along block samples."""
    b0, b1, b2 = Y[:, :m], Y[:, m:2 * m], Y[:, 2 * m:3 * m]
    tr_inv = np.sum(2.0 * b0 / (b0 * b0 - b1 * b1 - b2 * b2), axis=1)
    if odd:
        tr_inv = tr_inv + 1.0 / Y[:, 6 * m]
    return np.sqrt(tr_inv)


def instability_demo(n: int, m0: int, eps: float, t_end: float = 100.0, b: float = 0.0,
                     v: float = -1.0, z0: float = 0.0,
                     opts: IntegratorOptions | None = None) -> InstabilityReport:
    """Shear data with vanishing angular momenta versus an eps-perturbation.

    The unperturbed state is the pure-diagonal swirl/shear state at (b, v)
    with angular momentum z0 on the leading m0 blocks and 0 on the rest. The
    perturbed copy raises every |z_i| < eps to eps.
    """
    if n % 2 or not (1 <= m0 and 2 * m0 < n):
        raise ValueError("need even n and 1 <= m0 < n/2")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    m = n // 2
    sw = swirl_system(n, m0, z0)
    red = sw.to_reduced(b, v)
    base = extract(red, m)
    z_pert = np.where(np.abs(base.z) < eps, eps, base.z)
    pert = BlockState.diagonal(base.b0, base.w0, z_pert)
    tr_u = integrate_block(base, (0.0, t_end), opts)
    tr_p = integrate_block(pert, (0.0, t_end), opts)
    norms = _hs_norm_from_blocks(tr_u.states, m, False)
    verdict = boundedness_verdict(pert)
    max_b0 = tuple(float(x) for x in np.max(tr_p.states[:, :m], axis=0))
    within = all(c is None or mb <= c for mb, c in zip(max_b0, verdict.ceilings))
    if verdict.verdict != "Bounded":
        within = False
    return InstabilityReport(tr_u, tr_p, float(np.max(norms) / norms[0]), verdict, max_b0, within,
                             {"norm_final": float(norms[-1]), "norm_initial": float(norms[0])})


# ---------------------------------------------------------------------------
# figure presets (n = 6, pure diagonal)

_q = 0.9
PRESETS = {
    # z_i b0_i = (0.5, 0.5, 0.3), w0 = 0, b0_1 = b0_2 = 0.9^-2; b0_3 from det = 1
    "fig1": dict(b0=[_q**-2, _q**-2, _q**4], w0=[0.0, 0.0, 0.0],
                 z=[0.5 * _q**2, 0.5 * _q**2, 0.3 / _q**4]),
    # z_i b0_i = (1, 0.5, 0.1), w0_1 b0_1 = 3, b0 = 1; w0_3 from compatibility
    "fig2": dict(b0=[1.0, 1.0, 1.0], w0=[3.0, 0.0, -3.0], z=[1.0, 0.5, 0.1]),
    # z = (0, 0.5/4, 0.6), w0_1 b0_1 = 1, b0 = (1/4, 4, 1)
    "fig3": dict(b0=[0.25, 4.0, 1.0], w0=[4.0, 0.0, -1.0], z=[0.0, 0.125, 0.6]),
}
PRESET_WINDOWS = {"fig1": (-20.0, 20.0), "fig2": (-20.0, 20.0), "fig3": (-40.0, 40.0)}


def preset(name: str) -> BlockState:
    try:
        p = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return BlockState.diagonal(p["b0"], p["w0"], p["z"])
