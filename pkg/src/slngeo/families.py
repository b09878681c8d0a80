"""Explicit geodesic families: lines B(I + tM) and exponentials B e^{tC}.

Also holds the closed-form Jacobi fields along index-2 lines and the
sufficient conditions for unbounded growth.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .integrate import PhaseState
from .linalg import (
    GroupPoint, NilpotencyError, Z2, as_square, det, hs_inner, hs_norm, is_special_orthogonal,
    matrix_exp, nilpotency_index, polar_decompose,
)

__all__ = [
    "ExpKind",
    "ExpClassification",
    "CertKind",
    "Certificate",
    "LinearGeodesicSpec",
    "RotationalSpec",
    "PerpBasis",
    "JacobiField",
    "classify_line",
    "classify_exponential",
    "build_rotational",
    "left_right_transport",
    "perp_basis",
    "jacobi_closed_form",
    "explicit_jacobi_family",
    "unbounded_certificate",
]


# ---------------------------------------------------------------------------
# lines


def classify_line(A0, A1, tol: float = 1e-10) -> bool:
    """True iff A0 + t A1 is a geodesic line in SL(n).

    That is the case exactly when det A0 = 1 and A0^-1 A1 is nilpotent.
    """
    A0 = as_square(A0, "A0")
    A1 = as_square(A1, "A1")
    if A0.shape != A1.shape:
        raise ValueError(f"dimension mismatch: {A0.shape} vs {A1.shape}")
    if abs(det(A0) - 1.0) > tol:
        return False
    try:
        M = np.linalg.solve(A0, A1)
    except np.linalg.LinAlgError:
        return False
    try:
        return nilpotency_index(M) is not None
    except NilpotencyError:
        return False


@dataclass(frozen=True)
class LinearGeodesicSpec:
    """The line A(t) = B (I + t M) with M nilpotent."""

    B: GroupPoint
    M: np.ndarray
    index: int | None = None

    def __post_init__(self):
        if not isinstance(self.B, GroupPoint):
            object.__setattr__(self, "B", GroupPoint(self.B))
        M = as_square(self.M, "M").copy()
        if M.shape != self.B.mat.shape:
            raise ValueError("B and M must have the same dimension")
        M.setflags(write=False)
        object.__setattr__(self, "M", M)
        k = nilpotency_index(M)
        if k is None:
            raise ValueError("M is not nilpotent")
        if self.index is None:
            object.__setattr__(self, "index", k)
        elif self.index != k:
            raise ValueError(f"declared index {self.index} but M has nilpotency index {k}")
        for t in (-10.0, 1.0, 10.0):
            d = det(self.at(t))
            if abs(d - 1.0) > 1e-10:
                raise ValueError(f"det B(I + tM) = {d!r} at t = {t}")

    @property
    def n(self) -> int:
        return self.B.n

    def at(self, t: float) -> np.ndarray:
        return self.B.mat @ (np.eye(self.n) + t * self.M)

    def velocity(self) -> np.ndarray:
        return self.B.mat @ self.M

    def phase_state(self, t: float = 0.0) -> PhaseState:
        return PhaseState(self.at(t), self.velocity())

    def left_form(self) -> np.ndarray:
        """N with B(I + tM) = (I + tN) B, namely N = B M B^-1."""
        return self.B.mat @ self.M @ self.B.inv


# ---------------------------------------------------------------------------
# exponentials


class ExpKind(enum.Enum):
    LinearNilpotent = "LinearNilpotent"
    Rotational = "Rotational"
    NotGeodesic = "NotGeodesic"


@dataclass(frozen=True)
class ExpClassification:
    kind: ExpKind
    kappa: float | None = None

    def __str__(self) -> str:
        if self.kind is ExpKind.Rotational:
            return f"Rotational, kappa = {self.kappa:.12g}"
        return self.kind.value


def classify_exponential(B, C, tol: float = 1e-10) -> ExpClassification:
    """Decide whether t -> B e^{tC} is a geodesic.

    Returns LinearNilpotent when C^2 = 0, Rotational(kappa) when n is even,
    C is antisymmetric and C^2 = kappa (B^T B)^-1, and NotGeodesic otherwise.
    Tolerances are relative to |C|^2.
    """
    Bp = B if isinstance(B, GroupPoint) else GroupPoint(B)
    C = as_square(C, "C")
    if C.shape != Bp.mat.shape:
        raise ValueError("B and C must have the same dimension")
    n = Bp.n
    scale = max(1.0, hs_norm(C))
    if abs(np.trace(C)) > tol * scale:
        raise ValueError(f"tr C = {np.trace(C):.3e}; C is not in sl(n)")
    C2 = C @ C
    if hs_norm(C2) <= tol * scale**2:
        return ExpClassification(ExpKind.LinearNilpotent)
    if n % 2 or hs_norm(C + C.T) > tol * scale:
        return ExpClassification(ExpKind.NotGeodesic)
    D = np.linalg.inv(Bp.mat.T @ Bp.mat)
    kappa = float(np.trace(C2) / np.trace(D))
    if hs_norm(C2 - kappa * D) > tol * scale**2:
        return ExpClassification(ExpKind.NotGeodesic)
    return ExpClassification(ExpKind.Rotational, kappa)


@dataclass(frozen=True)
class RotationalSpec:
    """Stretch factors, rotation rate and frame of a rotational exponential.

    ``lambdas`` are the paired singular values of B (each used twice), so
    n = 2 len(lambdas). ``n`` may be given explicitly as a cross-check.
    """

    lambdas: tuple
    kappa: float
    signs: tuple | None = None
    conjugators: tuple | None = None  # (U, V), both in SO(n)
    n: int | None = None

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if not lam:
            raise ValueError("need at least one stretch factor")
        if any(not (x > 0 and math.isfinite(x)) for x in lam):
            raise ValueError("stretch factors must be positive and finite")
        object.__setattr__(self, "lambdas", lam)
        m = len(lam)
        if self.n is not None and self.n != 2 * m:
            if self.n % 2:
                raise ValueError(f"n = {self.n} is odd; rotational exponentials need even n")
            raise ValueError(f"n = {self.n} does not match {m} stretch pairs")
        prod = math.prod(x * x for x in lam)
        if abs(prod - 1.0) > 1e-10:
            raise ValueError(f"product of squared stretch factors is {prod!r}, not 1")
        if not (self.kappa < 0 and math.isfinite(self.kappa)):
            raise ValueError("kappa must be negative")
        signs = (1,) * m if self.signs is None else tuple(int(s) for s in self.signs)
        if len(signs) != m or any(s not in (1, -1) for s in signs):
            raise ValueError("signs must be one of +1/-1 per stretch factor")
        object.__setattr__(self, "signs", signs)
        if self.conjugators is not None:
            U, V = (as_square(X, "conjugator") for X in self.conjugators)
            if U.shape != (2 * m, 2 * m) or V.shape != (2 * m, 2 * m):
                raise ValueError("conjugators must be n x n")
            if not (is_special_orthogonal(U) and is_special_orthogonal(V)):
                raise ValueError("conjugators must be special orthogonal")
            object.__setattr__(self, "conjugators", (U, V))

    @property
    def dim(self) -> int:
        return 2 * len(self.lambdas)

    @property
    def speeds(self) -> tuple:
        """Angular speeds omega_i = sign_i sqrt|kappa| / lambda_i."""
        r = math.sqrt(-self.kappa)
        return tuple(s * r / x for s, x in zip(self.signs, self.lambdas))


def build_rotational(spec: RotationalSpec) -> tuple[GroupPoint, np.ndarray]:
    """(B, C) with B = U Lambda V and V C V^T the direct sum of omega_i Z2."""
    n = spec.dim
    Lam = np.diag(np.repeat(spec.lambdas, 2))
    Om = np.zeros((n, n))
    for i, w in enumerate(spec.speeds):
        Om[2 * i:2 * i + 2, 2 * i:2 * i + 2] = w * Z2
    U, V = spec.conjugators if spec.conjugators is not None else (np.eye(n), np.eye(n))
    B = U @ Lam @ V
    C = V.T @ Om @ V
    Bp = GroupPoint(B)
    D = np.linalg.inv(B.T @ B)
    if hs_norm(C @ C - spec.kappa * D) > 1e-10 * max(1.0, hs_norm(C) ** 2):
        raise ArithmeticError("assembled (B, C) violates C^2 = kappa (B^T B)^-1")
    return Bp, C


def left_right_transport(B, C, tol: float = 1e-10) -> np.ndarray:
    """C' = B C B^-1, so that e^{tC'} B = B e^{tC}, for rotational (B, C)."""
    Bp = B if isinstance(B, GroupPoint) else GroupPoint(B)
    C = as_square(C, "C")
    cls = classify_exponential(Bp, C, tol)
    if cls.kind is not ExpKind.Rotational:
        raise ValueError(f"(B, C) is {cls}, not Rotational")
    Cp = Bp.mat @ C @ Bp.inv
    scale = max(1.0, hs_norm(Cp))
    if hs_norm(Cp + Cp.T) > tol * scale:
        raise ArithmeticError("B C B^-1 is not antisymmetric")
    for t in (0.1, 1.0):
        lhs = matrix_exp(t * Cp) @ Bp.mat
        rhs = Bp.mat @ matrix_exp(t * C)
        if hs_norm(lhs - rhs) > tol * max(1.0, hs_norm(rhs)):
            raise ArithmeticError(f"e^(tC') B != B e^(tC) at t = {t}")
    return Cp


# ---------------------------------------------------------------------------
# Jacobi fields along lines


@dataclass(frozen=True)
class PerpBasis:
    """Orthonormal basis of the matrices orthogonal to every B^-T (M^T)^k."""

    B: GroupPoint
    M: np.ndarray
    basis: tuple

    def __len__(self) -> int:
        return len(self.basis)

    def project(self, X) -> np.ndarray:
        """Orthogonal projection of X onto the span of the basis."""
        X = as_square(X, "X")
        return sum((hs_inner(E, X) * E for E in self.basis), np.zeros_like(X))


def _span_vectors(B: GroupPoint, M: np.ndarray, index: int) -> np.ndarray:
    BinvT = B.inv.T
    vecs, P = [], np.eye(B.n)
    for _ in range(index):
        vecs.append((BinvT @ P).ravel())
        P = P @ M.T
    return np.array(vecs)


def perp_basis(B, M) -> PerpBasis:
    """Basis of the complement of span{B^-T (M^T)^k : 0 <= k < index}.

    Its size is n^2 - index.
    """
    Bp = B if isinstance(B, GroupPoint) else GroupPoint(B)
    M = as_square(M, "M")
    k = nilpotency_index(M)
    if k is None:
        raise ValueError("M is not nilpotent")
    n = Bp.n
    S = _span_vectors(Bp, M, k)
    _, sv, Vt = np.linalg.svd(S)
    rank = int(np.sum(sv > 1e-12 * sv[0]))
    if rank != k:
        raise ArithmeticError(f"spanning set has rank {rank}, expected {k}")
    basis = tuple(Vt[j].reshape(n, n).copy() for j in range(rank, n * n))
    for E in basis:
        E.setflags(write=False)
    return PerpBasis(Bp, M, basis)


@dataclass(frozen=True)
class JacobiField:
    """A closed-form Jacobi field: ``J(t)`` and its ambient derivative ``J.derivative(t)``."""

    value: object
    deriv: object
    meta: dict = field(default_factory=dict)

    def __call__(self, t: float) -> np.ndarray:
        return self.value(t)

    def derivative(self, t: float) -> np.ndarray:
        return self.deriv(t)


def _in_perp(K: np.ndarray, M: np.ndarray, tol: float) -> bool:
    n = K.shape[0]
    s = max(1.0, hs_norm(K))
    return abs(np.trace(K)) <= tol * s * math.sqrt(n) and abs(hs_inner(K, M.T)) <= tol * s * max(1.0, hs_norm(M))


def jacobi_closed_form(M, b0: float, b1: float, K0=None, K1=None, tol: float = 1e-12) -> JacobiField:
    """Jacobi fields along A(t) = I + tM with M^2 = 0:

    J(t) = (|M|^2 t/n I + M^T) b(t) + K0 + t K1,
    b(t) = (sqrt(n) b1/|M|) arctan(|M| t/sqrt(n)) + b0.
    """
    M = as_square(M, "M")
    n = M.shape[0]
    r = hs_norm(M)
    if r == 0.0:
        raise ValueError("M = 0 has nilpotency index 1, not 2")
    if hs_norm(M @ M) > tol * max(1.0, r * r):
        raise ValueError("M^2 != 0")
    K0 = np.zeros((n, n)) if K0 is None else as_square(K0, "K0")
    K1 = np.zeros((n, n)) if K1 is None else as_square(K1, "K1")
    for name, K in (("K0", K0), ("K1", K1)):
        if K.shape != M.shape:
            raise ValueError(f"{name} has the wrong dimension")
        if not _in_perp(K, M, 1e-10):
            raise ValueError(f"{name} is not orthogonal to I and M^T")
    c = math.sqrt(n)
    I = np.eye(n)

    def b(t):
        return c * b1 / r * math.atan(r * t / c) + b0

    def bd(t):
        return b1 / (1.0 + r * r * t * t / n)

    def value(t):
        return (r * r * t / n * I + M.T) * b(t) + K0 + t * K1

    def deriv(t):
        return (r * r / n) * b(t) * I + (r * r * t / n * I + M.T) * bd(t) + K1

    return JacobiField(value, deriv, {"M": M, "b0": b0, "b1": b1})


def explicit_jacobi_family(B, M, a, T, tol: float = 1e-10) -> JacobiField:
    """J(t) = B a + t B a M + t B T, the variation of B e^{sa}(I + t(M + sT)).

    Requires tr a = 0 and M + sT nilpotent for all s (checked at a few s).
    """
    Bp = B if isinstance(B, GroupPoint) else GroupPoint(B)
    M, a, T = (as_square(X, name) for X, name in ((M, "M"), (a, "a"), (T, "T")))
    if abs(np.trace(a)) > tol * max(1.0, hs_norm(a)):
        raise ValueError("a is not traceless")
    for s in (0.0, 0.5, -1.0, 2.0):
        if nilpotency_index(M + s * T) is None:
            raise ValueError(f"M + sT is not nilpotent at s = {s}")
    Bm = Bp.mat
    J0 = Bm @ a
    J1 = Bm @ a @ M + Bm @ T
    return JacobiField(lambda t: J0 + t * J1, lambda t: J1.copy(), {"a": a, "T": T})


# ---------------------------------------------------------------------------
# unboundedness certificates


class CertKind(enum.Enum):
    SymmetricLeaf = "SymmetricLeaf"
    ZeroVorticity = "ZeroVorticity"
    ZeroAngularMomentum = "ZeroAngularMomentum"
    None_ = "None"


@dataclass(frozen=True)
class Certificate:
    kind: CertKind
    matches: tuple = ()

    def __bool__(self) -> bool:
        return self.kind is not CertKind.None_


def _is_symmetric(X: np.ndarray, tol: float, scale: float) -> bool:
    return hs_norm(X - X.T) <= tol * max(1.0, scale)


def unbounded_certificate(state: PhaseState, tol: float = 1e-10) -> Certificate:
    """First sufficient condition for unbounded growth that holds, plus all matches.

    Checked in order: O^T A1 symmetric (O the rotation in A0 = O P), A0^T A1
    symmetric, A1 A0^T symmetric.
    """
    A0, A1 = state.A.mat, state.Adot
    scale = hs_norm(A0) * hs_norm(A1)
    matches = []
    O = polar_decompose(A0).rotation
    if _is_symmetric(O.T @ A1, tol, hs_norm(A1)):
        matches.append(CertKind.SymmetricLeaf)
    if _is_symmetric(A0.T @ A1, tol, scale):
        matches.append(CertKind.ZeroVorticity)
    if _is_symmetric(A1 @ A0.T, tol, scale):
        matches.append(CertKind.ZeroAngularMomentum)
    if not matches:
        return Certificate(CertKind.None_, ())
    return Certificate(matches[0], tuple(matches))
