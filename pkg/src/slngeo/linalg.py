"""Small dense matrix algebra on M(n) with the Hilbert-Schmidt inner product.

Matrices are plain ``numpy.ndarray`` objects of shape ``(n, n)``; the helpers
here validate shape and finiteness instead of wrapping them in a class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "I2", "K2", "S2", "Z2",
    "NilpotencyError",
    "GroupPoint",
    "PolarFactors",
    "as_square",
    "hs_inner",
    "hs_norm",
    "sym_skew_split",
    "det",
    "polar_decompose",
    "nilpotency_index",
    "matrix_exp",
    "orthogonal_conjugate",
    "is_special_orthogonal",
]

I2 = np.eye(2)
K2 = np.array([[1.0, 0.0], [0.0, -1.0]])
S2 = np.array([[0.0, 1.0], [1.0, 0.0]])
Z2 = np.array([[0.0, -1.0], [1.0, 0.0]])

for _m in (I2, K2, S2, Z2):
    _m.setflags(write=False)


class NilpotencyError(ValueError):
    """Power test and trace test disagree about nilpotency (ill-conditioned input)."""


def as_square(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite float64 square array, or raise ValueError."""
    arr = np.asarray(M, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _same_shape(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")


def hs_inner(A, B) -> float:
    """Hilbert-Schmidt inner product tr(A B^T)."""
    A = as_square(A, "A")
    B = as_square(B, "B")
    _same_shape(A, B)
    return float(np.sum(A * B))


def hs_norm(A) -> float:
    A = as_square(A, "A")
    return float(math.sqrt(np.sum(A * A)))


def sym_skew_split(V) -> tuple[np.ndarray, np.ndarray]:
    """Split ``V`` into its symmetric and antisymmetric parts."""
    V = as_square(V, "V")
    return 0.5 * (V + V.T), 0.5 * (V - V.T)


def det(A) -> float:
    # LAPACK getrf underneath: LU with partial pivoting.
    return float(np.linalg.det(as_square(A)))


@dataclass(frozen=True)
class GroupPoint:
    """An element of SL(n)."""

    mat: np.ndarray
    det_tolerance: float = 1e-10

    def __post_init__(self):
        A = as_square(self.mat, "GroupPoint")
        A = A.copy()
        A.setflags(write=False)
        object.__setattr__(self, "mat", A)
        d = det(A)
        if abs(d - 1.0) > self.det_tolerance:
            raise ValueError(f"det = {d!r} is not 1 within {self.det_tolerance:g}")
        n = A.shape[0]
        # AM-GM on squared singular values: |A|^2 >= n on SL(n).
        if np.sum(A * A) < n * (1.0 - 1e-9):
            raise ValueError("HS norm below sqrt(n); not an SL(n) element")

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    @property
    def inv(self) -> np.ndarray:
        return np.linalg.inv(self.mat)


@dataclass(frozen=True)
class PolarFactors:
    rotation: np.ndarray
    stretch: np.ndarray

    def recompose(self) -> np.ndarray:
        return self.rotation @ self.stretch


def polar_decompose(A, tol: float = 1e-13, max_iter: int = 100) -> PolarFactors:
    """Polar decomposition ``A = O P`` by the Newton iteration X <- (X + X^-T)/2.

    Requires det(A) > 0 so that the orthogonal factor lands in SO(n).
    """
    A = as_square(A, "A")
    d = det(A)
    if not d > 0.0:
        raise ValueError(f"polar_decompose needs det(A) > 0, got {d!r}")
    if np.linalg.cond(A) > 1e14:
        raise ValueError("matrix is numerically singular")
    X = A.copy()
    for _ in range(max_iter):
        X_next = 0.5 * (X + np.linalg.inv(X).T)
        delta = np.linalg.norm(X_next - X) / max(np.linalg.norm(X_next), 1.0)
        X = X_next
        if delta < tol:
            break
    else:
        raise ArithmeticError("polar Newton iteration did not converge")
    P = X.T @ A
    P = 0.5 * (P + P.T)
    return PolarFactors(rotation=X, stretch=P)


def nilpotency_index(M, tol: float = 1e-9) -> int | None:
    """Smallest k <= n with M^k negligible, or None if M is not nilpotent.

    "Negligible" means |M^k| <= tol * max(1, |M|)^k. A positive verdict is
    cross-checked against the vanishing of tr M^j, j = 1..n; a mismatch
    raises :class:`NilpotencyError`.
    """
    M = as_square(M, "M")
    n = M.shape[0]
    scale = max(1.0, hs_norm(M))
    P = np.eye(n)
    index = None
    for k in range(1, n + 1):
        P = P @ M
        if hs_norm(P) <= tol * scale**k:
            index = k
            break
    if index is None:
        return None
    P = np.eye(n)
    for j in range(1, n + 1):
        P = P @ M
        if abs(np.trace(P)) > tol * math.sqrt(n) * scale**j:
            raise NilpotencyError(
                f"M^{index} vanishes but tr M^{j} = {np.trace(P):.3e}; ill-conditioned input"
            )
    return index


def _is_block_rotation(C: np.ndarray, tol: float = 0.0) -> bool:
    n = C.shape[0]
    mask = np.zeros_like(C, dtype=bool)
    for i in range(0, n - 1, 2):
        mask[i, i + 1] = mask[i + 1, i] = True
    scale = max(hs_norm(C), 1.0)
    if np.any(np.abs(C[~mask]) > tol * scale):
        return False
    return bool(np.all(np.abs(C + C.T) <= tol * scale))


def _exp_block_rotation(C: np.ndarray) -> np.ndarray:
    n = C.shape[0]
    E = np.eye(n)
    for i in range(0, n - 1, 2):
        theta = 0.5 * (C[i + 1, i] - C[i, i + 1])
        c, s = math.cos(theta), math.sin(theta)
        E[i, i], E[i, i + 1], E[i + 1, i], E[i + 1, i + 1] = c, -s, s, c
    return E


def _exp_taylor(C: np.ndarray) -> np.ndarray:
    # scaling and squaring; the truncated series runs until terms stop mattering
    n = C.shape[0]
    norm = np.linalg.norm(C, 1)
    s = max(0, int(math.ceil(math.log2(norm / 0.25))) if norm > 0.25 else 0)
    X = C / 2.0**s
    E = np.eye(n)
    term = np.eye(n)
    for k in range(1, 40):
        term = term @ X / k
        E = E + term
        if np.max(np.abs(term)) <= 1e-18 * np.max(np.abs(E)):
            break
    for _ in range(s):
        E = E @ E
    return E


def matrix_exp(C) -> np.ndarray:
    """Matrix exponential e^C.

    Nilpotent inputs get the exact finite sum; antisymmetric inputs made of
    2x2 diagonal blocks get exact rotation blocks; everything else goes through
    scaling and squaring.
    """
    C = as_square(C, "C")
    n = C.shape[0]
    if not np.any(C):
        return np.eye(n)
    if _is_block_rotation(C):
        return _exp_block_rotation(C)
    try:
        k = nilpotency_index(C, tol=1e-14)
    except NilpotencyError:
        k = None
    if k is not None:
        E = np.eye(n)
        term = np.eye(n)
        for j in range(1, k):
            term = term @ C / j
            E = E + term
        return E
    return _exp_taylor(C)


def is_special_orthogonal(U, tol: float = 1e-10) -> bool:
    U = as_square(U, "U")
    n = U.shape[0]
    return bool(
        np.max(np.abs(U.T @ U - np.eye(n))) <= tol and abs(det(U) - 1.0) <= tol
    )


def orthogonal_conjugate(A, U) -> np.ndarray:
    """Conjugate action U A U^{-1} = U A U^T for U in SO(n)."""
    A = as_square(A, "A")
    U = as_square(U, "U")
    _same_shape(A, U)
    if not is_special_orthogonal(U):
        raise ValueError("conjugator is not special orthogonal")
    return U @ A @ U.T
