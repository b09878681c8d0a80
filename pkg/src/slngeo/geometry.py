"""Extrinsic geometry of SL(n) as the level set det = 1 inside M(n).

Tangent vectors are ambient matrices X with tr(A^{-1} X) = 0. Functions take
the base point either as an array or a :class:`GroupPoint`, and tangent
vectors either as arrays or :class:`TangentVector`; a TangentVector carrying a
different base point is rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import GroupPoint, as_square, hs_inner, hs_norm

__all__ = [
    "TangentVector",
    "unit_normal",
    "normal_derivative",
    "tangent_projection",
    "tangent_basis",
    "second_fundamental_form",
    "sff_reduced",
    "riemann",
    "sectional_curvature",
    "pressure_coefficient",
    "taylor_sign",
]


@dataclass(frozen=True)
class TangentVector:
    base: GroupPoint
    vec: np.ndarray
    tangency_tolerance: float = 1e-9

    def __post_init__(self):
        if not isinstance(self.base, GroupPoint):
            object.__setattr__(self, "base", GroupPoint(self.base))
        X = as_square(self.vec, "tangent vector").copy()
        X.setflags(write=False)
        object.__setattr__(self, "vec", X)
        if X.shape != self.base.mat.shape:
            raise ValueError("tangent vector and base point have different dimensions")
        Ainv = self.base.inv
        lhs = abs(np.trace(Ainv @ X))
        if lhs > self.tangency_tolerance * hs_norm(X) * hs_norm(Ainv):
            raise ValueError(f"not tangent: |tr(A^-1 X)| = {lhs:.3e}")


def _base(A) -> np.ndarray:
    if isinstance(A, GroupPoint):
        return A.mat
    return as_square(A, "A")


def _vec(A: np.ndarray, X) -> np.ndarray:
    if isinstance(X, TangentVector):
        if X.base.mat.shape != A.shape or not np.array_equal(X.base.mat, A):
            raise ValueError("tangent vector is based at a different point")
        return X.vec
    X = as_square(X, "tangent vector")
    if X.shape != A.shape:
        raise ValueError(f"dimension mismatch: {X.shape} vs {A.shape}")
    return X


def unit_normal(A) -> np.ndarray:
    A = _base(A)
    AinvT = np.linalg.inv(A).T
    return AinvT / hs_norm(AinvT)


def normal_derivative(A, X) -> np.ndarray:
    """Directional derivative D_X N of the unit normal field."""
    A = _base(A)
    X = _vec(A, X)
    Ainv = np.linalg.inv(A)
    r = hs_norm(Ainv)
    N = Ainv.T / r
    return -(Ainv.T @ X.T @ Ainv.T) / r + hs_inner(Ainv, Ainv @ X @ Ainv) / r**2 * N


def tangent_projection(A, V) -> np.ndarray:
    """Orthogonal projection of an ambient matrix onto T_A SL(n)."""
    A = _base(A)
    V = as_square(V, "V")
    N = unit_normal(A)
    return V - hs_inner(N, V) * N


def tangent_basis(A) -> list[np.ndarray]:
    """An HS-orthonormal basis of T_A SL(n) (n^2 - 1 matrices)."""
    A = _base(A)
    n = A.shape[0]
    N = unit_normal(A).reshape(-1)
    # complete N to an orthonormal basis of R^{n^2}; drop the N direction
    Q, _ = np.linalg.qr(np.column_stack([N, np.eye(n * n)]))
    return [Q[:, k].reshape(n, n) for k in range(1, n * n)]


def second_fundamental_form(A, X, Y) -> float:
    """II(X, Y) = tr(A^-1 X A^-1 Y) / |A^-1|."""
    A = _base(A)
    X = _vec(A, X)
    Y = _vec(A, Y)
    Ainv = np.linalg.inv(A)
    return float(np.trace(Ainv @ X @ Ainv @ Y) / hs_norm(Ainv))


def sff_reduced(state) -> float:
    """II(A', A') from a reduced state (beta, omega, zeta)."""
    beta, omega, zeta = state.beta, state.omega, state.zeta
    V = omega + zeta
    return float(np.trace(V @ beta @ V @ beta) / (4.0 * math.sqrt(np.trace(beta))))


def riemann(A, X, Y, Z, W) -> float:
    """<R(X, Y)Z, W> from the Gauss equation.

    Equals II(X,Z) II(Y,W) - II(Y,Z) II(X,W) for ambient tangent matrices.
    """
    A = _base(A)
    X, Y, Z, W = (_vec(A, V) for V in (X, Y, Z, W))
    Ainv = np.linalg.inv(A)

    def t(U, V):
        return np.trace(Ainv @ U @ Ainv @ V)

    return float((t(X, Z) * t(Y, W) - t(Y, Z) * t(X, W)) / np.sum(Ainv * Ainv))


def sectional_curvature(A, X, Y, parallel_tol: float = 1e-12) -> float:
    A = _base(A)
    X = _vec(A, X)
    Y = _vec(A, Y)
    xx, yy, xy = hs_inner(X, X), hs_inner(Y, Y), hs_inner(X, Y)
    gram = xx * yy - xy * xy
    if gram <= parallel_tol * xx * yy:
        raise ValueError("tangent vectors are (numerically) parallel")
    return riemann(A, X, Y, X, Y) / gram


def pressure_coefficient(A, Adot) -> float:
    """Coefficient of |A^-1 y|^2 in the affine pressure field: -II(A',A') / (2|A^-1|)."""
    A = _base(A)
    V = _vec(A, Adot)
    return -second_fundamental_form(A, V, V) / (2.0 * hs_norm(np.linalg.inv(A)))


def taylor_sign(A, Adot, tol: float = 0.0) -> int:
    """Sign of II(A',A'): +1 when the Taylor sign condition holds strictly."""
    A = _base(A)
    V = _vec(A, Adot)
    s = second_fundamental_form(A, V, V)
    if s > tol:
        return 1
    if s < -tol:
        return -1
    return 0
