"""Random test data: points of SL(n), tangent vectors, nilpotents, block states.

All generators take a ``numpy.random.Generator``; ``default_rng`` honours the
``SLNGEO_SEED`` environment variable.
"""

from __future__ import annotations

import os

import numpy as np

from .blockdiag import BlockState
from .geometry import tangent_projection
from .integrate import PhaseState
from .linalg import GroupPoint, hs_norm, matrix_exp

__all__ = [
    "default_rng",
    "random_group_point",
    "random_rotation",
    "random_tangent",
    "random_phase_state",
    "random_nilpotent",
    "random_linear_spec",
    "random_block_state",
]


def default_rng(seed=None) -> np.random.Generator:
    if seed is None:
        env = os.environ.get("SLNGEO_SEED")
        seed = int(env) if env not in (None, "") else None
    return np.random.default_rng(seed)


def random_group_point(rng: np.random.Generator, n: int, sigma: float = 0.3) -> GroupPoint:
    """exp(S) with S traceless, entries N(0, sigma^2)."""
    S = rng.normal(scale=sigma, size=(n, n))
    S -= np.trace(S) / n * np.eye(n)
    A = matrix_exp(S)
    return GroupPoint(A / np.linalg.det(A) ** (1.0 / n))


def random_rotation(rng: np.random.Generator, n: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_tangent(rng: np.random.Generator, A, speed: float = 1.0) -> np.ndarray:
    """Tangent vector at A with HS norm ``speed``."""
    mat = A.mat if isinstance(A, GroupPoint) else np.asarray(A, dtype=float)
    X = tangent_projection(mat, rng.normal(size=mat.shape))
    return X * (speed / hs_norm(X))


def random_phase_state(rng: np.random.Generator, n: int, speed: float = 0.1,
                       sigma: float = 0.3) -> PhaseState:
    A = random_group_point(rng, n, sigma)
    return PhaseState(A, random_tangent(rng, A, speed))


def random_nilpotent(rng: np.random.Generator, n: int, index: int | None = None) -> np.ndarray:
    """Strictly upper triangular, entries uniform in [-1, 1], conjugated by a rotation.

    With ``index`` = k the nonzero part is a k x k leading block whose
    superdiagonal stays away from zero, so the index is exactly k.
    """
    if index is None:
        N = np.triu(rng.uniform(-1.0, 1.0, size=(n, n)), 1)
    else:
        if not 1 <= index <= n:
            raise ValueError(f"index must be in [1, {n}]")
        # strictly upper triangular k x k block with a nonvanishing superdiagonal
        N = np.zeros((n, n))
        N[:index, :index] = np.triu(rng.uniform(-1.0, 1.0, size=(index, index)), 1)
        i = np.arange(index - 1)
        N[i, i + 1] = rng.choice([-1.0, 1.0], size=index - 1) * rng.uniform(0.5, 1.0, size=index - 1)
    Q = random_rotation(rng, n)
    return Q @ N @ Q.T


def random_linear_spec(rng: np.random.Generator, n: int, index: int | None = None):
    from .families import LinearGeodesicSpec

    return LinearGeodesicSpec(random_group_point(rng, n), random_nilpotent(rng, n, index))


def random_block_state(rng: np.random.Generator, m: int, odd: bool = False,
                       diagonal: bool = False, scale: float = 0.5) -> BlockState:
    """Random BlockState with det(beta) = 1 and the compatibility constraint."""
    if diagonal:
        b1 = b2 = w1 = w2 = np.zeros(m)
    else:
        b1, b2 = rng.normal(scale=scale, size=(2, m))
        w1, w2 = rng.normal(scale=scale, size=(2, m))
    b0 = np.hypot(b1, b2) + np.exp(rng.normal(scale=scale, size=m))
    w0 = rng.normal(scale=scale, size=m)
    z = rng.normal(scale=scale, size=m)
    b_inf = float(np.exp(rng.normal(scale=scale))) if odd else None
    w_inf = float(rng.normal(scale=scale)) if odd else None
    d = float(np.prod(b0**2 - b1**2 - b2**2)) * (b_inf if odd else 1.0)
    c = d ** (-1.0 / (2 * m + int(odd)))
    b0, b1, b2 = c * b0, c * b1, c * b2
    if odd:
        b_inf *= c
    compat = b0 @ w0 + b1 @ w1 + b2 @ w2 + (0.5 * b_inf * w_inf if odd else 0.0)
    alpha = compat / (b0 @ b0 + (0.5 * b_inf**2 if odd else 0.0))
    w0 = w0 - alpha * b0
    if odd:
        w_inf -= alpha * b_inf
    return BlockState(b0, b1, b2, w0, w1, w2, z, b_inf, w_inf)
