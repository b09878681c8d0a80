"""Pure-Python Dormand-Prince 5(4) stepper with projection and dense output.

This is the reference loop; ``_core.pyx`` runs the same algorithm in C for the
built-in systems. Both emit samples on a fixed output grid.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

__all__ = ["C", "A", "B", "E", "P", "output_grid", "dopri5", "STATUS_MESSAGES"]

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# fifth-order weights minus the embedded fourth-order weights
E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Shampine's continuous extension: y(t + th*h) = y + h * K^T P [th, th^2, th^3, th^4]
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0

STATUS_MESSAGES = {
    0: "ok",
    1: "step size underflow",
    2: "maximum number of steps exceeded",
    3: "state left the admissible set (singular or non-finite)",
}


def output_grid(t0: float, t_end: float, dt_out: float) -> np.ndarray:
    """Sample times t0, t0 +- dt_out, ... ending exactly at t_end."""
    span = t_end - t0
    if span == 0.0:
        return np.array([t0])
    sign = 1.0 if span > 0 else -1.0
    count = int(math.floor(abs(span) / dt_out * (1 + 1e-12) + 1e-9))
    ts = t0 + sign * dt_out * np.arange(count + 1)
    if abs(ts[-1] - t_end) > 1e-9 * dt_out:
        ts = np.append(ts, t_end)
    else:
        ts[-1] = t_end
    return ts


def _rms(x: np.ndarray) -> float:
    return float(math.sqrt(np.mean(x * x)))


def _initial_step(f, t0, y0, f0, direction, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = f(t0 + direction * h0, y0 + direction * h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def dopri5(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t0: float,
    t_end: float,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    dt_out: float = 0.01,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    max_steps: int = 10_000_000,
    h_min: float = 1e-14,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Integrate ``y' = f(t, y)`` from t0 to t_end (either direction).

    Returns ``(times, states, status)``. A nonzero status means the run was
    cut short; the arrays then hold the samples produced before the failure.
    """
    y = np.array(y0, dtype=float)
    if project is not None:
        y = project(y)
    grid = output_grid(float(t0), float(t_end), dt_out)
    out = np.empty((grid.size, y.size))
    out[0] = y
    n_out = 1
    if grid.size == 1:
        return grid, out, 0

    direction = 1.0 if t_end > t0 else -1.0
    span = abs(t_end - t0)
    t = float(t0)
    K = np.empty((7, y.size))
    try:
        K[0] = f(t, y)
        h = _initial_step(f, t, y, K[0], direction, rtol, atol, span)
    except (ArithmeticError, np.linalg.LinAlgError):
        return grid[:1].copy(), out[:1].copy(), 3
    steps = 0
    status = 0

    while n_out < grid.size:
        if steps >= max_steps:
            status = 2
            break
        remaining = abs(t_end - t)
        if h >= remaining:
            h = remaining
        hs = direction * h
        try:
            for i in range(1, 7):
                K[i] = f(t + C[i] * hs, y + hs * (A[i, :i] @ K[:i]))
        except (ArithmeticError, np.linalg.LinAlgError):
            K[1:] = np.nan
        y_new = y + hs * (B @ K)
        err = hs * (E @ K)
        steps += 1
        if not np.all(np.isfinite(y_new)):
            err_norm = math.inf
        else:
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.max(np.abs(err) / scale))
        if err_norm <= 1.0:
            t_new = t + hs if h < remaining else float(t_end)
            Q = K.T @ P
            try:
                y_proj = project(y_new) if project is not None else y_new
                while n_out < grid.size and direction * (grid[n_out] - t_new) <= 0.0:
                    tau = grid[n_out]
                    if tau == t_new:
                        sample = y_proj
                    else:
                        th = (tau - t) / hs
                        sample = y + hs * (Q @ np.array([th, th * th, th**3, th**4]))
                        if project is not None:
                            sample = project(sample)
                    out[n_out] = sample
                    n_out += 1
            except (ValueError, ArithmeticError, np.linalg.LinAlgError):
                status = 3
                break
            t = t_new
            y = y_proj
            if n_out >= grid.size:
                break
            factor = MAX_FACTOR if err_norm == 0.0 else min(MAX_FACTOR, SAFETY * err_norm ** -0.2)
            h *= factor
            try:
                K[0] = f(t, y)
            except (ArithmeticError, np.linalg.LinAlgError):
                status = 3
                break
        else:
            factor = MIN_FACTOR if not math.isfinite(err_norm) else max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
            h *= factor
            if h < h_min * max(1.0, abs(t)):
                status = 1
                break
    return grid[:n_out].copy(), out[:n_out].copy(), status
