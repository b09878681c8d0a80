"""Wall-clock comparison of the compiled and pure-Python integration loops.

Usage::

    python benchmarks/bench_backends.py [--repeat 3] [--t-end 20] [--quick]

Each case integrates the same initial data with both backends, reports the
best of ``--repeat`` runs, the speedup and the largest relative difference
between the two trajectories.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from slngeo import available_backends
from slngeo.blockdiag import integrate_block, preset
from slngeo.integrate import IntegratorOptions, JacobiState, integrate_geodesic, integrate_jacobi, to_reduced
from slngeo.sampling import default_rng, random_phase_state, random_tangent


def cases(t_end: float, seed: int = 0):
    rng = default_rng(seed)
    for n in (2, 3, 6):
        st = random_phase_state(rng, n)
        yield f"phase n={n}", lambda o, st=st: integrate_geodesic(st, t_end, o)
    st = to_reduced(random_phase_state(rng, 4))
    yield "reduced n=4", lambda o: integrate_geodesic(st, t_end, o)
    ph = random_phase_state(rng, 3)
    js = JacobiState(ph, random_tangent(rng, ph.A), np.zeros((3, 3)), tolerance=1.0)
    yield "jacobi n=3", lambda o: integrate_jacobi(js, t_end, o)
    yield "block fig1", lambda o: integrate_block(preset("fig1"), (0.0, t_end), o)


def best_time(fn, opts, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(opts)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> list[dict]:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--t-end", type=float, default=20.0)
    p.add_argument("--quick", action="store_true", help="short run for smoke testing")
    args = p.parse_args(argv)
    if args.quick:
        args.repeat, args.t_end = 1, 1.0
    if "compiled" not in available_backends():
        print("compiled backend not built; nothing to compare")
        return []
    py, cc = IntegratorOptions(backend="python"), IntegratorOptions(backend="compiled")
    rows = []
    print(f"{'case':<14}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}{'max rel diff':>14}")
    for name, fn in cases(args.t_end):
        tp, a = best_time(fn, py, args.repeat)
        tc, b = best_time(fn, cc, args.repeat)
        diff = float(np.max(np.abs(a.states - b.states) / np.maximum(1.0, np.abs(a.states))))
        rows.append(dict(case=name, python=tp, compiled=tc, speedup=tp / tc, diff=diff))
        print(f"{name:<14}{tp:>12.4f}{tc:>14.4f}{tp / tc:>10.1f}{diff:>14.1e}")
    return rows


if __name__ == "__main__":
    main()
