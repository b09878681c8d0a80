"""Command line entry point ``slngeo``.

Subcommands::

    slngeo run --config scenario.json [--out DIR]
    slngeo classify --kind line|exp --a A.json --b B.json
    slngeo figures --id 1|2|3 --out DIR [--t-span T0 T1]
    slngeo sweep --config sweep.json [--out DIR]

Exit codes: 0 success, 2 usage or malformed config, 3 a state violates its
invariants, 4 the integrator stopped early.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import blockdiag, families, integrate, output, sampling
from .integrate import IntegratorOptions, PhaseState, ReducedState, Trajectory, TruncationWarning
from .linalg import matrix_exp, nilpotency_index

log = logging.getLogger("slngeo")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_TRUNCATED = 0, 2, 3, 4

FAMILIES = ("custom_phase", "custom_reduced", "linear", "exponential", "blockdiag", "preset")


class ConfigError(Exception):
    """Malformed or incomplete configuration (exit 2)."""


class ValidationError(Exception):
    """Well-formed input that violates a state invariant (exit 3)."""


# ---------------------------------------------------------------------------
# config parsing


def _load_json(path) -> object:
    try:
        return json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None


def _matrix(cfg: dict, key: str, n: int | None = None) -> np.ndarray:
    if key not in cfg:
        raise ConfigError(f"missing matrix {key!r}")
    try:
        M = np.array(cfg[key], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{key!r} is not a numeric matrix") from None
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"{key!r} must be a square matrix, got shape {M.shape}")
    if n is not None and M.shape[0] != n:
        raise ConfigError(f"{key!r} is {M.shape[0]}x{M.shape[0]} but n = {n}")
    return M


def _validated(what: str, make):
    try:
        return make()
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        raise ValidationError(f"{what}: {e}") from None


def _options(cfg: dict) -> IntegratorOptions:
    icfg = cfg.get("integrator", {})
    if not isinstance(icfg, dict):
        raise ConfigError("'integrator' must be an object")
    unknown = set(icfg) - {"rel_tol", "abs_tol", "dt_out", "max_steps", "backend"}
    if unknown:
        raise ConfigError(f"unknown integrator keys {sorted(unknown)}")
    d = IntegratorOptions()
    try:
        return IntegratorOptions(
            rtol=float(icfg.get("rel_tol", d.rtol)), atol=float(icfg.get("abs_tol", d.atol)),
            dt_out=float(icfg.get("dt_out", d.dt_out)),
            max_steps=int(icfg.get("max_steps", d.max_steps)), backend=icfg.get("backend", d.backend),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"integrator: {e}") from None


def _t_span(cfg: dict, default=(0.0, 10.0)) -> tuple[float, float]:
    span = cfg.get("t_span", default)
    try:
        t0, t1 = (float(x) for x in span)
    except (TypeError, ValueError):
        raise ConfigError("'t_span' must be a pair of numbers") from None
    if not (math.isfinite(t0) and math.isfinite(t1)) or not t0 <= 0.0 <= t1 or t0 == t1:
        raise ConfigError(f"t_span {span} must be finite, nondegenerate and contain 0")
    return t0, t1


# ---------------------------------------------------------------------------
# running scenarios


def integrate_span(init, t_span, opts: IntegratorOptions) -> Trajectory:
    """integrate_geodesic over a window containing 0, merging the two halves."""
    t0, t1 = t_span
    parts = [integrate.integrate_geodesic(init, t, opts) for t in (t0, t1) if t != 0.0]
    if len(parts) == 1:
        return parts[0]
    back, fwd = parts
    times = np.concatenate([back.times[:-1], fwd.times])
    Y = np.concatenate([back.states[:-1], fwd.states])
    reports = integrate._reports(fwd.kind, times, Y, fwd.n, init.vector())
    truncated = "; ".join(t for t in (back.truncated, fwd.truncated) if t) or None
    meta = dict(fwd.meta, t_span=(t0, t1))
    return Trajectory(fwd.kind, fwd.n, times, Y, reports, truncated, meta)


def summarize(traj: Trajectory) -> dict:
    """Largest drifts over the trajectory, plus the final report."""
    r = traj.reports
    out = {"kind": traj.kind, "n": traj.n, "samples": len(traj),
           "t_first": float(traj.times[0]), "t_last": float(traj.times[-1]),
           "backend": traj.meta.get("backend"), "truncated": traj.truncated}
    E = r["energy"]
    i0 = int(np.argmin(np.abs(traj.times)))
    E0 = float(E[i0])
    out["energy"] = E0
    out["max_energy_drift"] = float(np.max(np.abs(E - E0)))
    out["max_rel_energy_drift"] = out["max_energy_drift"] / E0 if E0 > 0 else out["max_energy_drift"]
    if traj.kind != "block":
        for key in ("det_drift", "zeta_drift", "angmom_drift", "virial_residual"):
            out[f"max_{key}"] = float(np.max(r[key]))
        out["min_sff"] = float(np.min(r["sff"]))
        out["max_sff"] = float(np.max(r["sff"]))
        out["final"] = traj.report(len(traj) - 1).as_dict()
    return out


def _exp_deviation(traj: Trajectory, B: np.ndarray, C: np.ndarray) -> float:
    As = traj.matrices("A")
    dev = 0.0
    for t, A in zip(traj.times, As):
        ref = B @ matrix_exp(t * C)
        dev = max(dev, float(np.linalg.norm(A - ref)) / max(1.0, float(np.linalg.norm(ref))))
    return dev


def _block_state(bcfg) -> blockdiag.BlockState:
    if not isinstance(bcfg, dict):
        raise ConfigError("'block' must be an object")
    if "b0" not in bcfg or "z" not in bcfg or "w0" not in bcfg:
        raise ConfigError("'block' needs at least b0, w0 and z")
    m = len(bcfg["b0"])
    zeros = [0.0] * m
    try:
        vals = {k: np.array(bcfg.get(k, zeros), dtype=float)
                for k in ("b0", "b1", "b2", "w0", "w1", "w2", "z")}
    except (TypeError, ValueError):
        raise ConfigError("block coefficients must be numeric lists") from None
    extra = {k: bcfg[k] for k in ("b_inf", "w_inf") if k in bcfg}
    return _validated("block state", lambda: blockdiag.BlockState(**vals, **extra))


def run_scenario(cfg: dict) -> tuple[Trajectory, dict]:
    """Build the initial data named by ``cfg`` and integrate it."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    family = cfg.get("family")
    if family not in FAMILIES:
        raise ConfigError(f"'family' must be one of {', '.join(FAMILIES)}; got {family!r}")
    opts = _options(cfg)
    n = cfg.get("n")
    if n is not None and (not isinstance(n, int) or n < 2):
        raise ConfigError("'n' must be an integer >= 2")
    extra: dict = {"family": family}

    if family in ("blockdiag", "preset"):
        if family == "preset":
            name = cfg.get("preset")
            if name not in blockdiag.PRESETS:
                raise ConfigError(f"'preset' must be one of {sorted(blockdiag.PRESETS)}")
            state = blockdiag.preset(name)
            span = _t_span(cfg, blockdiag.PRESET_WINDOWS[name])
            extra["preset"] = name
        else:
            state = _block_state(cfg.get("block"))
            span = _t_span(cfg, (0.0, 100.0))
        if n is not None and n != state.n:
            raise ConfigError(f"n = {n} but the block state has dimension {state.n}")
        traj = blockdiag.integrate_block(state, span, opts)
        verdict = blockdiag.boundedness_verdict(state)
        extra["verdict"] = verdict.verdict
        extra["ceilings"] = [None if c is None else float(c) for c in verdict.ceilings]
        excess = verdict.violations(traj.states, state.m, np.array(state.z))
        extra["ceiling_violations"] = int(np.count_nonzero(excess > 1e-8))
        if cfg.get("detect_period", family == "preset"):
            per = blockdiag.detect_period(state, t_max=float(cfg.get("period_t_max", 100.0)), opts=opts)
            extra["period"] = None if per is None else per["period"]
            extra["return_residual"] = None if per is None else per["residual"]
        return traj, extra

    span = _t_span(cfg)
    if family == "custom_phase":
        A = _matrix(cfg, "A", n)
        init = _validated("phase state", lambda: PhaseState(A, _matrix(cfg, "Adot", A.shape[0])))
    elif family == "custom_reduced":
        b = _matrix(cfg, "beta", n)
        w, z = _matrix(cfg, "omega", b.shape[0]), _matrix(cfg, "zeta", b.shape[0])
        init = _validated("reduced state", lambda: ReducedState(b, w, z))
    elif family == "linear":
        B = _matrix(cfg, "B", n)
        spec = _validated("linear geodesic", lambda: families.LinearGeodesicSpec(B, _matrix(cfg, "M", B.shape[0])))
        init = spec.phase_state()
        extra["index"] = spec.index
    else:  # exponential
        if "rotational" in cfg:
            r = cfg["rotational"]
            if not isinstance(r, dict) or "lambdas" not in r or "kappa" not in r:
                raise ConfigError("'rotational' needs lambdas and kappa")
            conj = None
            if "U" in r or "V" in r:
                conj = (_matrix(r, "U"), _matrix(r, "V"))
            spec = _validated("rotational spec", lambda: families.RotationalSpec(
                r["lambdas"], float(r["kappa"]), r.get("signs"), conj, n))
            Bp, C = _validated("rotational spec", lambda: families.build_rotational(spec))
            B = Bp.mat
        else:
            B = _matrix(cfg, "B", n)
            C = _matrix(cfg, "C", B.shape[0])
        cls = _validated("exponential", lambda: families.classify_exponential(B, C))
        extra["classification"] = str(cls)
        init = _validated("phase state", lambda: PhaseState(B, B @ C))
    traj = integrate_span(init, span, opts)
    if family == "linear":
        As = traj.matrices("A")
        ref = np.einsum("ij,tjk->tik", spec.B.mat, np.eye(spec.n) + traj.times[:, None, None] * spec.M)
        extra["max_line_deviation"] = float(np.max(np.linalg.norm(As - ref, axis=(1, 2))))
    if family == "exponential" and cls.kind is not families.ExpKind.NotGeodesic:
        extra["max_exp_deviation"] = _exp_deviation(traj, B, C)
    if isinstance(init, PhaseState):
        cert = families.unbounded_certificate(init)
        extra["certificate"] = cert.kind.value
    return traj, extra


def _write_outputs(traj: Trajectory, summary: dict, cfg: dict, out_dir: Path) -> list[Path]:
    ocfg = cfg.get("output", {})
    if not isinstance(ocfg, dict):
        raise ConfigError("'output' must be an object")
    fmt = ocfg.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / ocfg.get("path", f"trajectory.{fmt}")
    writer = output.write_csv if fmt == "csv" else output.write_json
    files = [writer(traj, path)]
    spath = out_dir / "summary.json"
    spath.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    files.append(spath)
    return files


def _cmd_run(args) -> int:
    cfg = _load_json(args.config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        traj, extra = run_scenario(cfg)
    summary = {**summarize(traj), **extra}
    out_dir = Path(args.out) if args.out else Path(cfg.get("output", {}).get("dir", "."))
    for p in _write_outputs(traj, summary, cfg, out_dir):
        print(f"wrote {p}")
    for key in ("classification", "verdict", "period", "certificate"):
        if key in summary:
            print(f"{key}: {summary[key]}")
    print(f"max relative energy drift: {summary['max_rel_energy_drift']:.3e}")
    if traj.truncated:
        print(f"integration truncated: {traj.truncated}", file=sys.stderr)
        return EXIT_TRUNCATED
    return EXIT_OK


# ---------------------------------------------------------------------------
# classify


def _read_matrix_file(path) -> np.ndarray:
    doc = _load_json(path)
    if isinstance(doc, dict):
        if len(doc) != 1:
            raise ConfigError(f"{path}: expected a matrix or a single-key object")
        doc = next(iter(doc.values()))
    return _matrix({"m": doc}, "m")


def classify_text(kind: str, a: np.ndarray, b: np.ndarray) -> list[str]:
    """Verdict lines for the ``classify`` subcommand."""
    if a.shape != b.shape:
        raise ConfigError(f"dimension mismatch: {a.shape} vs {b.shape}")
    lines = []
    if kind == "line":
        if families.classify_line(a, b):
            lines.append(f"Linear geodesic, index {nilpotency_index(np.linalg.solve(a, b))}")
        else:
            lines.append("NotGeodesic")
        velocity = b
    else:
        cls = _validated("exponential", lambda: families.classify_exponential(a, b))
        lines.append(str(cls))
        velocity = a @ b
    try:
        cert = families.unbounded_certificate(PhaseState(a, velocity))
    except ValueError as e:
        lines.append(f"Certificate: n/a ({e})")
    else:
        matches = ", ".join(k.value for k in cert.matches) or "none"
        lines.append(f"Certificate: {cert.kind.value} (matches: {matches})")
    return lines


def _cmd_classify(args) -> int:
    a, b = _read_matrix_file(args.a), _read_matrix_file(args.b)
    for line in classify_text(args.kind, a, b):
        print(line)
    return EXIT_OK


# ---------------------------------------------------------------------------
# figures


def figure_data(fig_id: int, t_span=None, opts: IntegratorOptions | None = None):
    name = f"fig{fig_id}"
    state = blockdiag.preset(name)
    span = tuple(t_span) if t_span is not None else blockdiag.PRESET_WINDOWS[name]
    return state, blockdiag.integrate_block(state, span, opts or IntegratorOptions())


def _cmd_figures(args) -> int:
    try:
        span = None if args.t_span is None else _t_span({"t_span": args.t_span})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            state, traj = figure_data(args.id, span)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ax_path = out / f"fig{args.id}_axes.csv"
    keys = [f"axis_{i + 1}" for i in range(state.m)]
    with ax_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + keys)
        for i, t in enumerate(traj.times):
            w.writerow([repr(float(t))] + [repr(float(traj.reports[k][i])) for k in keys])
    tr_path = output.write_csv(traj, out / f"fig{args.id}_trajectory.csv")
    print(f"wrote {ax_path}")
    print(f"wrote {tr_path}")
    print(f"verdict: {blockdiag.boundedness_verdict(state).verdict}")
    if traj.truncated:
        print(f"integration truncated: {traj.truncated}", file=sys.stderr)
        return EXIT_TRUNCATED
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _sweep_scenarios(cfg: dict) -> list[dict]:
    scenarios = list(cfg.get("scenarios", []))
    rnd = cfg.get("random")
    if rnd is not None:
        if not isinstance(rnd, dict):
            raise ConfigError("'random' must be an object")
        seed = cfg.get("seed")
        rng = sampling.default_rng(seed)
        dims = rnd.get("n", [3])
        dims = [dims] if isinstance(dims, int) else list(dims)
        count = int(rnd.get("count", 10))
        speed = float(rnd.get("speed", 0.1))
        for n in dims:
            for _ in range(count):
                st = sampling.random_phase_state(rng, int(n), speed)
                scenarios.append({"family": "custom_phase", "n": int(n), "A": st.A.mat.tolist(),
                                  "Adot": st.Adot.tolist()})
    if not scenarios:
        raise ConfigError("sweep needs 'scenarios' or 'random'")
    shared = {k: cfg[k] for k in ("integrator", "t_span") if k in cfg}
    return [{**shared, **s} for s in scenarios]


SWEEP_COLUMNS = ("index", "family", "n", "status", "max_rel_energy_drift", "max_det_drift",
                 "max_zeta_drift", "max_angmom_drift", "max_virial_residual", "min_sff", "message")


def _sweep_one(cfg: dict) -> dict:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            traj, extra = run_scenario(cfg)
    except (ConfigError, ValidationError) as e:
        return {"status": "invalid", "family": cfg.get("family"), "message": str(e)}
    row = {**summarize(traj), **extra}
    row["status"] = "truncated" if traj.truncated else "ok"
    row["message"] = traj.truncated or ""
    return row


def _cmd_sweep(args) -> int:
    cfg = _load_json(args.config)
    if not isinstance(cfg, dict):
        raise ConfigError("sweep config must be a JSON object")
    scenarios = _sweep_scenarios(cfg)
    workers = int(cfg.get("workers", os.cpu_count() or 1))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(_sweep_one, scenarios))  # map keeps scenario order
    out = Path(args.out) if args.out else Path(cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep_summary.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for i, row in enumerate(rows):
            row = {**row, "index": i}
            w.writerow(["" if row.get(c) is None else (repr(row[c]) if isinstance(row[c], float) else row[c])
                        for c in SWEEP_COLUMNS])
    bad = [r for r in rows if r["status"] != "ok"]
    print(f"wrote {path} ({len(rows)} scenarios, {len(bad)} not ok)")
    if any(r["status"] == "truncated" for r in rows):
        return EXIT_TRUNCATED
    if bad:
        return EXIT_VALIDATION
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slngeo", description="Geodesic flow on SL(n) with the Hilbert-Schmidt metric.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate one scenario")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("classify", help="classify a line A + tB or an exponential A e^{tB}")
    c.add_argument("--kind", choices=("line", "exp"), required=True)
    c.add_argument("--a", required=True, help="JSON matrix file (A0 or B)")
    c.add_argument("--b", required=True, help="JSON matrix file (A1 or C)")
    c.set_defaults(func=_cmd_classify)

    f = sub.add_parser("figures", help="semi-axis CSVs for the preset block states")
    f.add_argument("--id", type=int, choices=(1, 2, 3), required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--t-span", type=float, nargs=2, metavar=("T0", "T1"))
    f.set_defaults(func=_cmd_figures)

    s = sub.add_parser("sweep", help="integrate an ensemble of scenarios in worker threads")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"slngeo: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        print(f"slngeo: validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
