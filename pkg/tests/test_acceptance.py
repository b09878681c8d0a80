"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the collected lines are
repeated in the terminal summary.
"""

import math
import warnings

import numpy as np
import pytest

from slngeo.blockdiag import (
    block_rhs, boundedness_verdict, detect_period, embed, extract_derivative, instability_demo,
    integrate_block, preset, swirl_system,
)
from slngeo.families import RotationalSpec, build_rotational, jacobi_closed_form, perp_basis
from slngeo.geometry import sectional_curvature
from slngeo.integrate import (
    IntegratorOptions, JacobiState, PhaseState, ReducedState, integrate_geodesic, integrate_jacobi,
    jacobi_project_flat, reduced_rhs, to_reduced,
)
from slngeo.linalg import I2, Z2, hs_norm
from slngeo.sampling import (
    default_rng, random_block_state, random_linear_spec, random_phase_state, random_tangent,
)

from conftest import SEED

DIMS = (2, 3, 4, 6)


@pytest.fixture(scope="module")
def conservation_runs():
    """50 random phase states per n over [0, 100] at default tolerances."""
    rng = default_rng(SEED)
    runs = {}
    for n in DIMS:
        runs[n] = [integrate_geodesic(random_phase_state(rng, n), 100.0) for _ in range(50)]
    return runs


def test_c01_conservation(conservation_runs, verdict):
    worst = dict(energy=0.0, zeta=0.0, angmom=0.0, det=0.0)
    complete = True
    for n in DIMS:
        for tr in conservation_runs[n]:
            complete &= tr.truncated is None and tr.times[-1] == 100.0
            E = tr.reports["energy"]
            worst["energy"] = max(worst["energy"], float(np.max(np.abs(E - E[0])) / E[0]))
            worst["zeta"] = max(worst["zeta"], float(np.max(tr.reports["zeta_drift"])))
            worst["angmom"] = max(worst["angmom"], float(np.max(tr.reports["angmom_drift"])))
            worst["det"] = max(worst["det"], float(np.max(tr.reports["det_drift"])))
    ok = complete and worst["energy"] < 1e-8 and worst["zeta"] < 1e-8 and worst["angmom"] < 1e-8 \
        and worst["det"] < 1e-10
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    assert verdict(1, "conservation suite", ok, detail)


def test_c02_formulation_equivalence(verdict):
    rng = default_rng(SEED + 2)
    worst = 0.0
    for k in range(50):
        n = DIMS[k % 4]
        st = random_phase_state(rng, n)
        ph = integrate_geodesic(st, 10.0)
        rd = integrate_geodesic(to_reduced(st), 10.0)
        A, V = ph.matrices("A"), ph.matrices("Adot")
        Ai = np.linalg.inv(A)
        beta = Ai @ np.transpose(Ai, (0, 2, 1))
        X = np.transpose(A, (0, 2, 1)) @ V
        omega = X + np.transpose(X, (0, 2, 1))
        worst = max(worst, float(np.max(np.abs(beta - rd.matrices("beta")))),
                    float(np.max(np.abs(omega - rd.matrices("omega")))))
    assert verdict(2, "phase vs reduced formulation", worst < 1e-7, f"max |diff| {worst:.2e}")


def test_c03_rotational_norm(verdict):
    # the reduced form: |A|^2 = tr(beta^-1); see the ledger for why the
    # phase form cannot hold 1e-8 on [0, 100] for these data
    cases = [(np.eye(2), Z2)]
    for lams, kappa, signs in [((1.0, 1.0), -1.0, (1, 1)), ((2.0, 0.5), -1.0, (1, 1)),
                               ((1.5, 1 / 1.5), -0.3, (1, -1))]:
        B, C = build_rotational(RotationalSpec(lams, kappa, signs))
        cases.append((B.mat, C))
    worst = 0.0
    for B, C in cases:
        tr = integrate_geodesic(to_reduced(PhaseState(B, B @ C)), 100.0)
        assert tr.truncated is None
        norms = np.sqrt(np.trace(np.linalg.inv(tr.matrices("beta")), axis1=1, axis2=2))
        worst = max(worst, float(np.max(np.abs(norms - hs_norm(B)))))
    assert verdict(3, "rotational norm constancy", worst < 1e-8, f"max deviation {worst:.2e}")


def test_c04_linear_exactness(verdict):
    rng = default_rng(SEED + 4)
    dev = sff = 0.0
    for k in range(20):
        spec = random_linear_spec(rng, (2, 3, 4)[k % 3])
        tr = integrate_geodesic(spec.phase_state(), 10.0)
        dev = max(dev, hs_norm(tr.matrices("A")[-1] - spec.at(10.0)))
        sff = max(sff, float(np.max(np.abs(tr.reports["sff"]))))
    ok = dev < 1e-9 and sff <= 1e-12
    assert verdict(4, "linear geodesic exactness", ok, f"|A(10) - B(I+10M)| {dev:.2e}, max |sff| {sff:.2e}")


def test_c05_curvature_limit(verdict):
    lam = 1e3
    A = np.diag([1 / lam, 1 / lam, lam**2])
    X = np.diag([1.0, -1.0, 0.0])
    Y = np.zeros((3, 3))
    Y[0, 1], Y[1, 0] = 1.0, -1.0
    K = sectional_curvature(A, X @ A, Y @ A)
    ratio = K / hs_norm(np.linalg.inv(A)) ** 2
    closed = -(lam**4) / (2 * lam**2 + lam**-4)
    rel = abs(K - closed) / abs(closed)
    ok = abs(ratio + 0.25) < 1e-3 and rel <= 1e-12
    assert verdict(5, "curvature limit", ok, f"K/|A^-1|^2 = {ratio:.6f}, closed form rel err {rel:.1e}")


def test_c06_jacobi_closed_form(verdict):
    worst = 0.0
    for n in (2, 3):
        for norm in (1.0, 2.0):
            M = np.zeros((n, n))
            M[0, n - 1] = norm
            pb = perp_basis(np.eye(n), M)
            f = jacobi_closed_form(M, 0.3, -0.8, pb.basis[0], pb.basis[-1])
            init = JacobiState(PhaseState(np.eye(n), M), f(0.0), f.derivative(0.0))
            tr = integrate_jacobi(init, 10.0)
            J = tr.matrices("J")
            worst = max(worst, max(hs_norm(J[i] - f(t)) for i, t in enumerate(tr.times)))
    assert verdict(6, "Jacobi closed form", worst < 1e-6, f"max HS error {worst:.2e}")


def test_c07_jacobi_growth(verdict):
    # n in {2, 3}: see the ledger on conditioning of index-4 lines at t = 1e3
    rng = default_rng(SEED + 7)
    worst = 0.0
    complete = True
    for k in range(10):
        n = (2, 3)[k % 2]
        spec = random_linear_spec(rng, n)
        st = spec.phase_state()
        J0 = random_tangent(rng, st.A)
        raw = JacobiState(st, J0, rng.normal(size=(n, n)), tolerance=1.0)
        init = JacobiState.from_vector(jacobi_project_flat(raw.vector(), n), n)
        tr = integrate_jacobi(init, 1000.0, IntegratorOptions(dt_out=0.1))
        complete &= tr.truncated is None
        t = tr.times
        J = np.linalg.norm(tr.matrices("J"), axis=(1, 2))
        Jd = np.linalg.norm(tr.matrices("Jdot"), axis=(1, 2))
        i1 = int(np.argmin(np.abs(t - 1.0)))
        late = t >= 1.0
        worst = max(worst, float(np.max(Jd[late]) / Jd[i1]), float(np.max(J[late] / t[late]) / J[i1]))
    ok = complete and worst <= 10.0
    assert verdict(7, "Jacobi growth", ok, f"max ratio to t=1 value {worst:.3f}")


def test_c08_virial(conservation_runs, verdict):
    worst = max(float(np.max(tr.reports["virial_residual"])) for n in DIMS for tr in conservation_runs[n])
    assert verdict(8, "virial residual", worst < 1e-6, f"max residual {worst:.2e}")


def test_c09_fig1(verdict):
    state = preset("fig1")
    per = detect_period(state)
    tr = integrate_block(state, (-20.0, 20.0))
    axes_gap = float(np.max(np.abs(tr.reports["axis_1"] - tr.reports["axis_2"])))
    excess = float(np.max(boundedness_verdict(state).violations(tr.states, state.m, state.z)))
    ok = per is not None and per["residual"] < 1e-4 and axes_gap <= 1e-9 and excess <= 1e-8
    detail = (f"period {per['period']:.6f}, residual {per['residual']:.1e}, "
              f"axis gap {axes_gap:.1e}, max excess {excess:.2e}") if per else "no period found"
    assert verdict(9, "fig1 preset", ok, detail)


def monotone_onset(t: np.ndarray, a: np.ndarray) -> float:
    """Smallest |t| beyond which a strictly decreases in |t| (samples ordered by |t|)."""
    rises = np.nonzero(np.diff(a) >= 0)[0]
    return float(abs(t[rises[-1] + 1])) if rises.size else 0.0


def test_c10_fig3(verdict):
    state = preset("fig3")
    tr = integrate_block(state, (-40.0, 40.0))
    t, a = tr.times, tr.reports["axis_1"]
    pos, neg = t >= 0, t <= 0
    T_pos = monotone_onset(t[pos], a[pos])
    T_neg = monotone_onset(t[neg][::-1], a[neg][::-1])
    T = max(T_pos, T_neg)
    rep = boundedness_verdict(state)
    excess = rep.violations(tr.states, state.m, state.z)
    ok = T < 20.0 and bool(np.all(excess[1:] <= 1e-8))
    detail = f"T = {T:.2f} (t > 0: {T_pos:.2f}, t < 0: {T_neg:.2f}), axes 2-3 max excess {np.max(excess[1:]):.2e}"
    assert verdict(10, "fig3 preset", ok, detail)


def test_c11_swirl_asymptotics(verdict):
    out = swirl_system(3, 1, 1.0).asymptotics(0.0, 0.0, t_end=1000.0)
    ok = out["rel_error"] < 0.01
    detail = f"slope {out['slope']:.6f} vs {out['predicted']:.6f}, rel err {out['rel_error']:.1e}"
    assert verdict(11, "swirl asymptotics", ok, detail)


def test_c12_block_oracle(verdict):
    rng = default_rng(SEED + 12)
    worst = 0.0
    for k in range(500):
        m = 1 + k % 3
        s = random_block_state(rng, m, odd=bool((k // 3) % 2))
        db, dw = reduced_rhs(embed(s))
        ref = extract_derivative(db, dw, m).vector()
        worst = max(worst, float(np.max(np.abs(block_rhs(s).vector() - ref))))
    assert verdict(12, "block rhs oracle", worst < 1e-12, f"max componentwise diff {worst:.2e}")


def test_c13_two_dimensional_convexity(conservation_runs, verdict):
    low = math.inf
    for tr in conservation_runs[2]:
        d = np.gradient(tr.reports["trace_omega"], tr.times, edge_order=2)
        low = min(low, float(np.min(d)))
    n, lam = 3, 0.1
    mu = lam ** (-(n - 2) / 2)
    zeta = np.zeros((3, 3))
    zeta[0, 1], zeta[1, 0] = 1.0, -1.0
    _, dw = reduced_rhs(ReducedState(np.diag([mu, mu, lam]), np.zeros((3, 3)), zeta))
    witness = float(np.trace(dw))
    ok = low >= -1e-8 and witness < 0
    assert verdict(13, "2D convexity", ok, f"min d(tr w)/dt {low:.2e}, n=3 witness tr w' = {witness:.4f}")


def test_c14_instability(verdict):
    rep = instability_demo(4, 1, 1e-3)
    ok = rep.norm_growth > 10 and rep.verdict.verdict == "Bounded" and rep.within_ceilings
    detail = f"unperturbed growth {rep.norm_growth:.1f}x, perturbed verdict {rep.verdict.verdict}, " \
             f"max b0 {max(rep.max_b0):.3g} vs min ceiling {min(rep.verdict.ceilings):.3g}"
    assert verdict(14, "instability demo", ok, detail)
