import math
import warnings

import numpy as np
import pytest
import scipy.linalg

from slngeo.geometry import second_fundamental_form
from slngeo.integrate import (
    REPORT_FIELDS, IntegratorOptions, JacobiState, PhaseState, ReducedState, TruncationWarning,
    geodesic_rhs, integrate_geodesic, integrate_jacobi, invariant_report, jacobi_rhs,
    phase_rhs_flat, reduced_rhs, to_reduced,
)
from slngeo.linalg import I2, K2, Z2, hs_norm
from slngeo.sampling import random_group_point, random_nilpotent, random_phase_state, random_tangent

ZERO2 = np.zeros((2, 2))


def ambient_rhs(A, V):
    """A'' as a function on all invertible (A, V), written out independently."""
    Ai = np.linalg.inv(A)
    P = V @ Ai
    return np.trace(P @ P) / np.trace(Ai @ Ai.T) * Ai.T


class TestStates:
    def test_phase_rejects_non_tangent(self):
        with pytest.raises(ValueError, match="not tangent"):
            PhaseState(I2, I2)

    def test_phase_rejects_det(self):
        with pytest.raises(ValueError, match="det"):
            PhaseState(2 * I2, ZERO2)

    def test_reduced_invariants(self):
        with pytest.raises(ValueError, match="symmetric"):
            ReducedState(I2, Z2, ZERO2)
        with pytest.raises(ValueError, match="antisymmetric"):
            ReducedState(I2, ZERO2, I2)
        with pytest.raises(ValueError, match="positive definite"):
            ReducedState(-I2, ZERO2, ZERO2)
        with pytest.raises(ValueError, match="det"):
            ReducedState(2 * I2, ZERO2, ZERO2)
        with pytest.raises(ValueError, match="compatibility"):
            ReducedState(I2, I2, ZERO2)

    def test_jacobi_requires_tangent_field(self):
        with pytest.raises(ValueError, match="J is not tangent"):
            JacobiState(PhaseState(I2, Z2), I2, ZERO2)

    def test_vector_round_trip(self, rng):
        st = random_phase_state(rng, 3)
        back = PhaseState.from_vector(st.vector(), 3)
        np.testing.assert_array_equal(back.A.mat, st.A.mat)
        red = to_reduced(st)
        np.testing.assert_array_equal(ReducedState.from_vector(red.vector(), 3).omega, red.omega)

    def test_options_validation(self):
        with pytest.raises(ValueError):
            IntegratorOptions(rtol=0.0)
        with pytest.raises(ValueError):
            IntegratorOptions(dt_out=float("nan"))
        with pytest.raises(ValueError):
            IntegratorOptions(backend="gpu")


class TestRightHandSides:
    def test_linear(self):
        M = np.array([[0.0, 1.0], [0.0, 0.0]])
        np.testing.assert_allclose(geodesic_rhs(PhaseState(I2 + 2 * M, M)), ZERO2, atol=1e-15)

    def test_rotation_matches_exponential(self):
        np.testing.assert_allclose(geodesic_rhs(PhaseState(I2, Z2)), -I2)
        h = 1e-4
        fd = (scipy.linalg.expm(h * Z2) - 2 * I2 + scipy.linalg.expm(-h * Z2)) / h**2
        np.testing.assert_allclose(geodesic_rhs(PhaseState(I2, Z2)), fd, atol=1e-7)

    def test_stretch(self):
        np.testing.assert_allclose(geodesic_rhs(PhaseState(I2, K2)), I2)

    def test_parallel_to_normal(self, rng):
        st = random_phase_state(rng, 4, speed=1.0)
        acc = geodesic_rhs(st)
        N = st.A.inv.T
        np.testing.assert_allclose(acc, np.sum(acc * N) / np.sum(N * N) * N, atol=1e-13)
        np.testing.assert_allclose(acc, ambient_rhs(st.A.mat, st.Adot), rtol=1e-12)

    def test_to_reduced_examples(self):
        for t in (0.0, 0.7, 3.0):
            R = scipy.linalg.expm(t * Z2)
            red = to_reduced(PhaseState(R, Z2 @ R))
            np.testing.assert_allclose(red.beta, I2, atol=1e-14)
            np.testing.assert_allclose(red.omega, ZERO2, atol=1e-14)
            np.testing.assert_allclose(red.zeta, 2 * Z2, atol=1e-14)
        red = to_reduced(PhaseState(I2, K2))
        np.testing.assert_array_equal(red.omega, 2 * K2)
        red = to_reduced(PhaseState(np.eye(3), np.zeros((3, 3))))
        np.testing.assert_array_equal(red.beta, np.eye(3))

    def test_reduced_examples(self):
        db, dw = reduced_rhs(ReducedState(I2, ZERO2, 2 * Z2))
        np.testing.assert_allclose(db, ZERO2, atol=1e-15)
        np.testing.assert_allclose(dw, ZERO2, atol=1e-15)
        db, dw = reduced_rhs(ReducedState(np.diag([4.0, 0.25]), ZERO2, ZERO2))
        assert not db.any() and not dw.any()
        db, dw = reduced_rhs(ReducedState(I2, K2, ZERO2))
        np.testing.assert_allclose(db, -K2)
        np.testing.assert_allclose(dw, I2)

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_reduced_is_chain_rule_of_phase(self, rng, n):
        st = random_phase_state(rng, n, speed=1.0)
        A, V = st.A.mat, st.Adot
        Ai = st.A.inv
        W = ambient_rhs(A, V)
        beta_dot = -Ai @ V @ Ai @ Ai.T - Ai @ Ai.T @ V.T @ Ai.T
        omega_dot = 2 * V.T @ V + A.T @ W + W.T @ A
        db, dw = reduced_rhs(to_reduced(st))
        np.testing.assert_allclose(db, beta_dot, atol=1e-12)
        np.testing.assert_allclose(dw, omega_dot, atol=1e-12)
        np.testing.assert_allclose(dw, dw.T, atol=1e-14)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_jacobi_is_linearization(self, rng, n):
        st = random_phase_state(rng, n, speed=1.0)
        A, V = st.A.mat, st.Adot
        J = random_tangent(rng, A)
        Jd = rng.normal(size=(n, n))
        h = 1e-6
        fd = (ambient_rhs(A + h * J, V + h * Jd) - ambient_rhs(A - h * J, V - h * Jd)) / (2 * h)
        np.testing.assert_allclose(jacobi_rhs(JacobiState(st, J, Jd)), fd, atol=1e-7)

    def test_velocity_is_jacobi_field(self, rng):
        st = random_phase_state(rng, 3, speed=1.0)
        A, V = st.A.mat, st.Adot
        W = geodesic_rhs(st)
        h = 1e-5
        Wp = ambient_rhs(A + h * V + 0.5 * h * h * W, V + h * W)
        Wm = ambient_rhs(A - h * V + 0.5 * h * h * W, V - h * W)
        np.testing.assert_allclose(jacobi_rhs(JacobiState(st, V, W)), (Wp - Wm) / (2 * h), atol=1e-7)

    def test_perp_fields_are_straight(self, rng):
        from slngeo.families import perp_basis

        M = random_nilpotent(rng, 3, 2)
        pb = perp_basis(np.eye(3), M)
        st = PhaseState(np.eye(3) + 0.5 * M, M)
        out = jacobi_rhs(JacobiState(st, pb.basis[0], pb.basis[1]))
        np.testing.assert_allclose(out, np.zeros((3, 3)), atol=1e-13)

    def test_non_convex_witness(self):
        for n, lam in ((3, 0.1), (4, 0.05)):
            mu = lam ** (-(n - 2) / 2)
            beta = np.diag([mu, mu] + [lam] * (n - 2))
            zeta = np.zeros((n, n))
            zeta[0, 1], zeta[1, 0] = 1.0, -1.0
            _, dw = reduced_rhs(ReducedState(beta, np.zeros((n, n)), zeta))
            closed = mu - n * mu * mu / (2 * mu + (n - 2) * lam)
            assert np.trace(dw) == pytest.approx(closed, rel=1e-12)
            assert np.trace(dw) < 0


class TestReports:
    def test_rotation(self):
        rep = invariant_report(PhaseState(I2, Z2))
        assert rep.energy == pytest.approx(2.0)
        assert rep.total_energy == pytest.approx(4.0)
        assert rep.virial_residual <= 1e-12
        assert rep.sff == pytest.approx(-math.sqrt(2))
        red = to_reduced(PhaseState(I2, Z2))
        np.testing.assert_allclose(red.zeta, 2 * Z2)
        assert invariant_report(red).energy == pytest.approx(2.0)

    def test_static(self):
        rep = invariant_report(PhaseState(np.eye(3), np.zeros((3, 3))))
        assert rep.energy == 0.0
        assert all(getattr(rep, k) == 0.0 for k in ("det_drift", "zeta_drift", "angmom_drift"))

    def test_reduced_energy_matches_phase(self, rng):
        for n in (2, 3, 5):
            st = random_phase_state(rng, n, speed=1.3)
            a, b = invariant_report(st), invariant_report(to_reduced(st))
            assert b.energy == pytest.approx(a.energy, rel=1e-12)
            assert b.sff == pytest.approx(a.sff, rel=1e-10)
            assert b.trace_omega == pytest.approx(a.trace_omega, rel=1e-12)
            assert a.virial_residual < 1e-10 and b.virial_residual < 1e-10

    def test_kind_mismatch(self):
        st = PhaseState(I2, Z2)
        with pytest.raises(TypeError):
            invariant_report(st, to_reduced(st))

    def test_fields(self):
        assert set(invariant_report(PhaseState(I2, Z2)).as_dict()) == set(REPORT_FIELDS)


class TestIntegration:
    def test_rotation_constant_norm(self):
        # the rotation is a fixed point of the reduced flow, and |A|^2 = tr(beta^-1)
        tr = integrate_geodesic(to_reduced(PhaseState(I2, Z2)), 100.0)
        norms = np.sqrt(np.trace(np.linalg.inv(tr.matrices("beta")), axis1=1, axis2=2))
        assert np.max(np.abs(norms - math.sqrt(2))) < 1e-8

    def test_rotation_phase_form_short_window(self):
        tr = integrate_geodesic(PhaseState(I2, Z2), 20.0)
        norms = np.linalg.norm(tr.matrices("A"), axis=(1, 2))
        assert np.max(np.abs(norms - math.sqrt(2))) < 1e-8
        np.testing.assert_allclose(tr.matrices("A")[-1], scipy.linalg.expm(20.0 * Z2), atol=1e-8)

    def test_rotation_is_exponentially_unstable(self):
        # linearizing the reduced flow at (I, 0, 2 Z2) gives u'' + 2i u' - 2u = 0 for
        # u = beta_11 - 1 + i beta_12, with roots -i +- 1: perturbations grow like e^t
        st = PhaseState(I2, Z2 + 1e-10 * (K2 + 0.3 * np.array([[0.0, 1.0], [1.0, 0.0]])))
        tr = integrate_geodesic(to_reduced(st), 14.0)
        dev = np.linalg.norm(tr.matrices("beta") - I2, axis=(1, 2))
        sel = tr.times >= 4.0
        rate = np.polyfit(tr.times[sel], np.log(dev[sel]), 1)[0]
        assert rate == pytest.approx(1.0, abs=1e-3)

    def test_linear_line(self, rng):
        B, M = random_group_point(rng, 3).mat, random_nilpotent(rng, 3)
        tr = integrate_geodesic(PhaseState(B, B @ M), 5.0, IntegratorOptions(dt_out=0.5))
        for t, A in zip(tr.times, tr.matrices("A")):
            np.testing.assert_allclose(A, B @ (np.eye(3) + t * M), atol=1e-9)
        assert np.max(np.abs(tr.reports["sff"])) < 1e-12

    def test_norm_growth_bound(self, rng):
        st = random_phase_state(rng, 3, speed=1.0)
        tr = integrate_geodesic(st, 10.0)
        bound = hs_norm(st.A.mat) + tr.times * hs_norm(st.Adot)
        assert np.all(np.linalg.norm(tr.matrices("A"), axis=(1, 2)) <= bound + 1e-9)

    def test_symmetric_leaf(self, rng):
        S = rng.normal(size=(3, 3))
        S = 0.2 * (S + S.T)
        S -= np.trace(S) / 3 * np.eye(3)
        A = scipy.linalg.expm(S)
        V = rng.normal(size=(3, 3))
        V = V + V.T
        V -= np.trace(np.linalg.solve(A, V)) / np.trace(np.linalg.inv(A) @ np.linalg.inv(A).T) * np.linalg.inv(A).T
        st = PhaseState(A, 0.3 * V)
        tr = integrate_geodesic(st, 20.0)
        As = tr.matrices("A")
        assert np.max(np.abs(As - np.transpose(As, (0, 2, 1)))) <= 1e-8
        assert np.min(tr.reports["sff"]) > -1e-10

    def test_backward_run_is_ordered(self, rng):
        st = random_phase_state(rng, 2)
        tr = integrate_geodesic(st, -3.0, IntegratorOptions(dt_out=0.5))
        assert tr.times[0] == -3.0 and tr.times[-1] == 0.0
        np.testing.assert_allclose(tr.states[-1], st.vector(), atol=1e-15)
        tr.validate()

    def test_reduced_integration(self, rng):
        st = random_phase_state(rng, 3)
        tr = integrate_geodesic(to_reduced(st), 5.0)
        assert tr.kind == "reduced"
        assert np.max(tr.reports["zeta_drift"]) < 1e-10
        red = tr.state(len(tr) - 1)
        assert isinstance(red, ReducedState)

    def test_truncation_warning(self, rng):
        st = random_phase_state(rng, 2)
        with pytest.warns(TruncationWarning):
            tr = integrate_geodesic(st, 50.0, IntegratorOptions(max_steps=3))
        assert tr.truncated and "maximum" in tr.truncated
        assert tr.times[-1] < 50.0

    def test_samples_and_validate(self, rng):
        tr = integrate_geodesic(random_phase_state(rng, 2), 0.05)
        samples = tr.samples
        assert len(samples) == 6
        t, state, rep = samples[2]
        assert t == pytest.approx(0.02) and isinstance(state, PhaseState)
        tr.validate()
        with pytest.raises(KeyError):
            tr.matrices("beta")

    def test_immutable(self, rng):
        tr = integrate_geodesic(random_phase_state(rng, 2), 0.1)
        with pytest.raises(ValueError):
            tr.states[0, 0] = 1.0

    def test_certificate_consistency(self, rng):
        from slngeo.families import unbounded_certificate

        A = random_group_point(rng, 3).mat
        Ai = np.linalg.inv(A)
        S = rng.normal(size=(3, 3))
        S = S + S.T
        # A^T A1 = S symmetric: A1 = A^-T S, tangent iff tr(A^-1 A^-T S) = 0
        G = Ai @ Ai.T
        S -= np.sum(G * S) / np.sum(G * G) * G
        st = PhaseState(A, 0.3 * Ai.T @ S)
        assert unbounded_certificate(st)
        tr = integrate_geodesic(st, 20.0)
        assert np.min(tr.reports["sff"]) > -1e-10


class TestJacobiIntegration:
    def test_reports(self, rng):
        st = random_phase_state(rng, 3, speed=0.5)
        J = random_tangent(rng, st.A, 1.0)
        tr = integrate_jacobi(JacobiState(st, J, np.zeros((3, 3))), 1.0)
        assert {"J_norm", "Jdot_norm"} <= set(tr.reports)
        assert tr.reports["J_norm"][0] == pytest.approx(1.0)
        tr.validate()

    def test_variation_of_geodesics(self, rng):
        # J = d/ds of the geodesic family through (A + sJ0, V + sJ1), checked by finite differences
        st = random_phase_state(rng, 3, speed=0.5)
        A, V = st.A.mat, st.Adot
        J0 = random_tangent(rng, A, 1.0)
        J1 = rng.normal(size=(3, 3))
        from slngeo.integrate import jacobi_project_flat

        # the projection makes J1 consistent with a variation inside SL(n)
        y = jacobi_project_flat(JacobiState(st, J0, J1).vector(), 3)
        js = JacobiState.from_vector(y, 3)
        tr = integrate_jacobi(js, 2.0, IntegratorOptions(dt_out=1.0))

        def geo(eps):
            A0 = A + eps * js.J
            A0 = A0 / np.linalg.det(A0) ** (1 / 3)
            V0 = V + eps * js.Jdot
            Ai = np.linalg.inv(A0)
            V0 = V0 - np.trace(Ai @ V0) / np.trace(Ai @ Ai.T) * Ai.T
            return integrate_geodesic(PhaseState(A0, V0), 2.0, IntegratorOptions(dt_out=1.0)).matrices("A")

        h = 1e-5
        fd = (geo(h) - geo(-h)) / (2 * h)
        np.testing.assert_allclose(tr.matrices("J"), fd, atol=1e-5)
