import math

import numpy as np
import pytest
import scipy.linalg

from slngeo.geometry import (
    TangentVector, normal_derivative, pressure_coefficient, riemann, second_fundamental_form,
    sectional_curvature, sff_reduced, tangent_basis, taylor_sign, unit_normal,
)
from slngeo.integrate import PhaseState, ReducedState, to_reduced
from slngeo.linalg import I2, K2, Z2, GroupPoint, hs_inner, hs_norm
from slngeo.sampling import random_group_point, random_nilpotent, random_tangent


def A_lambda(lam, n=3):
    return np.diag([1 / lam, 1 / lam, lam**2] + [1.0] * (n - 3))


def proof_planes(n=3):
    X = np.zeros((n, n))
    X[0, 0], X[1, 1] = 1.0, -1.0
    Y = np.zeros((n, n))
    Y[0, 1], Y[1, 0] = 1.0, -1.0
    return X, Y


class TestNormal:
    def test_identity(self):
        np.testing.assert_allclose(unit_normal(I2), I2 / math.sqrt(2))

    def test_diagonal(self):
        np.testing.assert_allclose(unit_normal(np.diag([2, 0.5])), np.diag([0.5, 2]) / math.sqrt(4.25))

    def test_orthogonal_to_tangents(self, rng):
        A = random_group_point(rng, 4)
        N = unit_normal(A)
        assert hs_norm(N) == pytest.approx(1.0)
        for X in tangent_basis(A):
            assert abs(hs_inner(N, X)) < 1e-12

    def test_tangent_basis_orthonormal(self, rng):
        A = random_group_point(rng, 3)
        E = np.array([X.ravel() for X in tangent_basis(A)])
        np.testing.assert_allclose(E @ E.T, np.eye(8), atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_normal_derivative_finite_difference(self, rng, n):
        A = random_group_point(rng, n).mat
        X = random_tangent(rng, A)
        L = np.linalg.solve(A, X)  # curve A e^{sL} stays in SL(n)
        h = 1e-5
        fd = (unit_normal(A @ scipy.linalg.expm(h * L)) - unit_normal(A @ scipy.linalg.expm(-h * L))) / (2 * h)
        np.testing.assert_allclose(normal_derivative(A, X), fd, atol=1e-6)

    def test_tangent_vector_checks(self):
        with pytest.raises(ValueError, match="not tangent"):
            TangentVector(GroupPoint(I2), I2)
        v = TangentVector(GroupPoint(I2), Z2)
        with pytest.raises(ValueError, match="different point"):
            second_fundamental_form(np.diag([2, 0.5]), v, v)


class TestSecondFundamentalForm:
    def test_rotation(self):
        assert second_fundamental_form(I2, Z2, Z2) == pytest.approx(-math.sqrt(2))

    @pytest.mark.parametrize("lam", [1.0, 2.0, 10.0])
    def test_two_dimensional_basis(self, lam):
        A = np.diag([lam, 1 / lam])
        Xl = np.array([[0, 0], [1 / lam, 0]]) @ A
        Yl = np.array([[0, lam], [0, 0]]) @ A
        Zl = np.diag([1.0, -1.0]) / math.sqrt(lam**2 + lam**-2) @ A
        r = hs_norm(np.linalg.inv(A))
        # the trace form tr(A^-1 X A^-1 Y) gives 1 and 2/(lam^2 + lam^-2)
        assert second_fundamental_form(A, Xl, Yl) * r == pytest.approx(1.0)
        assert second_fundamental_form(A, Zl, Zl) * r == pytest.approx(2 / (lam**2 + lam**-2))
        assert second_fundamental_form(A, Xl, Xl) == pytest.approx(0.0, abs=1e-15)
        assert second_fundamental_form(A, Xl, Zl) == pytest.approx(0.0, abs=1e-15)

    def test_uniform_bound_in_two_dimensions(self, rng):
        for _ in range(200):
            A = random_group_point(rng, 2, sigma=1.0).mat
            basis = tangent_basis(A)
            for X in basis:
                for Y in basis:
                    assert abs(second_fundamental_form(A, X, Y)) <= 1.0 + 1e-12

    def test_linear_geodesic_velocity(self, rng):
        B = random_group_point(rng, 4).mat
        M = random_nilpotent(rng, 4)
        for t in (0.0, 1.0, 5.0):
            A = B @ (np.eye(4) + t * M)
            assert second_fundamental_form(A, B @ M, B @ M) == pytest.approx(0.0, abs=1e-12)

    def test_bound_and_symmetry(self, rng):
        for n in (2, 3, 5):
            A = random_group_point(rng, n).mat
            X, Y = random_tangent(rng, A), random_tangent(rng, A, 2.0)
            s = second_fundamental_form(A, X, Y)
            assert s == pytest.approx(second_fundamental_form(A, Y, X))
            assert abs(s) <= hs_norm(np.linalg.inv(A)) * hs_norm(X) * hs_norm(Y)

    @pytest.mark.parametrize("n", [2, 3])
    def test_signature(self, rng, n):
        A = random_group_point(rng, n).mat
        basis = tangent_basis(A)
        G = np.array([[second_fundamental_form(A, X, Y) for Y in basis] for X in basis])
        ev = np.linalg.eigvalsh(G)
        assert np.sum(ev > 1e-10) == n * (n + 1) // 2 - 1
        assert np.sum(ev < -1e-10) == n * (n - 1) // 2


class TestReducedForm:
    def test_rotation_state(self):
        st = ReducedState(I2, np.zeros((2, 2)), 2 * Z2)
        assert sff_reduced(st) == pytest.approx(-math.sqrt(2))

    def test_stretch_state(self):
        # tr(K2 K2) / (4 sqrt 2) = sqrt(2)/4
        st = ReducedState(I2, K2, np.zeros((2, 2)))
        assert sff_reduced(st) == pytest.approx(math.sqrt(2) / 4)

    def test_static(self):
        assert sff_reduced(ReducedState(np.eye(3), np.zeros((3, 3)), np.zeros((3, 3)))) == 0.0

    @pytest.mark.parametrize("n", [2, 3, 4, 6])
    def test_matches_phase(self, rng, n):
        for _ in range(5):
            A = random_group_point(rng, n)
            X = random_tangent(rng, A, 1.5)
            red = to_reduced(PhaseState(A, X))
            assert sff_reduced(red) == pytest.approx(second_fundamental_form(A, X, X), rel=1e-10, abs=1e-12)
            cross = np.trace(red.omega @ red.beta @ red.zeta @ red.beta)
            assert abs(cross) < 1e-10 * (1 + hs_norm(red.omega) * hs_norm(red.zeta) * hs_norm(red.beta) ** 2)


class TestCurvature:
    def test_example(self):
        assert riemann(I2, K2, Z2, K2, Z2) == pytest.approx(-2.0)
        assert riemann(I2, K2, K2, Z2, Z2) == 0.0

    def test_gauss_equation_oracle(self, rng):
        # <R(X,Y)Z, W> = II(Y,Z) <D_X N, W> - II(X,Z) <D_Y N, W>
        for n in (2, 3, 4):
            A = random_group_point(rng, n).mat
            X, Y, Z, W = (random_tangent(rng, A) for _ in range(4))
            ref = (second_fundamental_form(A, Y, Z) * hs_inner(normal_derivative(A, X), W)
                   - second_fundamental_form(A, X, Z) * hs_inner(normal_derivative(A, Y), W))
            assert riemann(A, X, Y, Z, W) == pytest.approx(ref, rel=1e-10, abs=1e-12)

    def test_symmetries(self, rng):
        A = random_group_point(rng, 3).mat
        X, Y, Z, W = (random_tangent(rng, A) for _ in range(4))
        r = riemann(A, X, Y, Z, W)
        assert riemann(A, X, X, Z, W) == pytest.approx(0.0, abs=1e-14)
        assert riemann(A, Y, X, Z, W) == pytest.approx(-r, abs=1e-10)
        assert riemann(A, X, Y, W, Z) == pytest.approx(-r, abs=1e-10)
        assert riemann(A, Z, W, X, Y) == pytest.approx(r, abs=1e-10)
        bianchi = riemann(A, X, Y, Z, W) + riemann(A, Y, Z, X, W) + riemann(A, Z, X, Y, W)
        assert abs(bianchi) < 1e-10

    @pytest.mark.parametrize("lam", [1.0, 2.0, 10.0, 1e3])
    def test_blow_up_planes(self, lam):
        for n in (3, 4):
            A = A_lambda(lam, n)
            X, Y = proof_planes(n)
            K = sectional_curvature(A, X @ A, Y @ A)
            closed = -(lam**4) / (2 * lam**2 + lam**-4 + n - 3)
            assert K == pytest.approx(closed, rel=1e-12)

    def test_identity_value(self):
        X, Y = proof_planes(3)
        assert sectional_curvature(np.eye(3), X, Y) == pytest.approx(-1 / 3)

    def test_respan_invariance_and_bound(self, rng):
        A = random_group_point(rng, 3).mat
        X, Y = random_tangent(rng, A), random_tangent(rng, A)
        K = sectional_curvature(A, X, Y)
        assert sectional_curvature(A, 2 * X + Y, X - 3 * Y) == pytest.approx(K, rel=1e-9)
        assert abs(K) <= hs_norm(np.linalg.inv(A)) ** 2

    def test_parallel_rejected(self):
        with pytest.raises(ValueError, match="parallel"):
            sectional_curvature(I2, Z2, 2 * Z2)

    def test_linear_geodesic_null_directions(self, rng):
        from slngeo.families import perp_basis

        B, M = random_group_point(rng, 3), random_nilpotent(rng, 3, 2)
        pb = perp_basis(B, M)
        A = B.mat
        J = pb.basis[0]
        assert abs(np.trace(np.linalg.solve(A, J))) < 1e-10
        assert riemann(A, B.mat @ M, J, B.mat @ M, J) == pytest.approx(0.0, abs=1e-12)


class TestLinearCurvatureDecay:
    def _form(self, A, V):
        basis = tangent_basis(A)
        return np.array([[riemann(A, J, V, V, K) for K in basis] for J in basis]), basis

    def test_rank_one_formula(self, rng):
        B, M = random_group_point(rng, 3).mat, random_nilpotent(rng, 3)
        t = 2.0
        A = B @ (np.eye(3) + t * M)
        V = B @ M
        dAinv = -np.linalg.solve(A, V) @ np.linalg.inv(A)
        J, K = random_tangent(rng, A), random_tangent(rng, A)
        ref = np.trace(dAinv @ J) * np.trace(dAinv @ K) / hs_norm(np.linalg.inv(A)) ** 2
        assert riemann(A, J, V, V, K) == pytest.approx(ref, rel=1e-10, abs=1e-14)

    def test_decay(self, rng):
        # (1 + t^2)^2 times the operator norm of R_A settles to a constant;
        # it is not monotone on [1, 10], so the constant is fitted late.
        for _ in range(3):
            B, M = random_group_point(rng, 3).mat, random_nilpotent(rng, 3)
            V = B @ M
            scaled = {}
            for t in (1.0, 10.0, 100.0, 1e3, 1e4):
                R, _ = self._form(B @ (np.eye(3) + t * M), V)
                scaled[t] = np.max(np.abs(np.linalg.eigvalsh(0.5 * (R + R.T)))) * (1 + t * t) ** 2
            assert all(np.isfinite(v) for v in scaled.values())
            C = 2 * scaled[100.0]
            assert scaled[1e3] <= C and scaled[1e4] <= C
            assert scaled[1e4] == pytest.approx(scaled[1e3], rel=0.05)


class TestPressure:
    def test_linear_geodesic(self):
        M = np.array([[0.0, 1.0], [0.0, 0.0]])
        assert pressure_coefficient(I2 + 3 * M, M) == pytest.approx(0.0, abs=1e-15)

    def test_rotation(self):
        assert pressure_coefficient(I2, Z2) == pytest.approx(0.5)
        assert taylor_sign(I2, Z2) == -1

    def test_stretch(self):
        # II(K2, K2) at I2 is sqrt(2), |A^-1| = sqrt(2)
        assert pressure_coefficient(I2, K2) == pytest.approx(-0.5)
        assert taylor_sign(I2, K2) == 1
