"""Concrete prox functions, transforms, and the blur operator."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize, minimize_scalar

from prsplit.core import firm_nonexpansiveness_gap
from prsplit.errors import ShapeMismatch
from prsplit import pgm
from prsplit.proxlib import (
    BlurOperator,
    HaarTransform,
    HuberFn,
    LeastSquaresFn,
    OperatorLeastSquares,
    diagonal_quadratic,
    estimate_moduli,
    gaussian_kernel,
    gram_norm,
    gram_smallest_eigenvalue,
    haar_inverse,
    haar_transform,
    least_squares_prox,
)


class TestLeastSquares:
    def test_identity_matrix_halves_the_input(self, rng):
        fn = LeastSquaresFn(np.eye(3))
        x = rng.standard_normal(3)
        np.testing.assert_allclose(fn.prox(1.0, x), x / 2.0)

    def test_tight_diagonal_matches_componentwise_closed_form(self):
        rho, alpha = 0.7, 0.5
        A = np.diag([math.sqrt(rho), math.sqrt(1.0 / alpha)])
        fn = LeastSquaresFn(A)
        gamma = 1.3
        p = fn.prox(gamma, np.array([1.0, 1.0]))
        np.testing.assert_allclose(
            p, [1 / (1 + gamma * rho), 1 / (1 + gamma / alpha)], rtol=1e-14
        )

    def test_first_order_optimality_residual(self, rng):
        A = rng.standard_normal((5, 5))
        a = rng.standard_normal(5)
        fn = LeastSquaresFn(A, a)
        for gamma in (0.3, 1.0, 4.0):
            x = rng.standard_normal(5)
            p = least_squares_prox(fn, gamma, x)
            residual = gamma * A.T @ (A @ p - a) + (p - x)
            assert np.linalg.norm(residual) <= 1e-10 * (1 + np.linalg.norm(x))

    def test_normal_system_residual_invariant(self, rng):
        A = rng.standard_normal((7, 4))
        a = rng.standard_normal(7)
        fn = LeastSquaresFn(A, a)
        x = rng.standard_normal(4)
        gamma = 0.9
        p = fn.prox(gamma, x)
        lhs = p + gamma * (A.T @ (A @ p))
        rhs = x + gamma * A.T @ a
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)

    def test_agrees_with_gradient_descent_oracle(self, rng):
        A = rng.standard_normal((5, 5))
        a = rng.standard_normal(5)
        fn = LeastSquaresFn(A, a)
        gamma, x = 0.8, rng.standard_normal(5)
        # brute force: minimize gamma*||Ap-a||^2/2 + ||p-x||^2/2 by plain GD
        p = x.copy()
        lip = gamma * np.linalg.norm(A, 2) ** 2 + 1.0
        for _ in range(20000):
            p -= (gamma * A.T @ (A @ p - a) + (p - x)) / lip
        np.testing.assert_allclose(fn.prox(gamma, x), p, atol=1e-6)

    def test_factor_cache_reused(self, rng):
        fn = LeastSquaresFn(rng.standard_normal((4, 4)))
        fn.prox(1.0, rng.standard_normal(4))
        fn.prox(1.0, rng.standard_normal(4))
        fn.prox(2.0, rng.standard_normal(4))
        assert set(fn._factors) == {1.0, 2.0}


class TestEstimateModuli:
    def test_scaled_identity(self):
        assert estimate_moduli(2.0 * np.eye(3)) == (4.0, 0.25)

    def test_single_column(self):
        rho, alpha = estimate_moduli(np.array([[1.0], [0.0]]))
        assert (rho, alpha) == (1.0, 1.0)

    def test_wide_matrix_reports_no_strong_convexity(self, rng):
        rho, alpha = estimate_moduli(rng.random((3, 6)))
        assert rho == 0.0
        assert alpha > 0.0

    def test_product_bounded_by_one(self, rng):
        for _ in range(20):
            rho, alpha = estimate_moduli(rng.standard_normal((20, 20)))
            assert alpha * rho <= 1.0


class TestHuber:
    def test_zero_input(self):
        fn = HuberFn(0.5, 2.0)
        assert fn.value(np.zeros(4)) == 0.0
        np.testing.assert_allclose(fn.gradient(np.zeros(4)), 0.0)
        np.testing.assert_allclose(fn.prox(1.0, np.zeros(4)), 0.0)

    def test_piecewise_value_at_twice_epsilon(self):
        eps, lam = 0.2, 3.0
        fn = HuberFn(eps, lam)
        assert fn.value(np.array([2 * eps])) == pytest.approx(1.5 * lam * eps)

    def test_prox_scalar_cases_against_numeric_oracle(self):
        # gamma*lam = 1, eps = 0.5: quadratic branch at 0.3, linear branch at 2
        eps = 0.5
        fn = HuberFn(eps, 1.0)

        def oracle(xi):
            h = lambda p: (abs(p) - eps / 2 if abs(p) > eps else p * p / (2 * eps))
            res = minimize_scalar(lambda p: h(p) + 0.5 * (p - xi) ** 2, bounds=(-5, 5), method="bounded")
            return res.x

        assert oracle(0.3) == pytest.approx(0.1, abs=1e-6)
        assert oracle(2.0) == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(fn.prox(1.0, np.array([0.3, 2.0])), [0.1, 1.0], atol=1e-12)

    def test_prox_is_odd_and_nonexpansive_elementwise(self, rng):
        fn = HuberFn(0.3, 1.7)
        x = rng.standard_normal(100)
        np.testing.assert_allclose(fn.prox(0.9, -x), -fn.prox(0.9, x), atol=1e-14)
        y = rng.standard_normal(100)
        assert np.all(np.abs(fn.prox(0.9, x) - fn.prox(0.9, y)) <= np.abs(x - y) + 1e-14)

    def test_gradient_matches_finite_differences(self, rng):
        eps, lam = 0.4, 2.3
        fn = HuberFn(eps, lam)
        h = 1e-7
        checked = 0
        while checked < 100:
            x = rng.standard_normal(1) * 2.0
            if abs(abs(x[0]) - eps) < 1e-3:  # keep away from the kink magnitude
                continue
            fd = (fn.value(x + h) - fn.value(x - h)) / (2 * h)
            assert fn.gradient(x)[0] == pytest.approx(fd, abs=1e-6)
            checked += 1

    def test_gradient_lipschitz_bound(self, rng):
        eps, lam = 0.25, 1.5
        fn = HuberFn(eps, lam)
        for _ in range(100):
            x, y = rng.standard_normal(6), rng.standard_normal(6)
            num = np.linalg.norm(fn.gradient(x) - fn.gradient(y))
            assert num <= (lam / eps) * np.linalg.norm(x - y) + 1e-12

    def test_transform_composition_rule_against_brute_force(self, rng):
        eps, lam = 0.3, 0.9
        fn = HuberFn(eps, lam, HaarTransform(level=1))
        x = rng.standard_normal((8, 8))
        gamma = 0.7
        p = fn.prox(gamma, x)

        def objective(flat):
            y = flat.reshape(8, 8)
            return gamma * fn.value(y) + 0.5 * np.sum((y - x) ** 2)

        res = minimize(objective, x.ravel(), method="L-BFGS-B", tol=1e-14)
        np.testing.assert_allclose(p.ravel(), res.x, atol=1e-6)

    def test_firm_nonexpansiveness(self, rng):
        fn = HuberFn(0.2, 2.0, HaarTransform(level=2)).to_prox_function((8, 8))
        assert firm_nonexpansiveness_gap(fn, rng, pairs=100) <= 1e-10


class TestHaar:
    def test_constant_image_has_zero_details(self):
        c = haar_transform(np.full((8, 8), 3.0), level=2)
        # each 2-D analysis level doubles the constant; level 2 leaves a 2x2
        # approximation block and all detail coefficients vanish
        np.testing.assert_allclose(c[:2, :2], 12.0, atol=1e-12)
        c[:2, :2] = 0.0
        np.testing.assert_allclose(c, 0.0, atol=1e-12)

    def test_round_trip(self, rng):
        x = rng.standard_normal((16, 16))
        for level in (1, 2, 3):
            np.testing.assert_allclose(
                haar_inverse(haar_transform(x, level), level), x, atol=1e-12
            )

    def test_parseval(self, rng):
        for _ in range(10):
            x = rng.standard_normal((8, 8))
            c = haar_transform(x, level=3)
            assert np.linalg.norm(c) == pytest.approx(np.linalg.norm(x), abs=1e-12)

    def test_inverse_is_adjoint(self, rng):
        x, y = rng.standard_normal((8, 8)), rng.standard_normal((8, 8))
        lhs = float(np.vdot(haar_transform(x, 2), y))
        rhs = float(np.vdot(x, haar_inverse(y, 2)))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_shape_errors(self):
        with pytest.raises(ShapeMismatch):
            haar_transform(np.zeros((6, 6)), level=2)
        with pytest.raises(ShapeMismatch):
            haar_transform(np.zeros(16), level=1)


class TestBlur:
    def test_identity_kernel(self, rng):
        op = BlurOperator(np.array([[1.0]]))
        x = rng.standard_normal((6, 6))
        np.testing.assert_allclose(op.apply(x), x)

    def test_constant_image_unchanged(self):
        op = BlurOperator(gaussian_kernel(5, 0.8))
        x = np.full((12, 12), 0.4)
        np.testing.assert_allclose(op.apply(x), x, atol=1e-14)

    def test_adjoint_inner_products(self, rng):
        op = BlurOperator(gaussian_kernel(5, 0.6))
        for _ in range(5):
            x, y = rng.standard_normal((16, 16)), rng.standard_normal((16, 16))
            assert float(np.vdot(op.apply(x), y)) == pytest.approx(
                float(np.vdot(x, op.adjoint(y))), abs=1e-10
            )

    def test_norm_at_most_one(self):
        op = BlurOperator(gaussian_kernel(5, 0.5))
        norm_sq = gram_norm(op, (16, 16))
        assert norm_sq <= 1.0 + 1e-12
        assert norm_sq == pytest.approx(1.0, abs=1e-10)

    def test_smallest_gram_eigenvalue_matches_dense_eigensolve(self):
        # desk-size oracle: materialize T column by column
        op = BlurOperator(gaussian_kernel(3, 0.4))
        shape = (8, 8)
        n = 64
        T = np.zeros((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            T[:, j] = op.apply(e.reshape(shape)).ravel()
        w = np.linalg.eigvalsh(T.T @ T)
        est = gram_smallest_eigenvalue(op, shape)
        assert est == pytest.approx(w[0], rel=1e-6)
        assert gram_norm(op, shape) == pytest.approx(w[-1], rel=1e-9)

    def test_kernel_validation(self):
        with pytest.raises(ValueError):
            BlurOperator(np.array([[0.5, 0.4], [0.05, 0.04]]))  # not square-normalized
        with pytest.raises(ShapeMismatch):
            BlurOperator(np.ones((2, 3)) / 6.0)


class TestOperatorLeastSquares:
    def test_prox_matches_dense_solve(self, rng):
        op = BlurOperator(gaussian_kernel(3, 0.5))
        shape = (8, 8)
        data = rng.standard_normal(shape)
        fn = OperatorLeastSquares(op, data)
        x = rng.standard_normal(shape)
        gamma = 2.0
        p = fn.prox(gamma, x)
        residual = p + gamma * op.adjoint(op.apply(p)) - (x + gamma * op.adjoint(data))
        assert np.linalg.norm(residual) <= 1e-10 * np.linalg.norm(x)

    def test_gradient_and_value(self, rng):
        op = BlurOperator(gaussian_kernel(3, 0.5))
        data = rng.standard_normal((8, 8))
        fn = OperatorLeastSquares(op, data)
        x = rng.standard_normal((8, 8))
        h = 1e-6
        d = rng.standard_normal((8, 8))
        fd = (fn.value(x + h * d) - fn.value(x - h * d)) / (2 * h)
        assert float(np.vdot(fn.gradient(x), d)) == pytest.approx(fd, rel=1e-5)

    def test_firm_nonexpansiveness(self, rng):
        op = BlurOperator(gaussian_kernel(3, 0.5))
        fn = OperatorLeastSquares(op, rng.standard_normal((8, 8)))
        pf = fn.to_prox_function((0.1, 1.0))
        assert firm_nonexpansiveness_gap(pf, rng, pairs=100, scale=1.0) <= 1e-10


class TestSmallHelpers:
    def test_diagonal_quadratic_regularity(self):
        fn = diagonal_quadratic(np.array([0.5, 2.0]))
        assert fn.regularity == (0.5, 0.5)

    def test_pgm_round_trip(self, rng, tmp_path):
        img = rng.random((9, 7))
        path = tmp_path / "x.pgm"
        pgm.write_pgm(path, img, maxval=65535)
        back = pgm.read_pgm(path)
        np.testing.assert_allclose(back, img, atol=1.0 / 65535)

    def test_pgm_ascii_reader(self, tmp_path):
        path = tmp_path / "a.pgm"
        path.write_text("P2\n# comment\n3 2\n255\n0 128 255\n64 32 16\n")
        img = pgm.read_pgm(path)
        assert img.shape == (2, 3)
        assert img[0, 1] == pytest.approx(128 / 255)
