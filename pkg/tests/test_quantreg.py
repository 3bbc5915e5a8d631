import numpy as np
import pytest

from cqfm.exceptions import ConvergenceError, RankDeficientError
from cqfm.quantreg import (
    check_loss,
    fit_least_squares_panel,
    fit_quantile,
    fit_quantile_panel,
    kkt_residual,
)
from oracles import brute_force_quantile, random_problem


class TestCheckLoss:
    def test_branches(self):
        assert check_loss(1.0, 0.25) == 0.25
        assert check_loss(-1.0, 0.25) == 0.75
        for tau in (0.01, 0.5, 0.99):
            assert check_loss(0.0, tau) == 0.0

    def test_vectorized(self):
        np.testing.assert_allclose(check_loss(np.array([-2.0, 0.0, 3.0]), 0.9), [0.2, 0.0, 2.7])

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.2])
    def test_tau_range(self, tau):
        with pytest.raises(ValueError):
            check_loss(1.0, tau)


class TestFitQuantile:
    def test_sample_median(self):
        res = fit_quantile(np.ones((5, 1)), np.array([1.0, 2.0, 3.0, 4.0, 5.0]), 0.5)
        np.testing.assert_allclose(res.a_hat, [3.0])
        assert res.objective == pytest.approx(3.0)

    @pytest.mark.parametrize("tau", [0.1, 0.5, 0.9])
    def test_interpolating_data(self, tau):
        rng = np.random.default_rng(0)
        Z = np.column_stack([np.ones(25), rng.normal(size=(25, 2))])
        a0 = np.array([0.5, -2.0, 1.25])
        res = fit_quantile(Z, Z @ a0, tau)
        np.testing.assert_allclose(res.a_hat, a0, atol=1e-10)
        assert res.objective == pytest.approx(0.0, abs=1e-10)

    def test_against_brute_force(self):
        rng = np.random.default_rng(20240601)
        worst = 0.0
        for i in range(50):
            n = int(rng.integers(6, 31))
            p = int(rng.integers(1, 4))
            tau = (0.1, 0.5, 0.9)[i % 3]
            Z, y = random_problem(rng, n, p)
            res = fit_quantile(Z, y, tau)
            best = brute_force_quantile(Z, y, tau)
            worst = max(worst, abs(res.objective - best) / (1.0 + abs(best)))
            assert res.kkt_residual <= 1e-8
        assert worst <= 1e-8

    def test_kkt_certificate_on_larger_problem(self):
        rng = np.random.default_rng(7)
        Z, y = random_problem(rng, 400, 6)
        for tau in (0.05, 0.5, 0.95):
            res = fit_quantile(Z, y, tau)
            assert res.kkt_residual <= 1e-8
            assert kkt_residual(Z, y, res.a_hat, tau) <= 1e-8

    def test_descent_history_is_monotone(self):
        rng = np.random.default_rng(8)
        Z, y = random_problem(rng, 120, 4)
        res = fit_quantile(Z, y, 0.3, start="least_squares")
        h = np.array(res.history)
        assert h.size > 1
        assert np.all(np.diff(h) <= 1e-12 * (1.0 + h[0]))
        ref = fit_quantile(Z, y, 0.3)
        assert res.objective == pytest.approx(ref.objective, rel=1e-10)

    def test_sign_balance(self):
        rng = np.random.default_rng(9)
        Z, y = random_problem(rng, 300, 4)
        for tau in (0.1, 0.5, 0.8):
            res = fit_quantile(Z, y, tau)
            r = y - Z @ res.a_hat
            zero = np.abs(r) < 1e-9
            n, p = Z.shape
            assert np.sum((r < 0) & ~zero) <= n * tau + p
            assert np.sum((r > 0) & ~zero) <= n * (1 - tau) + p

    def test_equivariance(self):
        rng = np.random.default_rng(10)
        Z, y = random_problem(rng, 200, 3)
        c = np.array([1.0, -0.5, 2.0])
        base = fit_quantile(Z, y, 0.7)
        shifted = fit_quantile(Z, y + Z @ c, 0.7)
        scaled = fit_quantile(Z, 3.0 * y, 0.7)
        np.testing.assert_allclose(shifted.a_hat, base.a_hat + c, atol=1e-8)
        np.testing.assert_allclose(scaled.a_hat, 3.0 * base.a_hat, atol=1e-8)

    def test_intercept_monotone_in_tau(self):
        y = np.random.default_rng(11).standard_cauchy(101)
        vals = [fit_quantile(np.ones((101, 1)), y, t).a_hat[0] for t in np.linspace(0.02, 0.98, 25)]
        assert np.all(np.diff(vals) >= 0)

    def test_rank_deficient(self):
        Z = np.column_stack([np.ones(10), np.arange(10.0), 2 * np.arange(10.0)])
        with pytest.raises(RankDeficientError):
            fit_quantile(Z, np.arange(10.0), 0.5)

    def test_iteration_cap(self):
        rng = np.random.default_rng(12)
        Z, y = random_problem(rng, 200, 4)
        with pytest.raises(ConvergenceError) as info:
            fit_quantile(Z, y, 0.5, max_iter=1, start="least_squares")
        assert info.value.iterations == 1
        assert np.isfinite(info.value.kkt_residual)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            fit_quantile(np.ones((3, 1)), np.ones(4), 0.5)
        with pytest.raises(ValueError):
            fit_quantile(np.ones((3, 1)), np.array([1.0, np.inf, 0.0]), 0.5)


class TestPanel:
    def setup_method(self):
        rng = np.random.default_rng(13)
        self.Z = np.column_stack([np.ones(60), rng.uniform(-1, 1, size=(60, 2))])
        self.Y = rng.standard_t(3, size=(60, 7))

    def test_single_period_matches_scalar_solver(self):
        fit = fit_quantile_panel(self.Y[:, :1], self.Z, 0.25)
        res = fit_quantile(self.Z, self.Y[:, 0], 0.25)
        np.testing.assert_array_equal(fit.A_hat[:, 0], res.a_hat)
        np.testing.assert_allclose(fit.Y_hat, self.Z @ fit.A_hat)

    def test_noiseless_low_rank(self):
        rng = np.random.default_rng(14)
        B = rng.normal(size=(3, 2))
        F = rng.normal(size=(7, 2))
        Y = self.Z @ B @ F.T
        fit = fit_quantile_panel(Y, self.Z, 0.6)
        np.testing.assert_allclose(fit.Y_hat, Y, atol=1e-8)

    def test_period_permutation(self):
        perm = np.array([3, 0, 6, 1, 5, 2, 4])
        a = fit_quantile_panel(self.Y, self.Z, 0.4)
        b = fit_quantile_panel(self.Y[:, perm], self.Z, 0.4)
        np.testing.assert_array_equal(b.A_hat, a.A_hat[:, perm])

    def test_failing_period_is_reported(self):
        Y = self.Y.copy()
        Y[5, 4] = np.nan
        with pytest.raises(ValueError, match="period 4"):
            fit_quantile_panel(Y, self.Z, 0.5)


class TestLeastSquares:
    def test_span_and_means(self):
        rng = np.random.default_rng(15)
        Z = np.column_stack([np.ones(30), rng.normal(size=(30, 2))])
        A0 = rng.normal(size=(3, 4))
        np.testing.assert_allclose(fit_least_squares_panel(Z @ A0, Z).A_hat, A0, atol=1e-12)
        Y = rng.normal(size=(30, 4))
        np.testing.assert_allclose(fit_least_squares_panel(Y, np.ones((30, 1))).A_hat[0], Y.mean(axis=0))

    def test_against_normal_equations(self):
        rng = np.random.default_rng(16)
        Z = np.column_stack([np.ones(80), rng.normal(size=(80, 4))])
        Y = rng.normal(size=(80, 5))
        A_ne = np.linalg.solve(Z.T @ Z, Z.T @ Y)
        np.testing.assert_allclose(fit_least_squares_panel(Y, Z).A_hat, A_ne, atol=1e-10)

    def test_rank_deficient(self):
        Z = np.ones((10, 2))
        with pytest.raises(RankDeficientError):
            fit_least_squares_panel(np.ones((10, 2)), Z)
