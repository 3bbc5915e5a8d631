import numpy as np
import pytest

from cqfm.basis import (
    chebyshev_features,
    default_k_n,
    evaluate_basis,
    fit_basis,
    standardize_columns,
)
from oracles import chebyshev_direct


class TestStandardize:
    def test_small_column(self):
        Xs, std = standardize_columns(np.array([[1.0], [2.0], [3.0]]))
        np.testing.assert_allclose(Xs[:, 0], [-1.0, 0.0, 1.0], atol=1e-15)
        assert std.mean[0] == 2.0 and std.sd[0] == 1.0

    def test_constant_column_is_named(self):
        X = np.column_stack([[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]])
        with pytest.raises(ValueError, match="constant characteristic 'size'"):
            standardize_columns(X, column_names=["value", "size"])

    def test_moments_of_random_column(self):
        x = np.random.default_rng(0).normal(3.0, 7.0, size=(200, 1))
        Xs, _ = standardize_columns(x)
        assert abs(Xs.mean()) < 1e-12
        assert abs(Xs.std(ddof=1) - 1.0) < 1e-12

    def test_transform_reuse_and_inverse(self):
        X = np.random.default_rng(1).normal(size=(50, 3))
        Xs, std = standardize_columns(X)
        np.testing.assert_array_equal(std.transform(X), Xs)
        np.testing.assert_allclose(std.inverse_transform(Xs), X, atol=1e-13)

    def test_rejects_nan(self):
        X = np.array([[1.0, 2.0], [np.nan, 3.0], [0.0, 1.0]])
        with pytest.raises(ValueError, match="row 1"):
            standardize_columns(X)


class TestFitBasis:
    def test_dimension_rule(self):
        X = np.random.default_rng(2).uniform(size=(30, 2))
        assert fit_basis(X, 4).transform(X).shape == (30, 9)
        X4 = np.random.default_rng(2).uniform(size=(30, 4))
        assert fit_basis(X4, 4).dim == 17

    def test_single_linear_feature(self):
        X = np.array([[0.0], [1.0], [4.0]])
        np.testing.assert_allclose(fit_basis(X, 1).transform(X), [[1, -1], [1, -0.5], [1, 1]])

    def test_midpoint_maps_to_zero(self):
        b = fit_basis(np.array([[-2.0], [2.0]]), 2)
        np.testing.assert_allclose(evaluate_basis(b, [0.0]), [1.0, 0.0, -1.0])

    @pytest.mark.parametrize("k", [0, -1, 1.5])
    def test_bad_k(self, k):
        with pytest.raises(ValueError):
            fit_basis(np.array([[0.0], [1.0]]), k)

    def test_default_k_n(self):
        assert default_k_n(8) == 2
        assert default_k_n(1000) == 10
        assert default_k_n(355) == 7
        assert default_k_n(1) == 2


class TestEvaluate:
    def basis_unit(self, k):
        return fit_basis(np.array([[-1.0], [1.0]]), k)

    def test_half(self):
        np.testing.assert_allclose(evaluate_basis(self.basis_unit(2), [0.5]), [1.0, 0.5, -0.5])

    def test_right_endpoint_all_ones(self):
        np.testing.assert_allclose(evaluate_basis(self.basis_unit(6), [1.0]), np.ones(7))

    def test_clamping(self):
        b = self.basis_unit(3)
        np.testing.assert_array_equal(evaluate_basis(b, [7.0]), evaluate_basis(b, [1.0]))
        np.testing.assert_array_equal(evaluate_basis(b, [-3.0]), evaluate_basis(b, [-1.0]))

    def test_matches_trigonometric_definition(self):
        u = np.random.default_rng(3).uniform(-1, 1, size=100)
        F = chebyshev_features(u, 4)
        for j in range(1, 5):
            np.testing.assert_allclose(F[:, j - 1], chebyshev_direct(u, j), atol=1e-13)

    def test_dimension_mismatch(self):
        b = fit_basis(np.random.default_rng(0).uniform(size=(10, 2)), 2)
        with pytest.raises(ValueError):
            evaluate_basis(b, [0.1, 0.2, 0.3])

    def test_stacking_order(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(-3, 3, size=(40, 3))
        k = 3
        b = fit_basis(X, k)
        Phi = np.vstack([evaluate_basis(b, x) for x in X])
        U = b.map_to_unit(X)
        assert np.all(Phi[:, 0] == 1.0)
        for j in range(1, b.dim):
            degree = (j - 1) % k + 1
            col = (j - 1) // k
            np.testing.assert_allclose(Phi[:, j], chebyshev_direct(U[:, col], degree), atol=1e-13)

    def test_bounded_and_deterministic(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(60, 2))
        b = fit_basis(X, 5)
        Xnew = rng.normal(scale=3.0, size=(500, 2))
        Phi = b.transform(Xnew)
        assert np.all(np.abs(Phi[:, 1:]) <= 1.0)
        assert np.array_equal(Phi, b.transform(Xnew.copy()))

    def test_span_reproduced_exactly(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(-1, 1, size=(80, 2))
        b = fit_basis(X, 4)
        U = b.map_to_unit(X)
        f = 0.3 - 1.2 * chebyshev_direct(U[:, 0], 3) + 0.7 * chebyshev_direct(U[:, 1], 1)
        f = f + 0.25 * chebyshev_direct(U[:, 1], 4)
        Phi = b.transform(X)
        coef = np.linalg.lstsq(Phi, f, rcond=None)[0]
        np.testing.assert_allclose(Phi @ coef, f, atol=1e-12)
        expected = np.zeros(9)
        expected[[0, 3, 5, 8]] = [0.3, -1.2, 0.7, 0.25]
        np.testing.assert_allclose(coef, expected, atol=1e-10)
