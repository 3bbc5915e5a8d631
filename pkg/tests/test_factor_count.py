import math

import numpy as np
import pytest

from cqfm.data import PanelData
from cqfm.factor_count import (
    default_r_bar,
    default_threshold,
    eigen_ratio_estimate,
    rank_min_estimate,
    select_num_factors,
)
from cqfm.qppca import prepare_design
from cqfm.quantreg import fit_quantile_panel
from cqfm.simulate import DgpSpec, simulate_panel

# Reference spectra from a 355-stock, 62-day panel with known factor counts.
MEDIAN_SPECTRUM = [0.887, 0.094, 0.084, 0.053, 0.043]
UPPER_SPECTRUM = [13.715, 0.567, 0.428, 0.291, 0.246]
PPCA_SPECTRUM = [0.929, 0.090, 0.081, 0.066, 0.043]


class TestRankMin:
    def test_reference_rows(self):
        assert rank_min_estimate(MEDIAN_SPECTRUM, 0.224) == 1
        assert rank_min_estimate(UPPER_SPECTRUM, 0.880) == 1

    def test_all_below(self):
        assert rank_min_estimate([0.1, 0.05], 0.2) == 0

    def test_strict_inequality(self):
        assert rank_min_estimate([0.5, 0.2, 0.1], 0.2) == 1


class TestThreshold:
    def test_plug_in(self):
        assert default_threshold(1.0, 10_000, math.exp(2.0), d=1.0) == pytest.approx(0.2, rel=1e-12)

    def test_reference_value(self):
        p = default_threshold(0.887, 355, 62, d=0.25)
        assert abs(p - 0.224) <= 0.005

    def test_linear_in_d(self):
        a = default_threshold(0.5, 300, 20, d=0.3)
        assert default_threshold(0.5, 300, 20, d=0.6) == pytest.approx(2 * a, rel=1e-14)

    def test_exponent_override(self):
        a = default_threshold(1.0, 64, 10, d=1.0, exponent=-1.0 / 3.0)
        assert a == pytest.approx(math.log(10) / 4.0)

    @pytest.mark.parametrize("kw", [dict(T=1), dict(n=1), dict(d=0.0), dict(rho_1=-1.0)])
    def test_invalid(self, kw):
        args = dict(rho_1=1.0, n=100, T=10, d=0.25)
        args.update(kw)
        with pytest.raises(ValueError):
            default_threshold(**args)


class TestEigenRatio:
    def test_reference_ppca_row(self):
        assert eigen_ratio_estimate(PPCA_SPECTRUM) == 1

    def test_tie_goes_to_smallest(self):
        assert eigen_ratio_estimate([4.0, 2.0, 1.0]) == 1

    def test_zero_tail_is_floored(self):
        assert eigen_ratio_estimate([3.0, 1.0, 0.0, 0.0]) == 2

    def test_needs_two(self):
        with pytest.raises(ValueError):
            eigen_ratio_estimate([1.0])

    def test_R_bar_restricts_search(self):
        ev = [5.0, 4.0, 3.0, 0.1]
        assert eigen_ratio_estimate(ev) == 3
        assert eigen_ratio_estimate(ev, R_bar=2) == 2

    def test_scale_invariant(self):
        ev = np.array([2.0, 1.5, 0.2, 0.19, 0.1])
        for lam in (1e-3, 7.0, 1e4):
            assert eigen_ratio_estimate(lam * ev) == eigen_ratio_estimate(ev)


def noiseless_fit(n=1000, T=10, seed=0):
    sim = simulate_panel(DgpSpec(n=n, T=T, noise_scale=0.0, seed=seed))
    Z, _, _ = prepare_design(sim.panel, k_n=3)
    return fit_quantile_panel(sim.panel.Y, Z, 0.5)


class TestSelect:
    def test_noiseless_rank_two(self):
        fc = select_num_factors(noiseless_fit())
        assert fc.R_rank_min == 2 and fc.R_eigen_ratio == 2
        assert fc.R_bar == 8 and fc.eigenvalues.size == 9

    def test_cap_at_R_bar(self):
        fc = select_num_factors(noiseless_fit(n=300), R_bar=1)
        assert fc.R_rank_min == 1 and fc.R_eigen_ratio == 1

    def test_pure_noise_gives_zero_mostly(self):
        zeros = 0
        for seed in range(9):
            Y = np.random.default_rng(seed).standard_normal((1000, 10))
            X = np.random.default_rng(100 + seed).uniform(-1, 1, size=(1000, 2))
            Z, _, _ = prepare_design(PanelData(Y=Y, X=X), k_n=3)
            fc = select_num_factors(fit_quantile_panel(Y, Z, 0.5))
            zeros += fc.R_rank_min == 0
            assert fc.R_eigen_ratio >= 1
        assert zeros >= 5

    def test_monotone_in_d(self):
        rng = np.random.default_rng(3)
        Y = rng.normal(size=(200, 3)) @ np.diag([3.0, 1.0, 0.3]) @ rng.normal(size=(3, 12))
        Y += 0.3 * rng.normal(size=Y.shape)
        counts = [select_num_factors(Y, d=d).R_rank_min for d in np.geomspace(0.01, 20, 25)]
        assert np.all(np.diff(counts) <= 0)
        assert counts[0] > counts[-1]

    def test_invariants(self):
        rng = np.random.default_rng(4)
        fc = select_num_factors(rng.normal(size=(50, 7)))
        assert np.all(np.diff(fc.eigenvalues) <= 0) and np.all(fc.eigenvalues >= 0)
        assert 0 <= fc.R_rank_min <= fc.R_bar
        assert 1 <= fc.R_eigen_ratio <= fc.R_bar

    def test_validation(self):
        Y = np.ones((20, 1))
        with pytest.raises(ValueError, match="T >= 2"):
            select_num_factors(Y)
        with pytest.raises(ValueError):
            select_num_factors(np.random.default_rng(0).normal(size=(20, 5)), R_bar=5)

    def test_default_r_bar(self):
        assert default_r_bar(62) == 8
        assert default_r_bar(5) == 4
        assert default_r_bar(2) == 1
