import numpy as np
import pytest

from zifqr.core import InvalidArgumentError, ReplicatedFunctionalDataset, build_grid
from zifqr.mixedmodels import (
    MEAN_FLOOR,
    fit_pointwise_lmm,
    fit_pointwise_pmm,
    fit_pointwise_zipmm,
    fit_random_intercept,
)


def anova_blup_oracle(y):
    """Textbook one-way random-effects closed forms (balanced data)."""
    n, J = y.shape
    ybar = y.mean(axis=1)
    grand = y.mean()
    msw = np.sum((y - ybar[:, None]) ** 2) / (n * (J - 1))
    msb = J * np.sum((ybar - grand) ** 2) / (n - 1)
    sigma_e2 = msw
    sigma_a2 = max(0.0, (msb - msw) / J)
    shrink = sigma_a2 / (sigma_a2 + sigma_e2 / J) if (sigma_a2 + sigma_e2) > 0 else 0.0
    return grand + shrink * (ybar - grand)


class TestFitRandomIntercept:
    def test_constant_table_degenerate(self):
        fit = fit_random_intercept(np.full((4, 3), 2.5))
        assert fit.degenerate
        assert fit.sigma_a2 == 0.0 and fit.sigma_e2 == 0.0
        assert np.allclose(fit.xhat, 2.5)

    def test_zero_between_variance_shrinks_to_grand_mean(self):
        rng = np.random.default_rng(8)
        y = 5.0 + rng.normal(0, 1.0, size=(10, 400))
        fit = fit_random_intercept(y)
        assert np.all(fit.shrinkage < 0.25)
        assert np.max(np.abs(fit.xhat - fit.alpha0)) < 0.05

    def test_balanced_matches_anova_oracle(self):
        rng = np.random.default_rng(21)
        y = 1.0 + rng.normal(0, 1.5, size=(5, 1)) + rng.normal(0, 0.7, size=(5, 4))
        fit = fit_random_intercept(y)
        assert np.max(np.abs(fit.xhat - anova_blup_oracle(y))) < 1e-10
        assert abs(fit.blups.sum()) < 1e-10  # balanced BLUPs centre at zero

    @pytest.mark.parametrize("seed", range(6))
    def test_blup_between_subject_mean_and_grand_mean(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.normal(0, 1, size=(8, 5)) + rng.normal(0, 1, size=(8, 1))
        fit = fit_random_intercept(y)
        ybar = y.mean(axis=1)
        lo = np.minimum(ybar, fit.alpha0) - 1e-12
        hi = np.maximum(ybar, fit.alpha0) + 1e-12
        assert np.all((fit.xhat >= lo) & (fit.xhat <= hi))

    def test_unbalanced_profile_close_to_balanced_anova(self):
        rng = np.random.default_rng(4)
        y = rng.normal(0, 1, size=(12, 6)) + 2.0 * rng.normal(size=(12, 1))
        obs = np.ones_like(y, bool)
        fit_bal = fit_random_intercept(y)
        fit_prof = fit_random_intercept(y, obs.copy())
        # Full mask routes through the balanced path.
        assert np.allclose(fit_bal.xhat, fit_prof.xhat)
        obs[0, 0] = False  # genuinely unbalanced now
        fit_ub = fit_random_intercept(y, obs)
        assert 0.0 <= fit_ub.sigma_a2
        assert np.all((fit_ub.shrinkage >= 0) & (fit_ub.shrinkage <= 1))
        assert np.max(np.abs(fit_ub.xhat - fit_bal.xhat)) < 0.5

    def test_noise_free_unbalanced(self):
        y = np.array([[1.0, 1.0, 1.0], [3.0, 3.0, 3.0], [5.0, 5.0, 5.0]])
        obs = np.array([[True, True, False], [True, True, True], [True, False, False]])
        fit = fit_random_intercept(y, obs)
        assert fit.sigma_e2 == 0.0
        assert np.allclose(fit.xhat, [1.0, 3.0, 5.0])

    def test_single_subject_rejected(self):
        with pytest.raises(InvalidArgumentError):
            fit_random_intercept(np.ones((1, 5)))

    def test_no_replication_rejected(self):
        obs = np.zeros((3, 2), bool)
        obs[:, 0] = True
        with pytest.raises(InvalidArgumentError):
            fit_random_intercept(np.ones((3, 2)), obs)


def _dataset(values):
    values = np.asarray(values, float)
    return ReplicatedFunctionalDataset(build_grid(values.shape[2]), values, None)


class TestPointwiseLMM:
    def test_noise_free_recovers_exactly(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(1, 4, size=(6, 8))
        data = _dataset(np.repeat(X[:, None, :], 4, axis=1))
        fit = fit_pointwise_lmm(data)
        assert np.max(np.abs(fit.fitted_mean - X)) < 1e-10

    def test_constant_in_time_gives_identical_fits(self):
        rng = np.random.default_rng(5)
        slice_ = rng.uniform(1, 3, size=(5, 4))
        data = _dataset(np.repeat(slice_[:, :, None], 6, axis=2))
        fit = fit_pointwise_lmm(data)
        assert np.allclose(fit.fitted_mean, fit.fitted_mean[:, :1])

    def test_matches_per_point_anova_oracle(self):
        rng = np.random.default_rng(13)
        vals = rng.uniform(0.5, 4.0, size=(5, 4, 3))
        fit = fit_pointwise_lmm(_dataset(vals))
        for l in range(3):
            oracle = anova_blup_oracle(vals[:, :, l])
            assert np.max(np.abs(fit.fitted_mean[:, l] - oracle)) < 1e-10

    def test_concurrent_slices_match_serial(self):
        rng = np.random.default_rng(33)
        vals = rng.uniform(0.5, 4.0, size=(6, 4, 8))
        data = _dataset(vals)
        serial = fit_pointwise_lmm(data)
        threaded = fit_pointwise_lmm(data, max_workers=3)
        assert np.array_equal(serial.fitted_mean, threaded.fitted_mean)

    def test_sparse_time_point_falls_back_to_means(self):
        rng = np.random.default_rng(15)
        vals = rng.uniform(1, 3, size=(4, 3, 2))
        obs = np.ones_like(vals, bool)
        obs[1:, :, 0] = False  # only one subject observed at t_0
        data = ReplicatedFunctionalDataset(build_grid(2), vals, obs)
        fit = fit_pointwise_lmm(data)
        assert fit.flagged[0] and not fit.flagged[1]
        assert np.isclose(fit.fitted_mean[0, 0], vals[0, :, 0].mean())


class TestPointwisePMM:
    def test_no_heterogeneity_recovers_slice_mean(self):
        rng = np.random.default_rng(17)
        lam = 6.0
        vals = rng.poisson(lam, size=(40, 60, 2)).astype(float)
        fit = fit_pointwise_pmm(_dataset(vals))
        for l in range(2):
            target = vals[:, :, l].mean()
            assert np.max(np.abs(fit.fitted_mean[:, l] - target) / target) < 0.05

    def test_all_zero_slice_floored_and_flagged(self):
        vals = np.zeros((3, 4, 2))
        vals[:, :, 1] = 2.0
        fit = fit_pointwise_pmm(_dataset(vals))
        assert np.all(fit.fitted_mean[:, 0] == MEAN_FLOOR)
        assert fit.flagged[0] and not fit.flagged[1]

    def test_single_subject_constant_counts(self):
        vals = np.full((1, 4, 2), 2.0)
        fit = fit_pointwise_pmm(_dataset(vals))
        assert abs(fit.fitted_mean[0, 0] - 2.0) < 1e-6


class TestPointwiseZIPMM:
    def test_no_zero_inflation_matches_pmm(self):
        rng = np.random.default_rng(23)
        vals = rng.poisson(10.0, size=(25, 8, 1)).astype(float)
        vals[vals == 0] = 1.0  # keep the slice zero-free
        data = _dataset(np.repeat(vals, 2, axis=2))
        pmm = fit_pointwise_pmm(data)
        zip_ = fit_pointwise_zipmm(data)
        assert zip_.point_params[0]["pi"] == 0.0
        assert np.max(np.abs(zip_.fitted_mean - pmm.fitted_mean)) < 1e-3

    def test_recovers_structural_zero_fraction(self):
        rng = np.random.default_rng(29)
        n, J, q, lam = 30, 10, 0.3, 12.0
        pos = rng.poisson(lam, size=(n, J)).astype(float)
        pos[pos == 0] = 1.0
        mask = rng.random((n, J)) < q
        vals = np.repeat(np.where(mask, 0.0, pos)[:, :, None], 2, axis=2)
        fit = fit_pointwise_zipmm(_dataset(vals))
        q_realized = mask.mean()
        assert abs(fit.point_params[0]["pi"] - q_realized) < 0.02

    def test_all_zero_slice_capped_and_flagged(self):
        vals = np.zeros((3, 5, 2))
        fit = fit_pointwise_zipmm(_dataset(vals), pi_cap=0.97)
        assert fit.point_params[0]["pi"] == 0.97
        assert fit.flagged[0]
        assert np.all(fit.fitted_mean == MEAN_FLOOR)

    def test_em_loglik_monotone(self):
        rng = np.random.default_rng(31)
        pos = rng.poisson(5.0, size=(20, 6)).astype(float)
        mask = rng.random((20, 6)) < 0.4
        vals = np.repeat(np.where(mask, 0.0, pos)[:, :, None], 2, axis=2)
        fit = fit_pointwise_zipmm(_dataset(vals))
        trace = np.array(fit.point_params[0]["loglik_trace"])
        assert np.all(np.diff(trace) >= -1e-8)
