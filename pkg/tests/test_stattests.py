import math

import numpy as np
import pytest

from esgpairs.core.exceptions import ConfigError, DegenerateSeriesError, ShapeError, SingularRegressorError
from esgpairs.core.stattests import (
    adf_test,
    ema,
    engle_granger,
    half_life,
    hurst_exponent,
    mean_reversion_stats,
    ols_fit,
    schwert_max_lags,
    zero_crossings,
)

from .conftest import ar1


class TestOls:
    def test_exact_slope(self):
        fit = ols_fit([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
        assert fit.slope == pytest.approx(2.0, abs=1e-12)
        assert fit.intercept == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(fit.residuals, 0.0, atol=1e-12)

    def test_exact_line_with_intercept(self):
        x = np.arange(10.0)
        fit = ols_fit(3.0 + 0.5 * x, x)
        assert fit.intercept == pytest.approx(3.0, abs=1e-12)
        assert fit.slope == pytest.approx(0.5, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0)

    def test_matches_least_squares(self, rng):
        x = rng.normal(size=100)
        y = 1.5 * x + rng.normal(size=100)
        fit = ols_fit(y, x)
        expected, *_ = np.linalg.lstsq(np.column_stack([np.ones(100), x]), y, rcond=None)
        assert fit.intercept == pytest.approx(expected[0], rel=1e-10, abs=1e-12)
        assert fit.slope == pytest.approx(expected[1], rel=1e-10)

    def test_residuals_orthogonal_to_regressor(self, rng):
        x = 50 + np.cumsum(rng.normal(size=400))
        fit = ols_fit(3.0 * x + rng.normal(size=400), x)
        scale = np.linalg.norm(fit.residuals) * np.linalg.norm(x)
        assert abs(np.dot(fit.residuals, x)) <= 1e-9 * scale
        assert abs(fit.residuals.sum()) <= 1e-8 * np.linalg.norm(fit.residuals)

    def test_constant_regressor(self):
        with pytest.raises(SingularRegressorError):
            ols_fit([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            ols_fit([1.0, 2.0, 3.0], [1.0, 2.0])


class TestAdf:
    def test_stationary_ar1(self, rng):
        result = adf_test(ar1(rng, 1000, 0.5))
        assert result.p_value < 0.05
        assert result.is_stationary()

    def test_white_noise(self, rng):
        assert adf_test(rng.normal(size=1000)).p_value < 0.01

    def test_random_walks_are_rarely_stationary(self):
        p_values = [adf_test(np.cumsum(np.random.default_rng(seed).normal(size=1000))).p_value for seed in range(20)]
        assert sum(p > 0.10 for p in p_values) >= 15

    def test_observations_used(self, rng):
        result = adf_test(rng.normal(size=300))
        assert result.n_obs == 300 - result.lags_used - 1
        assert 0 <= result.lags_used <= schwert_max_lags(300)

    def test_schwert_rule(self):
        assert schwert_max_lags(100) == 12
        assert schwert_max_lags(1000) == 21

    def test_too_short(self):
        with pytest.raises(ShapeError):
            adf_test(np.arange(8.0), max_lags=2)

    def test_constant(self):
        with pytest.raises(DegenerateSeriesError):
            adf_test(np.ones(100))


class TestEngleGranger:
    def test_planted_pair(self, cointegrated_pair):
        result = engle_granger(cointegrated_pair.closes('YY'), cointegrated_pair.closes('XX'))
        assert 1.9 <= result.hedge_ratio <= 2.1
        assert result.p_value < 0.05
        assert not result.degenerate

    def test_independent_walks(self):
        p_values = []
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            p_values.append(engle_granger(np.cumsum(rng.normal(size=500)), np.cumsum(rng.normal(size=500))).p_value)
        assert sum(p > 0.05 for p in p_values) >= 8

    def test_identical_series(self, rng):
        x = 100 + np.cumsum(rng.normal(size=100))
        result = engle_granger(x, x)
        assert result.degenerate
        assert result.p_value == 0.0
        assert result.hedge_ratio == pytest.approx(1.0)

    @pytest.mark.parametrize('c', [0.5, 2.0, 10.0])
    def test_hedge_ratio_scales_with_regressor(self, cointegrated_pair, c):
        y, x = cointegrated_pair.closes('YY'), cointegrated_pair.closes('XX')
        base = engle_granger(y, x).hedge_ratio
        assert engle_granger(y, c * x).hedge_ratio == pytest.approx(base / c, rel=1e-9)
        assert engle_granger(c * y, x).hedge_ratio == pytest.approx(base * c, rel=1e-9)

    def test_p_value_invariant_under_affine_map(self, cointegrated_pair):
        y, x = cointegrated_pair.closes('YY'), cointegrated_pair.closes('XX')
        base = engle_granger(y, x).p_value
        assert engle_granger(3.0 * y + 50.0, x).p_value == pytest.approx(base, abs=1e-8)

    def test_too_short(self):
        with pytest.raises(ShapeError):
            engle_granger(np.arange(20.0), np.arange(20.0) ** 2)


class TestHurst:
    def test_linear_trend(self):
        assert hurst_exponent(np.arange(1000.0)) == pytest.approx(1.0, abs=0.05)

    def test_random_walk(self):
        estimates = [hurst_exponent(np.cumsum(np.random.default_rng(seed).normal(size=5000))) for seed in range(10)]
        assert sum(0.45 <= h <= 0.55 for h in estimates) >= 9

    def test_mean_reverting(self, rng):
        assert hurst_exponent(ar1(rng, 5000, 0.2)) < 0.40

    def test_invalid_lags(self):
        with pytest.raises(ConfigError):
            hurst_exponent(np.arange(100.0), min_lag=1)
        with pytest.raises(ConfigError):
            hurst_exponent(np.arange(100.0), min_lag=5, max_lag=5)

    def test_too_short(self):
        with pytest.raises(ShapeError):
            hurst_exponent(np.arange(30.0))

    def test_constant(self):
        with pytest.raises(DegenerateSeriesError):
            hurst_exponent(np.ones(100))


class TestHalfLife:
    def test_alternating_series(self):
        series = np.array([1.0, -1.0] * 10)
        result = half_life(series)
        assert result.lambda_ == pytest.approx(-2.0, abs=1e-12)
        assert result.half_life == pytest.approx(math.log(2) / 2, abs=1e-12)

    def test_ar1(self):
        estimates = [half_life(ar1(np.random.default_rng(seed), 5000, 0.9)).half_life for seed in range(10)]
        expected = math.log(2) / 0.1
        assert sum(abs(h - expected) <= 0.2 * expected for h in estimates) >= 9

    def test_identity_with_lambda(self, rng):
        result = half_life(ar1(rng, 500, 0.8))
        assert result.half_life == pytest.approx(-math.log(2) / result.lambda_)

    def test_sign_kept_for_explosive_series(self):
        result = half_life(1.05 ** np.arange(60))
        assert result.lambda_ > 0
        assert result.half_life < 0

    def test_too_short(self):
        with pytest.raises(ShapeError):
            half_life(np.arange(10.0))

    def test_constant(self):
        with pytest.raises(DegenerateSeriesError):
            half_life(np.ones(30))


class TestEma:
    def test_constant_series(self):
        assert np.allclose(ema(np.full(50, 3.5), 10), 3.5)

    def test_span_one_is_identity(self, rng):
        values = rng.normal(size=20)
        assert np.allclose(ema(values, 1), values)

    def test_step(self):
        assert ema([0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 3).tolist() == [0.0, 0.0, 0.0, 0.5, 0.75, 0.875]

    def test_recurrence(self, rng):
        values = rng.normal(size=100)
        alpha = 2.0 / (7 + 1)
        expected = [values[0]]
        for x in values[1:]:
            expected.append(alpha * x + (1 - alpha) * expected[-1])
        assert np.allclose(ema(values, 7), expected, rtol=0, atol=1e-12)

    def test_within_running_range(self, rng):
        values = 100 + np.cumsum(rng.normal(size=300))
        smoothed = ema(values, 12)
        lows, highs = np.minimum.accumulate(values), np.maximum.accumulate(values)
        assert np.all(smoothed >= lows - 1e-9)
        assert np.all(smoothed <= highs + 1e-9)

    def test_invalid_span(self):
        with pytest.raises(ConfigError):
            ema([1.0, 2.0], 0)


class TestZeroCrossings:
    def test_alternating(self):
        assert zero_crossings([1.0, -1.0, 1.0, -1.0, 1.0, -1.0]) == 5

    def test_constant(self):
        assert zero_crossings(np.full(10, 2.0)) == 0

    def test_brute_force(self, rng):
        values = ar1(rng, 300, 0.5)
        centered = values - values.mean()
        signs = [1 if v > 0 else -1 for v in centered if v != 0]
        expected = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
        assert zero_crossings(values) == expected

    @pytest.mark.parametrize('c', [0.5, 2.0, 1024.0])
    def test_positive_scale_keeps_count(self, rng, c):
        values = ar1(rng, 300, 0.5)
        assert zero_crossings(c * values) == zero_crossings(values)


def test_mean_reversion_stats_combines_components(rng):
    spread = ar1(rng, 500, 0.6)
    stats = mean_reversion_stats(spread)
    assert stats.half_life == half_life(spread).half_life
    assert stats.hurst == hurst_exponent(spread)
    assert stats.cross_count == zero_crossings(spread)
