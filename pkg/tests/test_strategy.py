import numpy as np
import pytest

from esgpairs.core.exceptions import ConfigError, DegenerateSeriesError, ShapeError
from esgpairs.core.models import FLAT, Position, Signal, StrategyParams
from esgpairs.core.strategy import (
    SpreadState,
    auto_thresholds,
    build_spread,
    generate_signals,
    next_signal,
    position_after,
    resolve_params,
)

SYMMETRIC = StrategyParams(fast_span=2, slow_span=5, buy_threshold=-1.0, sell_threshold=1.0)
LONG = Position(side=1, units_a=1.0, units_b=-1.0, entry_bar=0)
SHORT = Position(side=-1, units_a=-1.0, units_b=1.0, entry_bar=0)


def _state(apo):
    apo = np.asarray(apo, dtype=float)
    return SpreadState(apo, apo, np.zeros_like(apo), apo)


class TestBuildSpread:
    def test_exact_hedge_gives_zero_spread(self, rng):
        s2 = 50 + rng.random(60)
        state = build_spread(2.0 * s2, s2, 2.0, StrategyParams(fast_span=3, slow_span=10))
        assert np.allclose(state.spread, 0.0)
        assert np.allclose(state.apo, 0.0)
        assert len(state) == 60

    def test_constant_spread_gives_zero_apo(self):
        state = build_spread(np.full(30, 12.0), np.full(30, 10.0), 1.0, StrategyParams(fast_span=3, slow_span=10))
        assert np.allclose(state.apo, 0.0)

    def test_ema_recurrence(self, rng):
        s1 = 100 + np.cumsum(rng.normal(size=100))
        s2 = 100 + np.cumsum(rng.normal(size=100))
        state = build_spread(s1, s2, 0.7, StrategyParams(fast_span=4, slow_span=12))
        spread = s1 - 0.7 * s2
        for span, values in ((4, state.fast_ema), (12, state.slow_ema)):
            alpha = 2.0 / (span + 1)
            expected = [spread[0]]
            for x in spread[1:]:
                expected.append(alpha * x + (1 - alpha) * expected[-1])
            assert np.allclose(values, expected, rtol=0, atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            build_spread(np.ones(20), np.ones(21), 1.0, StrategyParams(fast_span=3, slow_span=10))

    def test_shorter_than_slow_span(self):
        with pytest.raises(ShapeError):
            build_spread(np.ones(5), np.ones(5), 1.0, StrategyParams(fast_span=3, slow_span=10))


class TestThresholds:
    def test_symmetric_band(self):
        assert auto_thresholds(_state([-1.5, 0.0, 1.5]), 1.0) == (-1.5, 1.5)

    def test_z_scales_band(self):
        buy, sell = auto_thresholds(_state([-1.5, 0.0, 1.5]), 2.0)
        assert (buy, sell) == (-3.0, 3.0)

    def test_two_pass_variance(self, rng):
        apo = rng.normal(0.3, 2.0, 500)
        mean = sum(apo) / len(apo)
        sigma = (sum((x - mean) ** 2 for x in apo) / (len(apo) - 1)) ** 0.5
        buy, sell = auto_thresholds(_state(apo), 1.0)
        assert sell == pytest.approx(sigma, rel=1e-12)
        assert buy == -sell

    def test_zero_sigma(self):
        with pytest.raises(DegenerateSeriesError):
            auto_thresholds(_state(np.zeros(10)), 1.0)

    def test_non_positive_z(self):
        with pytest.raises(ConfigError):
            auto_thresholds(_state([-1.0, 1.0]), 0.0)

    def test_explicit_thresholds_win(self):
        assert resolve_params(SYMMETRIC, _state([-5.0, 5.0])) is SYMMETRIC

    def test_resolved_from_training_apo(self):
        resolved = resolve_params(StrategyParams(fast_span=2, slow_span=5, threshold_z=1.0), _state([-1.5, 0.0, 1.5]))
        assert (resolved.buy_threshold, resolved.sell_threshold) == (-1.5, 1.5)


class TestNextSignal:
    def test_enter_long_below_buy(self):
        assert next_signal(-1.2, SYMMETRIC, FLAT) is Signal.ENTER_LONG

    def test_enter_short_above_sell(self):
        assert next_signal(1.2, SYMMETRIC, FLAT) is Signal.ENTER_SHORT

    def test_hold_inside_band(self):
        assert next_signal(0.5, SYMMETRIC, FLAT) is Signal.HOLD
        assert next_signal(-1.0, SYMMETRIC, FLAT) is Signal.HOLD

    def test_exit_long_at_zero_crossing(self):
        assert next_signal(-0.3, SYMMETRIC, LONG) is Signal.HOLD
        assert next_signal(0.0, SYMMETRIC, LONG) is Signal.EXIT
        assert next_signal(0.1, SYMMETRIC, LONG) is Signal.EXIT

    def test_exit_short_at_zero_crossing(self):
        assert next_signal(0.3, SYMMETRIC, SHORT) is Signal.HOLD
        assert next_signal(-0.1, SYMMETRIC, SHORT) is Signal.EXIT

    def test_no_pyramiding(self):
        assert next_signal(-5.0, SYMMETRIC, LONG) is Signal.HOLD

    def test_unresolved_thresholds(self):
        with pytest.raises(ConfigError):
            next_signal(0.0, StrategyParams(fast_span=2, slow_span=5), FLAT)


class TestPositionAfter:
    def test_long_with_fractional_hedge(self):
        position = position_after(Signal.ENTER_LONG, 0.75)
        assert (position.side, position.units_a, position.units_b) == (1, 1.0, -0.75)

    def test_short_with_fractional_hedge(self):
        position = position_after(Signal.ENTER_SHORT, 2.2631, bar=7)
        assert (position.side, position.units_a, position.units_b) == (-1, -1.0, 2.2631)
        assert position.entry_bar == 7

    def test_exit_flattens(self):
        assert position_after(Signal.EXIT, 1.3, LONG) == FLAT

    def test_hold_keeps_position(self):
        assert position_after(Signal.HOLD, 1.3, SHORT) == SHORT

    def test_entry_ignored_while_open(self):
        assert position_after(Signal.ENTER_SHORT, 1.3, LONG) == LONG

    def test_units_scale_both_legs(self):
        position = position_after(Signal.ENTER_LONG, 0.5, units=4.0)
        assert (position.units_a, position.units_b) == (4.0, -2.0)


class TestGenerateSignals:
    def test_round_trip(self):
        signals = generate_signals([0.0, -1.5, -0.5, 0.2, 0.0, 1.4, 0.3, -0.2], SYMMETRIC)
        assert signals == [
            Signal.HOLD, Signal.ENTER_LONG, Signal.HOLD, Signal.EXIT,
            Signal.HOLD, Signal.ENTER_SHORT, Signal.HOLD, Signal.EXIT,
        ]

    def test_translation_invariance(self, rng):
        apo = rng.integers(-400, 400, 300) / 128.0
        shift = 0.5
        shifted = StrategyParams(fast_span=2, slow_span=5, buy_threshold=-1.0 + shift, sell_threshold=1.0 + shift)
        assert generate_signals(apo, SYMMETRIC) == generate_signals(apo + shift, shifted)

    def test_long_exits_before_going_short(self):
        signals = generate_signals([0.0, -2.0, 5.0, 5.0], SYMMETRIC)
        assert signals == [Signal.HOLD, Signal.ENTER_LONG, Signal.EXIT, Signal.ENTER_SHORT]

    def test_side_never_flips_in_one_bar(self, rng):
        apo = rng.normal(0.0, 3.0, 500)
        position = FLAT
        sides = []
        for bar, signal in enumerate(generate_signals(apo, SYMMETRIC)):
            position = position_after(signal, 1.0, position, bar)
            sides.append(position.side)
        assert all(a * b != -1 for a, b in zip(sides, sides[1:]))
        assert 1 in sides and -1 in sides

    def test_pure(self, rng):
        apo = rng.normal(size=200)
        assert generate_signals(apo, SYMMETRIC) == generate_signals(apo.copy(), SYMMETRIC)


class TestStrategyParams:
    def test_fast_must_be_faster(self):
        with pytest.raises(ConfigError):
            StrategyParams(fast_span=10, slow_span=10)

    def test_buy_below_sell(self):
        with pytest.raises(ConfigError):
            StrategyParams(fast_span=2, slow_span=5, buy_threshold=1.0, sell_threshold=-1.0)

    def test_thresholds_come_together(self):
        with pytest.raises(ConfigError):
            StrategyParams(fast_span=2, slow_span=5, buy_threshold=-1.0)
