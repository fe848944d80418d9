import math

import numpy as np
import pytest

from esgpairs.core.backtest import PairBook, backtest_pairs, max_drawdown, run_backtest, sharpe, total_return
from esgpairs.core.exceptions import AccountingError, DataError, ShapeError
from esgpairs.core.models import ExecutionParams, PairCandidate, PairStats, StrategyParams, TradeAction
from esgpairs.core.stattests import ols_fit
from esgpairs.core.strategy import build_spread, resolve_params

from .conftest import price_table

LEDGER_PARAMS = StrategyParams(fast_span=1, slow_span=3, buy_threshold=-1.0, sell_threshold=1.0)
LEDGER_EXEC = ExecutionParams(commission_rate=0.001, initial_capital=1000.0)


def _ledger_prices(spread):
    s2 = np.full(len(spread), 100.0)
    return 100.0 + np.asarray(spread, dtype=float), s2


def _single_dip(bar: int, n: int = 12):
    spread = np.zeros(n)
    spread[bar] = -4.0
    return _ledger_prices(spread)


def _resolved_backtest(s1, s2, ep, z=1.0):
    h = ols_fit(s1, s2).slope
    sp = StrategyParams(fast_span=5, slow_span=20, threshold_z=z)
    sp = resolve_params(sp, build_spread(s1, s2, h, sp))
    return run_backtest(s1, s2, h, sp, ep)


class TestLedger:
    def test_round_trip_ledger(self):
        s1, s2 = _single_dip(5)
        report = run_backtest(s1, s2, 1.0, LEDGER_PARAMS, LEDGER_EXEC)

        assert [t.bar for t in report.trades] == [5, 6]
        opening, closing = report.trades
        assert opening.action is TradeAction.OPEN_LONG
        assert (opening.units_a, opening.units_b) == (1.0, -1.0)
        assert (opening.price_a, opening.price_b) == (96.0, 100.0)
        assert opening.commission_paid == pytest.approx(0.196, abs=1e-12)
        assert closing.action is TradeAction.CLOSE
        assert (closing.units_a, closing.units_b) == (-1.0, 1.0)
        assert closing.commission_paid == pytest.approx(0.2, abs=1e-12)

        expected = [1000.0] * 5 + [999.804] + [1003.604] * 6
        assert np.allclose(report.equity_curve, expected, rtol=0, atol=1e-10)
        assert report.total_return_pct == pytest.approx(0.3604, abs=1e-10)
        assert report.max_drawdown_pct == pytest.approx(0.0196, abs=1e-10)

    def test_commission_charged_four_times_per_round_trip(self):
        s1, s2 = _single_dip(5)
        free = run_backtest(s1, s2, 1.0, LEDGER_PARAMS, ExecutionParams(commission_rate=0.0))
        paid = run_backtest(s1, s2, 1.0, LEDGER_PARAMS, LEDGER_EXEC)
        notional = 96.0 + 100.0 + 100.0 + 100.0
        assert free.equity_curve[-1] - paid.equity_curve[-1] == pytest.approx(0.001 * notional, abs=1e-10)

    def test_open_position_is_flattened_on_last_bar(self):
        spread = np.zeros(12)
        spread[9:] = -4.0
        s1, s2 = _ledger_prices(spread)
        report = run_backtest(s1, s2, 1.0, LEDGER_PARAMS, LEDGER_EXEC)
        assert [(t.bar, t.action) for t in report.trades] == [(9, TradeAction.OPEN_LONG), (11, TradeAction.CLOSE)]
        assert sum(t.units_a for t in report.trades) == 0.0

    def test_no_entry_on_last_bar(self):
        s1, s2 = _single_dip(11)
        assert run_backtest(s1, s2, 1.0, LEDGER_PARAMS, LEDGER_EXEC).trades == []

    def test_zero_trades(self):
        s1, s2 = _single_dip(5)
        wide = StrategyParams(fast_span=1, slow_span=3, buy_threshold=-1e9, sell_threshold=1e9)
        report = run_backtest(s1, s2, 1.0, wide, LEDGER_EXEC)
        assert report.n_trades == 0
        assert report.sharpe is None
        assert report.max_drawdown_pct == 0.0
        assert report.total_return_pct == 0.0
        assert (report.equity_curve == 1000.0).all()

    def test_short_series(self):
        with pytest.raises(ShapeError):
            run_backtest(np.ones(4), np.ones(4), 1.0, LEDGER_PARAMS, LEDGER_EXEC)

    def test_non_positive_prices(self):
        s1, s2 = _single_dip(5)
        s1[3] = 0.0
        with pytest.raises(DataError):
            run_backtest(s1, s2, 1.0, LEDGER_PARAMS, LEDGER_EXEC)


class TestProperties:
    def test_commission_lowers_returns(self, cointegrated_pair):
        s1, s2 = cointegrated_pair.closes('YY'), cointegrated_pair.closes('XX')
        reports = [_resolved_backtest(s1, s2, ExecutionParams(commission_rate=rate)) for rate in (0.0, 0.001, 0.002)]
        assert reports[0].n_trades > 0
        returns = [r.total_return_pct for r in reports]
        assert returns[0] > returns[1] > returns[2]

    def test_scale_invariance(self, cointegrated_pair):
        s1, s2 = cointegrated_pair.closes('YY'), cointegrated_pair.closes('XX')
        base = _resolved_backtest(s1, s2, ExecutionParams(initial_capital=1000.0))
        scaled = _resolved_backtest(2.0 * s1, 2.0 * s2, ExecutionParams(initial_capital=2000.0))
        assert [t.bar for t in base.trades] == [t.bar for t in scaled.trades]
        assert scaled.total_return_pct == pytest.approx(base.total_return_pct, abs=1e-9)
        assert scaled.max_drawdown_pct == pytest.approx(base.max_drawdown_pct, abs=1e-9)
        assert scaled.sharpe == pytest.approx(base.sharpe, abs=1e-9)

    def test_equity_is_cash_plus_positions(self, cointegrated_pair):
        s1, s2 = cointegrated_pair.closes('YY'), cointegrated_pair.closes('XX')
        report = _resolved_backtest(s1, s2, ExecutionParams())
        book = PairBook(1000.0)
        position_a = position_b = 0.0
        for trade in report.trades:
            book.execute(trade.units_a, trade.units_b, trade.price_a, trade.price_b, 0.001)
            position_a += trade.units_a
            position_b += trade.units_b
        assert position_a == pytest.approx(0.0) and position_b == pytest.approx(0.0)
        assert book.cash == pytest.approx(report.equity_curve[-1], abs=1e-8)


class TestPairBook:
    def test_execute_updates_cash_and_units(self):
        book = PairBook(1000.0)
        fill = book.execute(1.0, -0.5, 50.0, 80.0, 0.01)
        assert fill['commission'] == pytest.approx(0.01 * (50.0 + 40.0))
        assert book.cash == pytest.approx(1000.0 - 50.0 + 40.0 - 0.9)
        assert book.mark(50.0, 80.0) == pytest.approx(1000.0 - 0.9)

    def test_slippage_moves_against_trade(self):
        book = PairBook(1000.0)
        fill = book.execute(1.0, -1.0, 100.0, 100.0, 0.0, slippage=0.01)
        assert fill['fill_a'] == pytest.approx(101.0)
        assert fill['fill_b'] == pytest.approx(99.0)


class TestMetrics:
    def test_drawdown_example(self):
        assert max_drawdown([100.0, 50.0, 75.0]) == pytest.approx(50.0)

    def test_monotone_curve_has_no_drawdown(self):
        assert max_drawdown(np.linspace(100.0, 200.0, 50)) == 0.0

    def test_drawdown_brute_force(self, rng):
        curve = 1000.0 * np.exp(np.cumsum(rng.normal(0.0, 0.01, 1000)))
        expected = max((max(curve[:i + 1]) - curve[i]) / max(curve[:i + 1]) for i in range(len(curve))) * 100.0
        assert max_drawdown(curve) == pytest.approx(expected, abs=1e-9)

    def test_non_positive_equity(self):
        with pytest.raises(AccountingError) as info:
            max_drawdown([100.0, 10.0, -5.0])
        assert info.value.bar == 2

    def test_total_return(self):
        assert total_return([100.0, 90.0, 118.52]) == pytest.approx(18.52, abs=1e-9)

    def test_sharpe_matches_formula(self, rng):
        curve = 1000.0 * np.cumprod(1.0 + rng.normal(0.0005, 0.01, 300))
        returns = curve[1:] / curve[:-1] - 1.0
        expected = returns.mean() / returns.std(ddof=1) * math.sqrt(252)
        assert sharpe(curve) == pytest.approx(expected, rel=1e-12)

    def test_sharpe_undefined_for_flat_curve(self):
        assert sharpe(np.full(10, 1000.0)) is None

    def test_sharpe_undefined_for_short_curve(self):
        assert sharpe([1000.0, 1010.0]) is None

    def test_sharpe_near_zero_for_alternating_returns(self):
        curve = [1000.0]
        for i in range(200):
            curve.append(curve[-1] * (1.01 if i % 2 == 0 else 1 / 1.01))
        assert abs(sharpe(curve)) < 0.1


def test_backtest_pairs_sorted_by_pair():
    spread = np.zeros(12)
    spread[5] = -4.0
    table = price_table({'C': 100.0 + spread, 'B': np.full(12, 100.0), 'A': 100.0 + spread})
    stats = [
        PairStats(PairCandidate('B', 'C'), 1.0, 0.0, 0.01, 2.0, 0.3, 3),
        PairStats(PairCandidate('A', 'B'), 1.0, 0.0, 0.01, 2.0, 0.3, 3),
    ]
    params = {s.pair: LEDGER_PARAMS for s in stats}
    reports = backtest_pairs(table, stats, params, LEDGER_EXEC, 'train', workers=2)
    assert [r.sort_key for r in reports] == [('A', 'B'), ('B', 'C')]
    assert reports[0].window == 'train'
    assert reports[0].n_trades == 2
