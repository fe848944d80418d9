"""
Бэктест APO-стратегии по паре с комиссией и метриками: Шарп, максимальная
просадка, полная доходность.

Исполнение по цене закрытия того же бара. Комиссия начисляется на номинал
каждой ноги при открытии и при закрытии (четыре начисления за круг).
Выручка от короткой продажи зачисляется в кэш, плата за заём не учитывается.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..decorators import log_action
from .exceptions import AccountingError, ConfigError, DataError, ShapeError
from .models import FLAT, BacktestReport, ExecutionParams, PairCandidate, PairStats, Position, PriceTable, Signal, StrategyParams, Trade, TradeAction, as_float_array
from .strategy import build_spread, next_signal, position_after

logger = logging.getLogger(__name__)


class PairBook:
    """Кэш и позиции по двум ногам пары."""

    def __init__(self, initial_capital: float):
        if not initial_capital > 0:
            raise ConfigError('backtest.initial_capital', "начальный капитал должен быть положительным")
        self._cash = float(initial_capital)
        self._units_a = 0.0
        self._units_b = 0.0

    @property
    def cash(self) -> float:
        return self._cash

    @property
    def units_a(self) -> float:
        return self._units_a

    @property
    def units_b(self) -> float:
        return self._units_b

    def execute(self, delta_a: float, delta_b: float, price_a: float, price_b: float,
                commission_rate: float, slippage: float = 0.0) -> Dict[str, float]:
        """
        Исполнение изменения позиции по обеим ногам.

        Args:
            delta_a: Изменение объёма бумаги A (со знаком)
            delta_b: Изменение объёма бумаги B (со знаком)
            price_a: Цена закрытия A
            price_b: Цена закрытия B
            commission_rate: Доля номинала на комиссию
            slippage: Доля проскальзывания против направления сделки

        Returns:
            Словарь с ценами исполнения и уплаченной комиссией
        """
        fill_a = price_a * (1.0 + math.copysign(slippage, delta_a)) if delta_a else price_a
        fill_b = price_b * (1.0 + math.copysign(slippage, delta_b)) if delta_b else price_b
        commission = commission_rate * (abs(delta_a) * fill_a + abs(delta_b) * fill_b)

        self._cash -= delta_a * fill_a + delta_b * fill_b + commission
        self._units_a += delta_a
        self._units_b += delta_b
        return {'fill_a': fill_a, 'fill_b': fill_b, 'commission': commission}

    def mark(self, price_a: float, price_b: float) -> float:
        """Стоимость портфеля: кэш плюс рыночная стоимость ног."""
        return self._cash + self._units_a * price_a + self._units_b * price_b

    def to_dict(self) -> Dict[str, Any]:
        return {'cash': self._cash, 'units_a': self._units_a, 'units_b': self._units_b}

    def __repr__(self) -> str:
        return f"PairBook(cash={self._cash:.4f}, units_a={self._units_a}, units_b={self._units_b})"


def _action_for(signal: Signal) -> TradeAction:
    if signal is Signal.ENTER_LONG:
        return TradeAction.OPEN_LONG
    if signal is Signal.ENTER_SHORT:
        return TradeAction.OPEN_SHORT
    return TradeAction.CLOSE


@log_action('BACKTEST')
def run_backtest(s1: Sequence[float], s2: Sequence[float], hedge_ratio: float, sp: StrategyParams,
                 ep: ExecutionParams, pair: Optional[PairCandidate] = None, window: str = 'train') -> BacktestReport:
    """
    Побаровая симуляция стратегии.

    Бар 0 только фиксирует начальный капитал (APO на нём тождественно 0);
    сигналы обрабатываются с бара 1. На последнем баре открытая позиция
    принудительно закрывается, новые позиции не открываются.

    Args:
        s1: Цены первой бумаги окна
        s2: Цены второй бумаги окна
        hedge_ratio: Коэффициент хеджирования с обучающего окна
        sp: Параметры стратегии с заданными порогами
        ep: Параметры исполнения
        pair: Пара (для отчёта)
        window: Метка окна (train/test)

    Returns:
        Объект BacktestReport

    Raises:
        ShapeError: Если длины различаются или короче slow_span + 2
        DataError: Если цены не конечны или не положительны
    """
    s1 = as_float_array(s1, 's1')
    s2 = as_float_array(s2, 's2')
    if len(s1) != len(s2):
        raise ShapeError(f"Длины рядов не совпадают: {len(s1)} и {len(s2)}")
    if len(s1) < sp.slow_span + 2:
        raise ShapeError(f"Для бэктеста нужно не меньше {sp.slow_span + 2} баров, получено {len(s1)}")
    if not (np.all(np.isfinite(s1)) and np.all(np.isfinite(s2)) and np.all(s1 > 0) and np.all(s2 > 0)):
        raise DataError("Цены для бэктеста должны быть конечными и положительными")

    state = build_spread(s1, s2, hedge_ratio, sp)
    book = PairBook(ep.initial_capital)
    position: Position = FLAT
    trades: List[Trade] = []
    equity = np.empty(len(s1))
    equity[0] = book.mark(s1[0], s2[0])
    last = len(s1) - 1

    for bar in range(1, len(s1)):
        signal = next_signal(float(state.apo[bar]), sp, position)
        if bar == last:
            signal = Signal.HOLD if position.is_flat else Signal.EXIT

        target = position_after(signal, hedge_ratio, position, bar, ep.trade_units)
        delta_a = target.units_a - position.units_a
        delta_b = target.units_b - position.units_b
        if delta_a or delta_b:
            fill = book.execute(delta_a, delta_b, s1[bar], s2[bar], ep.commission_rate, ep.slippage)
            trades.append(Trade(bar, _action_for(signal), fill['fill_a'], fill['fill_b'], delta_a, delta_b, fill['commission']))
        position = target
        equity[bar] = book.mark(s1[bar], s2[bar])

    return BacktestReport(
        pair=pair,
        window=window,
        equity_curve=equity,
        trades=trades,
        sharpe=sharpe(equity, ep.annualization_factor),
        max_drawdown_pct=max_drawdown(equity),
        total_return_pct=total_return(equity),
        hedge_ratio=hedge_ratio,
    )


def sharpe(equity_curve: Sequence[float], annualization: int = 252) -> Optional[float]:
    """
    Аннуализированный коэффициент Шарпа по побаровым простым доходностям
    (безрисковая ставка 0, выборочное стандартное отклонение).

    Returns:
        Значение или None, если стандартное отклонение нулевое или баров меньше трёх
    """
    values = as_float_array(equity_curve, 'equity_curve')
    if len(values) < 3:
        return None
    returns = values[1:] / values[:-1] - 1.0
    std = float(np.std(returns, ddof=1))
    if not std > 0:
        return None
    return float(np.mean(returns) / std * math.sqrt(annualization))


def max_drawdown(equity_curve: Sequence[float]) -> float:
    """
    Максимальная просадка от пика в процентах.

    Raises:
        AccountingError: Если капитал неположителен
    """
    values = as_float_array(equity_curve, 'equity_curve')
    if len(values) == 0:
        raise ShapeError("Пустая кривая капитала")
    non_positive = np.flatnonzero(values <= 0)
    if len(non_positive):
        bar = int(non_positive[0])
        raise AccountingError(bar, float(values[bar]))
    peaks = np.maximum.accumulate(values)
    return float(np.max((peaks - values) / peaks) * 100.0)


def total_return(equity_curve: Sequence[float]) -> float:
    """Полная доходность окна в процентах: (final/initial - 1) × 100."""
    values = as_float_array(equity_curve, 'equity_curve')
    if len(values) == 0:
        raise ShapeError("Пустая кривая капитала")
    return float((values[-1] / values[0] - 1.0) * 100.0)


def backtest_pairs(prices: PriceTable, stats: Sequence[PairStats], params: Dict[PairCandidate, StrategyParams],
                   ep: ExecutionParams, window: str, workers: int = 4) -> List[BacktestReport]:
    """
    Бэктест набора пар на одном окне в пуле потоков.

    Args:
        prices: Цены окна
        stats: Характеристики пар (коэффициент хеджирования с обучающего окна)
        params: Параметры стратегии с порогами для каждой пары
        ep: Параметры исполнения
        window: Метка окна
        workers: Число потоков

    Returns:
        Отчёты, отсортированные по паре
    """
    def _run(item: PairStats) -> BacktestReport:
        pair = item.pair
        return run_backtest(prices.closes(pair.ticker_a), prices.closes(pair.ticker_b), item.hedge_ratio,
                            params[pair], ep, pair=pair, window=window)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        reports = list(executor.map(_run, stats))
    logger.info(f"BACKTEST_WINDOW window='{window}' pairs={len(reports)} trades={sum(r.n_trades for r in reports)}")
    return sorted(reports, key=lambda r: r.sort_key)
