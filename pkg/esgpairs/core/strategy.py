"""APO-стратегия на спреде пары: спред, быстрая/медленная EMA, сигналы и позиции."""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigError, DegenerateSeriesError, ShapeError
from .models import FLAT, Position, Signal, StrategyParams, as_float_array
from .stattests import ema


@dataclass(frozen=True)
class SpreadState:
    """Спред S1 - h·S2 и его осциллятор apo = fast_ema - slow_ema."""

    spread: np.ndarray
    fast_ema: np.ndarray
    slow_ema: np.ndarray
    apo: np.ndarray

    def __len__(self) -> int:
        return len(self.spread)


def build_spread(s1: Sequence[float], s2: Sequence[float], hedge_ratio: float, params: StrategyParams) -> SpreadState:
    """
    Спред пары и APO.

    Args:
        s1: Цены первой бумаги
        s2: Цены второй бумаги
        hedge_ratio: Коэффициент хеджирования h
        params: Параметры стратегии (периоды EMA)

    Returns:
        Объект SpreadState

    Raises:
        ShapeError: Если длины различаются или короче slow_span
    """
    s1 = as_float_array(s1, 's1')
    s2 = as_float_array(s2, 's2')
    if len(s1) != len(s2):
        raise ShapeError(f"Длины рядов не совпадают: {len(s1)} и {len(s2)}")
    if len(s1) < params.slow_span:
        raise ShapeError(f"Ряд из {len(s1)} баров короче медленного периода {params.slow_span}")

    spread = s1 - hedge_ratio * s2
    fast = ema(spread, params.fast_span)
    slow = ema(spread, params.slow_span)
    return SpreadState(spread, fast, slow, fast - slow)


def auto_thresholds(train_spread: SpreadState, z: float) -> Tuple[float, float]:
    """
    Симметричные пороги ±z·σ, где σ - выборочное стандартное отклонение APO
    на обучающем окне.

    Raises:
        ConfigError: Если z <= 0
        DegenerateSeriesError: Если σ нулевая
    """
    if not z > 0:
        raise ConfigError('strategy.threshold_z', "должно быть положительным")
    sigma = float(np.std(train_spread.apo, ddof=1))
    if not np.isfinite(sigma) or sigma == 0.0:
        raise DegenerateSeriesError("нулевое стандартное отклонение APO для порогов")
    return -z * sigma, z * sigma


def resolve_params(params: StrategyParams, train_spread: SpreadState) -> StrategyParams:
    """Явные пороги имеют приоритет; иначе пороги из auto_thresholds по threshold_z."""
    if params.has_thresholds:
        return params
    buy, sell = auto_thresholds(train_spread, params.threshold_z)
    return params.with_thresholds(buy, sell)


def next_signal(apo_t: float, params: StrategyParams, current: Position) -> Signal:
    """
    Сигнал на баре.

    Без позиции: apo < buy - вход в long спреда, apo > sell - вход в short.
    В позиции: выход, когда apo пересекает середину полосы порогов против
    позиции (для симметричных порогов - ноль). Повторного входа нет.
    """
    if not params.has_thresholds:
        raise ConfigError('strategy.buy_threshold', "пороги не заданы: вызовите resolve_params")
    middle = (params.buy_threshold + params.sell_threshold) / 2.0

    if current.side == 0:
        if apo_t < params.buy_threshold:
            return Signal.ENTER_LONG
        if apo_t > params.sell_threshold:
            return Signal.ENTER_SHORT
        return Signal.HOLD
    if current.side > 0:
        return Signal.EXIT if apo_t >= middle else Signal.HOLD
    return Signal.EXIT if apo_t <= middle else Signal.HOLD


def position_after(signal: Signal, hedge_ratio: float, current: Position = FLAT,
                   bar: Optional[int] = None, units: float = 1.0) -> Position:
    """
    Позиция после сигнала при единичном размере.

    EnterLong: +units бумаги A и -h·units бумаги B; EnterShort - зеркально;
    Exit - плоская позиция; Hold и вход при открытой позиции - без изменений.
    Объёмы хранятся со знаком.
    """
    if not np.isfinite(hedge_ratio):
        raise ShapeError("Коэффициент хеджирования должен быть конечным")
    if signal is Signal.EXIT:
        return FLAT
    if signal is Signal.HOLD or not current.is_flat:
        return current
    side = 1 if signal is Signal.ENTER_LONG else -1
    return Position(side=side, units_a=side * units, units_b=-side * hedge_ratio * units, entry_bar=bar)


def generate_signals(apo: Sequence[float], params: StrategyParams, hedge_ratio: float = 1.0) -> List[Signal]:
    """Прогон автомата сигналов по ряду APO (позиция переносится между барами)."""
    position = FLAT
    signals = []
    for bar, value in enumerate(apo):
        signal = next_signal(float(value), params, position)
        position = position_after(signal, hedge_ratio, position, bar)
        signals.append(signal)
    return signals
