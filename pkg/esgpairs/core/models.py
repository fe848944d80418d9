import math
from dataclasses import asdict, dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .exceptions import ConfigError, DataError, DuplicateRecordError


class PriceTable:
    """Выровненные дневные цены закрытия по тикерам с общим торговым календарём."""

    def __init__(self, frame: pd.DataFrame, dropped: int = 0):
        """
        Инициализация таблицы цен.

        Args:
            frame: Широкая таблица (даты × тикеры); NaN означает пропуск
            dropped: Число строк, отброшенных при загрузке
        """
        if not isinstance(frame.index, pd.DatetimeIndex):
            raise DataError("Индекс таблицы цен должен состоять из дат")
        if not frame.index.is_unique:
            raise DataError("В календаре есть повторяющиеся даты")

        frame = frame.sort_index().sort_index(axis=1).astype(float)
        frame.columns = [str(c) for c in frame.columns]
        frame.index.name = 'date'

        values = frame.to_numpy()
        present = ~np.isnan(values)
        if np.any(present & ~(np.isfinite(values) & (values > 0))):
            raise DataError("Цены закрытия должны быть положительными и конечными")

        self._frame = frame
        self._dropped = int(dropped)

    @property
    def frame(self) -> pd.DataFrame:
        """Геттер, который возвращает копию широкой таблицы."""
        return self._frame.copy()

    @property
    def calendar(self) -> List[date]:
        return [ts.date() for ts in self._frame.index]

    @property
    def tickers(self) -> List[str]:
        return list(self._frame.columns)

    @property
    def n_dates(self) -> int:
        return len(self._frame.index)

    @property
    def n_tickers(self) -> int:
        return len(self._frame.columns)

    @property
    def n_rows(self) -> int:
        """Число присутствующих наблюдений (дата, тикер)."""
        return int(self._frame.notna().to_numpy().sum())

    @property
    def dropped(self) -> int:
        return self._dropped

    @property
    def has_gaps(self) -> bool:
        return bool(self._frame.isna().to_numpy().any())

    def closes(self, ticker: str) -> np.ndarray:
        """
        Цены закрытия тикера в порядке календаря.

        Args:
            ticker: Тикер

        Returns:
            Массив цен (NaN на пропусках)
        """
        if ticker not in self._frame.columns:
            raise KeyError(f"Тикер '{ticker}' отсутствует в таблице цен")
        return self._frame[ticker].to_numpy(copy=True)

    def history_length(self, ticker: str) -> int:
        return int(self._frame[ticker].notna().sum())

    def select(self, tickers: Iterable[str]) -> 'PriceTable':
        """Подтаблица с указанными тикерами (календарь не меняется)."""
        wanted = sorted(set(tickers))
        missing = [t for t in wanted if t not in self._frame.columns]
        if missing:
            raise KeyError(f"Тикеры отсутствуют в таблице цен: {missing}")
        return PriceTable(self._frame[wanted], dropped=self._dropped)

    def slice_dates(self, start: int, stop: Optional[int] = None) -> 'PriceTable':
        """Подтаблица по позициям календаря [start, stop)."""
        return PriceTable(self._frame.iloc[start:stop], dropped=self._dropped)

    def to_long_frame(self) -> pd.DataFrame:
        """Длинный формат date,ticker,close без пропусков."""
        long = self._frame.reset_index().melt(id_vars='date', var_name='ticker', value_name='close')
        long = long.dropna(subset=['close'])
        return long.sort_values(['date', 'ticker']).reset_index(drop=True)

    def save(self, path: Path, delimiter: str = ',') -> Path:
        """
        Сериализация в файл цен (date,ticker,close).

        Args:
            path: Путь к файлу
            delimiter: Разделитель столбцов

        Returns:
            Путь к записанному файлу
        """
        path = Path(path)
        long = self.to_long_frame()
        long['date'] = long['date'].dt.strftime('%Y-%m-%d')
        long.to_csv(path, sep=delimiter, index=False)
        return path

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PriceTable):
            return NotImplemented
        return self._frame.shape == other._frame.shape and self._frame.equals(other._frame)

    def __len__(self) -> int:
        return self.n_dates

    def __contains__(self, ticker: str) -> bool:
        return ticker in self._frame.columns

    def __str__(self) -> str:
        if self.n_dates == 0:
            return f"PriceTable(tickers={self.n_tickers}, dates=0)"
        first, last = self.calendar[0], self.calendar[-1]
        return f"PriceTable(tickers={self.n_tickers}, dates={self.n_dates}, {first}..{last})"

    def __repr__(self) -> str:
        return f"PriceTable(n_tickers={self.n_tickers}, n_dates={self.n_dates}, dropped={self._dropped})"


class EsgTable:
    """Помесячные ESG-оценки фирм с принадлежностью к отраслям."""

    COLUMNS = ['month', 'ticker', 'name', 'industries', 'score']

    def __init__(self, records: pd.DataFrame, rejected: int = 0):
        """
        Инициализация ESG-таблицы.

        Args:
            records: Таблица со столбцами month, ticker, name, industries, score
            rejected: Число отклонённых при загрузке строк
        """
        missing = [c for c in self.COLUMNS if c not in records.columns]
        if missing:
            raise DataError(f"В ESG-таблице нет столбцов: {missing}")

        records = records[self.COLUMNS].copy()
        records['industries'] = records['industries'].map(_as_labels)
        records['score'] = records['score'].astype(float)

        scores = records['score'].dropna()
        if ((scores < 0) | (scores > 100)).any():
            raise DataError("ESG-оценка должна лежать в [0, 100]")

        duplicated = records.duplicated(subset=['ticker', 'month'], keep=False)
        if duplicated.any():
            offenders = set(records.loc[duplicated, ['ticker', 'month']].itertuples(index=False, name=None))
            raise DuplicateRecordError(offenders)

        self._records = records.sort_values(['month', 'ticker']).reset_index(drop=True)
        self._rejected = int(rejected)

    @classmethod
    def from_records(cls, rows: Iterable[Dict[str, Any]], rejected: int = 0) -> 'EsgTable':
        """
        Создание таблицы из списка словарей.

        Args:
            rows: Записи с ключами month, ticker, name, industries, score

        Returns:
            Объект EsgTable
        """
        frame = pd.DataFrame(list(rows), columns=cls.COLUMNS)
        frame['industries'] = frame['industries'].map(_as_labels)
        frame['score'] = pd.to_numeric(frame['score'], errors='coerce')
        return cls(frame, rejected=rejected)

    @property
    def records(self) -> pd.DataFrame:
        """Геттер, который возвращает копию записей."""
        return self._records.copy()

    @property
    def rejected(self) -> int:
        return self._rejected

    @property
    def n_rows(self) -> int:
        return len(self._records)

    @property
    def tickers(self) -> List[str]:
        return sorted(self._records['ticker'].unique())

    @property
    def months(self) -> List[str]:
        return sorted(self._records['month'].unique())

    def snapshot(self, as_of: str) -> pd.DataFrame:
        """
        Последняя запись каждой фирмы не позже указанного месяца.

        Args:
            as_of: Месяц в формате YYYY-MM

        Returns:
            Таблица с одной строкой на тикер
        """
        visible = self._records[self._records['month'] <= as_of]
        latest = visible.sort_values(['ticker', 'month']).groupby('ticker', sort=True).tail(1)
        return latest.sort_values('ticker').reset_index(drop=True)

    def __len__(self) -> int:
        return self.n_rows

    def __repr__(self) -> str:
        return f"EsgTable(rows={self.n_rows}, firms={len(self.tickers)}, rejected={self._rejected})"


class CleaningPolicy:
    """Политика очистки ценовых рядов."""

    def __init__(self, require_full_history: bool = True, min_history_days: int = 2,
                 missing_score_is_absent: bool = True):
        self.require_full_history = bool(require_full_history)
        self.min_history_days = min_history_days
        self.missing_score_is_absent = bool(missing_score_is_absent)

    @property
    def min_history_days(self) -> int:
        return self._min_history_days

    @min_history_days.setter
    def min_history_days(self, value: int) -> None:
        if not isinstance(value, int) or value < 2:
            raise ConfigError('ingest.min_history_days', "должно быть целым числом >= 2")
        self._min_history_days = value

    def to_dict(self) -> Dict[str, Any]:
        return {
            'require_full_history': self.require_full_history,
            'min_history_days': self._min_history_days,
            'missing_score_is_absent': self.missing_score_is_absent,
        }

    def __repr__(self) -> str:
        return f"CleaningPolicy({self.to_dict()})"


class SelectionMethod(str, Enum):
    TOP_OF_INDUSTRY = 'TopOfIndustry'
    ABOVE_INDUSTRY_MEAN = 'AboveIndustryMean'


@dataclass(frozen=True)
class Universe:
    """Универсум акций, прошедших ESG-отбор."""

    tickers: Tuple[str, ...]
    method: SelectionMethod
    parameter: float
    as_of: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            'tickers': list(self.tickers),
            'method': self.method.value,
            'parameter': self.parameter,
            'as_of': self.as_of,
        }

    def __len__(self) -> int:
        return len(self.tickers)


@dataclass(frozen=True, order=True)
class PairCandidate:
    """Пара-кандидат из одного кластера (ticker_a < ticker_b)."""

    ticker_a: str
    ticker_b: str
    cluster_id: int = -1

    def __post_init__(self):
        if self.ticker_a >= self.ticker_b:
            raise ValueError(f"Пара должна быть упорядочена: '{self.ticker_a}' < '{self.ticker_b}'")

    @property
    def label(self) -> str:
        return f"{self.ticker_a}/{self.ticker_b}"


@dataclass(frozen=True)
class PairStats:
    """Статистики пары на обучающем окне (столбцы таблицы коинтеграции)."""

    pair: PairCandidate
    hedge_ratio: float
    intercept: float
    coint_p: float
    half_life: float
    hurst: float
    cross_count: int
    spread_adf_p: float = float('nan')
    n_obs: int = 0
    degenerate: bool = False

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['pair'] = {'ticker_a': self.pair.ticker_a, 'ticker_b': self.pair.ticker_b, 'cluster_id': self.pair.cluster_id}
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PairStats':
        values = dict(data)
        values['pair'] = PairCandidate(**values['pair'])
        return cls(**values)


@dataclass(frozen=True)
class StrategyParams:
    """Параметры APO-стратегии: периоды EMA и пороги входа."""

    fast_span: int = 10
    slow_span: int = 40
    buy_threshold: Optional[float] = None
    sell_threshold: Optional[float] = None
    threshold_z: Optional[float] = 1.0

    def __post_init__(self):
        if self.fast_span < 1 or self.slow_span < 1:
            raise ConfigError('strategy.fast_span', "периоды EMA должны быть >= 1")
        if self.fast_span >= self.slow_span:
            raise ConfigError('strategy.slow_span', f"быстрый период {self.fast_span} должен быть меньше медленного {self.slow_span}")
        if (self.buy_threshold is None) != (self.sell_threshold is None):
            raise ConfigError('strategy.buy_threshold', "пороги покупки и продажи задаются вместе")
        if self.buy_threshold is not None and not self.buy_threshold < self.sell_threshold:
            raise ConfigError('strategy.buy_threshold', "порог покупки должен быть меньше порога продажи")
        if self.buy_threshold is None and (self.threshold_z is None or self.threshold_z <= 0):
            raise ConfigError('strategy.threshold_z', "без явных порогов нужен threshold_z > 0")

    @property
    def has_thresholds(self) -> bool:
        return self.buy_threshold is not None

    def with_thresholds(self, buy: float, sell: float) -> 'StrategyParams':
        return StrategyParams(self.fast_span, self.slow_span, buy, sell, self.threshold_z)


class Signal(str, Enum):
    ENTER_LONG = 'EnterLong'
    ENTER_SHORT = 'EnterShort'
    EXIT = 'Exit'
    HOLD = 'Hold'


@dataclass(frozen=True)
class Position:
    """Позиция по паре: side=+1 - long S1/short S2, side=-1 - наоборот."""

    side: int = 0
    units_a: float = 0.0
    units_b: float = 0.0
    entry_bar: Optional[int] = None

    def __post_init__(self):
        if self.side not in (-1, 0, 1):
            raise ValueError("Сторона позиции должна быть -1, 0 или +1")
        if (self.side == 0) != (self.units_a == 0 and self.units_b == 0):
            raise ValueError("Плоская позиция должна иметь нулевые объёмы")

    @property
    def is_flat(self) -> bool:
        return self.side == 0


FLAT = Position()


@dataclass(frozen=True)
class ExecutionParams:
    """Параметры исполнения: комиссия, капитал, аннуализация."""

    commission_rate: float = 0.001
    initial_capital: float = 1000.0
    annualization_factor: int = 252
    trade_units: float = 1.0
    slippage: float = 0.0

    def __post_init__(self):
        if self.commission_rate < 0:
            raise ConfigError('backtest.commission_rate', "комиссия не может быть отрицательной")
        if not self.initial_capital > 0:
            raise ConfigError('backtest.initial_capital', "начальный капитал должен быть положительным")
        if self.annualization_factor < 1:
            raise ConfigError('backtest.annualization_factor', "должно быть >= 1")
        if not self.trade_units > 0:
            raise ConfigError('backtest.trade_units', "объём должен быть положительным")
        if self.slippage < 0:
            raise ConfigError('backtest.slippage', "проскальзывание не может быть отрицательным")


class TradeAction(str, Enum):
    OPEN_LONG = 'open_long'
    OPEN_SHORT = 'open_short'
    CLOSE = 'close'


@dataclass(frozen=True)
class Trade:
    """Сделка по обеим ногам пары на одном баре."""

    bar: int
    action: TradeAction
    price_a: float
    price_b: float
    units_a: float
    units_b: float
    commission_paid: float

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['action'] = self.action.value
        return data


@dataclass
class BacktestReport:
    """Результат бэктеста одной пары на одном окне."""

    pair: Optional[PairCandidate]
    window: str
    equity_curve: np.ndarray
    trades: List[Trade] = field(default_factory=list)
    sharpe: Optional[float] = None
    max_drawdown_pct: float = 0.0
    total_return_pct: float = 0.0
    hedge_ratio: float = float('nan')

    @property
    def n_trades(self) -> int:
        return len(self.trades)

    @property
    def sort_key(self) -> Tuple[str, str]:
        if self.pair is None:
            return ('', '')
        return (self.pair.ticker_a, self.pair.ticker_b)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'pair1': self.pair.ticker_a if self.pair else None,
            'pair2': self.pair.ticker_b if self.pair else None,
            'window': self.window,
            'hedge_ratio': self.hedge_ratio,
            'sharpe': None if self.sharpe is None or math.isnan(self.sharpe) else self.sharpe,
            'max_drawdown_pct': self.max_drawdown_pct,
            'total_return_pct': self.total_return_pct,
            'equity_curve': [float(v) for v in self.equity_curve],
            'trades': [t.to_dict() for t in self.trades],
        }

    def __repr__(self) -> str:
        label = self.pair.label if self.pair else '-'
        return f"BacktestReport(pair={label}, window={self.window}, trades={self.n_trades})"


def as_float_array(values: Sequence[float], name: str = 'series') -> np.ndarray:
    """Приведение последовательности к одномерному массиву float."""
    array = np.asarray(values, dtype=float)
    if array.ndim != 1:
        raise DataError(f"'{name}' должен быть одномерным рядом")
    return array


def _as_labels(value: Any) -> Tuple[str, ...]:
    if isinstance(value, str):
        return (value,)
    return tuple(value)
