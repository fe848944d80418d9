"""Таблицы результатов, данные для боксплотов и JSON-выгрузки."""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..decorators import log_action
from .esg import EsgSummary
from .exceptions import ConfigError, EmptyMetricError, EmptyPairsError, LoadError, OutputError
from .models import BacktestReport, PairStats

RESULTS_COLUMNS = ['pair1', 'pair2', 'sharpe', 'drawdown', 'returns']
PAIRSTATS_COLUMNS = ['pair1', 'pair2', 'hedge_ratio', 'cointegration', 'half_life', 'cross']
METRICS = ('sharpe', 'drawdown', 'returns')


def fmt(value: Optional[float]) -> str:
    """Число с 4 знаками; None и NaN печатаются как nan."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return 'nan'
    text = f"{float(value):.4f}"
    return '0.0000' if text == '-0.0000' else text


def _metric(report: BacktestReport, metric: str) -> Optional[float]:
    if metric == 'sharpe':
        return report.sharpe
    if metric == 'drawdown':
        return report.max_drawdown_pct
    if metric == 'returns':
        return report.total_return_pct
    raise ConfigError('metric', f"неизвестная метрика '{metric}', доступны {', '.join(METRICS)}")


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
    except OSError as e:
        raise OutputError(path, str(e))
    return path


def write_json(data: Any, path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, ensure_ascii=False, indent=2)
    except OSError as e:
        raise OutputError(path, str(e))
    return path


@log_action('EMIT_RESULTS')
def emit_results_table(reports: Sequence[BacktestReport], window: str, path: Path) -> Path:
    """
    Таблица результатов окна: pair1, pair2, sharpe, drawdown, returns.

    Строки упорядочены по паре; неопределённый Шарп печатается как nan.

    Raises:
        EmptyPairsError: Если отчётов окна нет
        OutputError: Если путь недоступен для записи
    """
    selected = sorted((r for r in reports if r.window == window), key=lambda r: r.sort_key)
    if not selected:
        raise EmptyPairsError(f"emit_results_{window}")
    rows = [
        {
            'pair1': r.pair.ticker_a if r.pair else '',
            'pair2': r.pair.ticker_b if r.pair else '',
            'sharpe': fmt(r.sharpe),
            'drawdown': fmt(r.max_drawdown_pct),
            'returns': fmt(r.total_return_pct),
        }
        for r in selected
    ]
    return _write_frame(pd.DataFrame(rows, columns=RESULTS_COLUMNS), path)


@log_action('EMIT_PAIRSTATS')
def emit_pairstats_table(stats: Sequence[PairStats], path: Path) -> Path:
    """
    Таблица характеристик пар: pair1, pair2, hedge_ratio, cointegration, half_life, cross.

    Все числа, включая число пересечений, печатаются с 4 знаками.
    """
    if not stats:
        raise EmptyPairsError('emit_pairstats')
    ordered = sorted(stats, key=lambda s: (s.pair.ticker_a, s.pair.ticker_b))
    rows = [
        {
            'pair1': s.pair.ticker_a,
            'pair2': s.pair.ticker_b,
            'hedge_ratio': fmt(s.hedge_ratio),
            'cointegration': fmt(s.coint_p),
            'half_life': fmt(s.half_life),
            'cross': fmt(float(s.cross_count)),
        }
        for s in ordered
    ]
    return _write_frame(pd.DataFrame(rows, columns=PAIRSTATS_COLUMNS), path)


@dataclass(frozen=True)
class BoxplotData:
    """Значения метрики и пятичисловая сводка (линейная интерполяция квантилей)."""

    metric: str
    values: Tuple[float, ...]
    excluded: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'metric': self.metric,
            'n': len(self.values),
            'excluded': self.excluded,
            'min': self.minimum,
            'q1': self.q1,
            'median': self.median,
            'q3': self.q3,
            'max': self.maximum,
            'values': list(self.values),
        }


def boxplot_summary(values: Sequence[Optional[float]], metric: str) -> BoxplotData:
    """
    Пятичисловая сводка по определённым значениям.

    Raises:
        EmptyMetricError: Если определённых значений нет
    """
    defined = [float(v) for v in values if v is not None and not math.isnan(v)]
    if not defined:
        raise EmptyMetricError(metric)
    q = np.percentile(np.asarray(defined), [0, 25, 50, 75, 100])
    return BoxplotData(metric, tuple(defined), len(values) - len(defined), *(float(x) for x in q))


@log_action('EMIT_BOXPLOT')
def emit_boxplot_data(reports: Sequence[BacktestReport], metric: str, path: Path) -> BoxplotData:
    """
    Данные боксплота по метрике отчётов в JSON.

    Raises:
        ConfigError: Если метрика неизвестна
        EmptyPairsError: Если отчётов нет
        EmptyMetricError: Если все значения не определены
    """
    if metric not in METRICS:
        raise ConfigError('metric', f"неизвестная метрика '{metric}', доступны {', '.join(METRICS)}")
    if not reports:
        raise EmptyPairsError(f"emit_boxplot_{metric}")
    ordered = sorted(reports, key=lambda r: r.sort_key)
    data = boxplot_summary([_metric(r, metric) for r in ordered], metric)
    write_json(data.to_dict(), path)
    return data


def _read_table(path: Path, columns: List[str]) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise LoadError(path, "файл не найден")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise LoadError(path, str(e))
    if list(frame.columns) != columns:
        raise LoadError(path, f"ожидаются столбцы {','.join(columns)}")
    for column in columns[2:]:
        frame[column] = pd.to_numeric(frame[column], errors='coerce')
    return frame


def load_results_table(path: Path) -> pd.DataFrame:
    """Чтение таблицы результатов; nan в столбце sharpe становится NaN."""
    return _read_table(path, RESULTS_COLUMNS)


def load_pairstats_table(path: Path) -> pd.DataFrame:
    return _read_table(path, PAIRSTATS_COLUMNS)


def load_pair_list(path: Path) -> List[Tuple[str, str]]:
    """Список пар (pair1, pair2) из CSV; остальные столбцы игнорируются."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise LoadError(path, "файл не найден")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise LoadError(path, str(e))
    if not {'pair1', 'pair2'} <= set(frame.columns):
        raise LoadError(path, "ожидаются столбцы pair1,pair2")
    pairs = [(str(a).strip(), str(b).strip()) for a, b in zip(frame['pair1'], frame['pair2'])]
    if not pairs:
        raise EmptyPairsError('load_pair_list')
    return pairs


@log_action('EXPORT_SUMMARY')
def export_summary(summary: EsgSummary, path: Path, top: Sequence[Tuple[str, float]] = (),
                   bottom: Sequence[Tuple[str, float]] = (), monthly: Optional[Dict[str, float]] = None) -> Path:
    """Сводка ESG в JSON вместе с рейтингом отраслей и средними по месяцам."""
    data = summary.to_dict()
    data['top_industries'] = [{'industry': name, 'mean': value} for name, value in top]
    data['bottom_industries'] = [{'industry': name, 'mean': value} for name, value in bottom]
    data['monthly_means'] = dict(monthly or {})
    return write_json(data, path)


def emit_monthly_means(monthly: Dict[str, float], path: Path) -> Path:
    rows = [{'month': month, 'mean_score': fmt(value)} for month, value in sorted(monthly.items())]
    return _write_frame(pd.DataFrame(rows, columns=['month', 'mean_score']), path)


def detail_path(output_dir: Path, report: BacktestReport) -> Path:
    name = f"{report.pair.ticker_a}_{report.pair.ticker_b}.json" if report.pair else 'pair.json'
    return Path(output_dir) / 'details' / report.window / name


def write_details(reports: Sequence[BacktestReport], output_dir: Path) -> List[Path]:
    """Журнал сделок и кривая капитала каждой пары: details/<window>/<pair1>_<pair2>.json."""
    return [write_json(report.to_dict(), detail_path(output_dir, report)) for report in reports]
