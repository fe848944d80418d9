"""Загрузка, проверка, очистка и выравнивание цен и ESG-оценок."""

import logging
import math
import re
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from ..decorators import log_action
from .exceptions import EmptyInputError, EmptyUniverseError, LoadError, ShapeError, SplitError
from .models import CleaningPolicy, EsgTable, PriceTable

logger = logging.getLogger(__name__)

PRICE_COLUMNS = ['date', 'ticker', 'close']
ESG_COLUMNS = ['month', 'ticker', 'name', 'industry', 'score']
INDUSTRY_SEPARATOR = ';'

MONTH_RE = re.compile(r'^\d{4}-(0[1-9]|1[0-2])$')
DATE_PATTERN = r'\d{4}-\d{2}-\d{2}'


def _read_delimited(path: Path, delimiter: str, required: list) -> pd.DataFrame:
    """Чтение текстового файла с заголовком; все значения как строки."""
    if not path.exists():
        raise LoadError(path, "файл не найден")
    try:
        raw = pd.read_csv(path, sep=delimiter, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise EmptyInputError(path)
    except (OSError, UnicodeDecodeError, pd.errors.ParserError) as e:
        raise LoadError(path, str(e)) from e

    raw.columns = [str(c).strip().lower() for c in raw.columns]
    missing = [c for c in required if c not in raw.columns]
    if missing:
        raise LoadError(path, f"нет столбцов {missing}")
    return raw[required].apply(lambda col: col.str.strip())


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return float('nan')


@log_action('LOAD_PRICES')
def load_prices(path: Path, delimiter: str = ',') -> PriceTable:
    """
    Загрузка файла цен закрытия (date,ticker,close).

    Строки с неположительной, нечисловой ценой или некорректной датой
    отбрасываются и подсчитываются. Повторы (дата, тикер) тоже отбрасываются,
    остаётся первая запись.

    Args:
        path: Путь к файлу
        delimiter: Разделитель столбцов

    Returns:
        Объект PriceTable (возможно, с пропусками)

    Raises:
        LoadError: Если файл не читается
        EmptyInputError: Если нет ни одной корректной строки
    """
    path = Path(path)
    raw = _read_delimited(path, delimiter, PRICE_COLUMNS)

    # Только дневные даты: метки с временем суток отбрасываются
    dates = pd.to_datetime(raw['date'].where(raw['date'].str.fullmatch(DATE_PATTERN)), format='%Y-%m-%d', errors='coerce')
    closes = raw['close'].map(_parse_float).astype(float)
    tickers = raw['ticker']

    valid = dates.notna() & np.isfinite(closes) & (closes > 0) & (tickers != '')
    rows = pd.DataFrame({'date': dates, 'ticker': tickers, 'close': closes})[valid]

    duplicated = rows.duplicated(subset=['date', 'ticker'], keep='first')
    rows = rows[~duplicated]
    dropped = int((~valid).sum() + duplicated.sum())

    if rows.empty:
        raise EmptyInputError(path, dropped)
    if dropped:
        logger.warning(f"LOAD_PRICES path='{path}' dropped={dropped}")

    wide = rows.pivot(index='date', columns='ticker', values='close')
    wide.columns.name = None
    return PriceTable(wide, dropped=dropped)


@log_action('CLEAN')
def clean_and_align(raw: PriceTable, policy: CleaningPolicy) -> PriceTable:
    """
    Очистка и выравнивание цен по политике.

    Тикеры с историей короче min_history_days удаляются. При
    require_full_history удаляется любой тикер с пропуском; иначе
    удаляются даты, на которых хотя бы у одного выжившего тикера нет цены.

    Args:
        raw: Исходная таблица цен
        policy: Политика очистки

    Returns:
        Таблица без пропусков

    Raises:
        EmptyUniverseError: Если отсеяны все тикеры (с именем поля политики)
    """
    if raw.n_tickers == 0 or raw.n_dates == 0:
        raise ShapeError("Таблица цен пуста")

    frame = raw.frame
    lengths = frame.notna().sum()
    frame = frame.loc[:, lengths >= policy.min_history_days]
    if frame.shape[1] == 0:
        raise EmptyUniverseError('min_history_days', policy.min_history_days)

    if policy.require_full_history:
        complete = frame.notna().all()
        eliminated = sorted(frame.columns[~complete])
        frame = frame.loc[:, complete]
        if eliminated:
            logger.warning(f"CLEAN eliminated={len(eliminated)} tickers='{','.join(eliminated)}'")
        if frame.shape[1] == 0:
            raise EmptyUniverseError('require_full_history', True)
    else:
        frame = frame.dropna(axis=0, how='any')

    if len(frame.index) < policy.min_history_days:
        raise EmptyUniverseError('min_history_days', policy.min_history_days)

    return PriceTable(frame, dropped=raw.dropped)


@log_action('LOAD_ESG')
def load_esg(path: Path, policy: Optional[CleaningPolicy] = None, delimiter: str = ',') -> EsgTable:
    """
    Загрузка помесячных ESG-оценок (month,ticker,name,industry,score).

    Пустая оценка - пропуск. При missing_score_is_absent оценка ровно 0
    тоже считается пропуском. Оценки вне [0, 100], нечисловые оценки и
    некорректные месяцы отклоняются и подсчитываются.

    Args:
        path: Путь к файлу
        policy: Политика (по умолчанию CleaningPolicy())
        delimiter: Разделитель столбцов

    Returns:
        Объект EsgTable

    Raises:
        LoadError: Если файл не читается
        DuplicateRecordError: Если (ticker, month) повторяется
    """
    path = Path(path)
    policy = policy or CleaningPolicy()
    raw = _read_delimited(path, delimiter, ESG_COLUMNS)

    scores = raw['score'].map(lambda s: float('nan') if s == '' else _parse_float(s)).astype(float)
    blank = raw['score'] == ''
    month_ok = raw['month'].map(lambda m: bool(MONTH_RE.match(m)))
    score_ok = blank | (np.isfinite(scores) & (scores >= 0) & (scores <= 100))
    valid = month_ok & score_ok & (raw['ticker'] != '')
    rejected = int((~valid).sum())
    if rejected:
        logger.warning(f"LOAD_ESG path='{path}' rejected={rejected}")

    kept = raw[valid]
    scores = scores[valid]
    if policy.missing_score_is_absent:
        scores = scores.mask(scores == 0.0)

    industries = kept['industry'].map(
        lambda s: tuple(label.strip() for label in s.split(INDUSTRY_SEPARATOR) if label.strip())
    )
    records = pd.DataFrame({
        'month': kept['month'],
        'ticker': kept['ticker'],
        'name': kept['name'],
        'industries': industries,
        'score': scores,
    })
    if records.empty:
        raise EmptyInputError(path, rejected)
    return EsgTable(records, rejected=rejected)


@log_action('SPLIT')
def train_test_split(table: PriceTable, train_fraction: float = 0.7) -> Tuple[PriceTable, PriceTable]:
    """
    Хронологическое разбиение на обучающую и тестовую части.

    Обучающая часть - первые ceil(train_fraction × n) дат, тестовая - остаток.

    Args:
        table: Очищенная таблица цен
        train_fraction: Доля обучающих дат, (0, 1)

    Returns:
        Кортеж (train, test)

    Raises:
        SplitError: Если одна из частей пуста
    """
    n_dates = table.n_dates
    if n_dates < 4:
        raise SplitError(train_fraction, n_dates)
    # round() гасит ошибку представления вида 0.7 * 10 = 7.000000000000001
    n_train = math.ceil(round(train_fraction * n_dates, 9))
    if not 0 < train_fraction < 1 or n_train < 1 or n_train >= n_dates:
        raise SplitError(train_fraction, n_dates)
    return table.slice_dates(0, n_train), table.slice_dates(n_train, None)
