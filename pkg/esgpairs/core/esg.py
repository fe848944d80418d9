"""Описательная ESG-статистика и два подхода к отбору универсума акций."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd

from ..decorators import log_action
from .exceptions import BoundsError, ConfigError, EmptySummaryError, EmptyUniverseError
from .models import EsgTable, SelectionMethod, Universe

HISTOGRAM_EDGES = np.arange(0.0, 105.0, 5.0)


@dataclass(frozen=True)
class EsgSummary:
    """Сводка ESG-оценок на дату: средние, крайние фирмы, гистограмма."""

    as_of: str
    mean_firm_score: float
    mean_industry_score: float
    n_firms: int
    n_industries: int
    n_missing: int
    top_firm: Tuple[str, float]
    bottom_firm: Tuple[str, float]
    industry_means: Dict[str, float] = field(default_factory=dict)
    histogram: List[Tuple[float, int]] = field(default_factory=list)

    @property
    def n_scored(self) -> int:
        return self.n_firms - self.n_missing

    def to_dict(self) -> Dict[str, Any]:
        return {
            'as_of': self.as_of,
            'mean_firm_score': self.mean_firm_score,
            'mean_industry_score': self.mean_industry_score,
            'n_firms': self.n_firms,
            'n_industries': self.n_industries,
            'n_missing': self.n_missing,
            'top_firm': {'ticker': self.top_firm[0], 'score': self.top_firm[1]},
            'bottom_firm': {'ticker': self.bottom_firm[0], 'score': self.bottom_firm[1]},
            'industry_means': dict(sorted(self.industry_means.items())),
            'histogram': [{'lower': lower, 'count': count} for lower, count in self.histogram],
        }


def _scored_by_industry(esg: EsgTable, as_of: str) -> pd.DataFrame:
    """Оценённые фирмы на дату, по строке на каждую (фирма, отрасль)."""
    snapshot = esg.snapshot(as_of)
    scored = snapshot[snapshot['score'].notna()]
    exploded = scored.explode('industries').rename(columns={'industries': 'industry'})
    return exploded[exploded['industry'].notna()][['ticker', 'industry', 'score']]


def _industry_means(exploded: pd.DataFrame) -> pd.Series:
    return exploded.groupby('industry', sort=True)['score'].mean()


@log_action('SUMMARIZE')
def summarize(esg: EsgTable, as_of: str) -> EsgSummary:
    """
    Сводная ESG-статистика на месяц as_of.

    Используется последняя запись каждой фирмы не позже as_of. Пропуски
    не участвуют ни в одном среднем. Среднее по отрасли считается по всем
    фирмам, несущим метку отрасли.

    Args:
        esg: ESG-таблица
        as_of: Месяц YYYY-MM

    Returns:
        Объект EsgSummary

    Raises:
        EmptySummaryError: Если нет ни одной оценённой фирмы
    """
    snapshot = esg.snapshot(as_of)
    scored = snapshot[snapshot['score'].notna()]
    if scored.empty:
        raise EmptySummaryError(as_of)

    industry_means = _industry_means(_scored_by_industry(esg, as_of))
    ranked = scored.sort_values(['score', 'ticker'], ascending=[False, True])
    top = ranked.iloc[0]
    bottom = scored.sort_values(['score', 'ticker'], ascending=[True, True]).iloc[0]

    counts, _ = np.histogram(scored['score'].to_numpy(), bins=HISTOGRAM_EDGES)

    return EsgSummary(
        as_of=as_of,
        mean_firm_score=float(scored['score'].mean()),
        mean_industry_score=float(industry_means.mean()) if len(industry_means) else float('nan'),
        n_firms=len(snapshot),
        n_industries=len(industry_means),
        n_missing=int(snapshot['score'].isna().sum()),
        top_firm=(str(top['ticker']), float(top['score'])),
        bottom_firm=(str(bottom['ticker']), float(bottom['score'])),
        industry_means={str(k): float(v) for k, v in industry_means.items()},
        histogram=[(float(lower), int(count)) for lower, count in zip(HISTOGRAM_EDGES[:-1], counts)],
    )


def rank_industries(summary: EsgSummary, k: int) -> Tuple[List[Tuple[str, float]], List[Tuple[str, float]]]:
    """
    k отраслей с наибольшим и k с наименьшим средним баллом.

    Равные средние упорядочиваются по названию отрасли.

    Args:
        summary: Сводка
        k: Число отраслей в каждом списке

    Returns:
        Кортеж (top, bottom) из списков (отрасль, среднее)

    Raises:
        BoundsError: Если k > числа отраслей
    """
    available = len(summary.industry_means)
    if k < 1 or k > available:
        raise BoundsError(k, available)
    items = list(summary.industry_means.items())
    top = sorted(items, key=lambda item: (-item[1], item[0]))[:k]
    bottom = sorted(items, key=lambda item: (item[1], item[0]))[:k]
    return top, bottom


def monthly_means(esg: EsgTable) -> Dict[str, float]:
    """Средний балл оценённых записей по каждому месяцу (тренд ESG во времени)."""
    records = esg.records
    scored = records[records['score'].notna()]
    means = scored.groupby('month', sort=True)['score'].mean()
    return {str(month): float(value) for month, value in means.items()}


class SelectionApproach(ABC):
    """Абстрактный подход к ESG-отбору универсума."""

    def __init__(self, code: int, method: SelectionMethod, parameter_name: str):
        self.code = code
        self.method = method
        self.parameter_name = parameter_name

    @abstractmethod
    def select(self, esg: EsgTable, as_of: str, parameter: float) -> Universe:
        """
        Отбор универсума.

        Args:
            esg: ESG-таблица
            as_of: Месяц YYYY-MM
            parameter: Порог подхода (ζ или ξ)

        Returns:
            Объект Universe
        """

    def __str__(self) -> str:
        return f"Approach {self.code} - {self.method.value} ({self.parameter_name})"

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(code={self.code})"


class TopOfIndustry(SelectionApproach):
    """Подход 1: лидер отрасли по баллу, если балл строго выше ζ."""

    def __init__(self):
        super().__init__(1, SelectionMethod.TOP_OF_INDUSTRY, 'zeta')

    def select(self, esg: EsgTable, as_of: str, parameter: float) -> Universe:
        return select_top_of_industry(esg, as_of, parameter)


class AboveIndustryMean(SelectionApproach):
    """Подход 2: балл не ниже среднего по отрасли плюс ξ."""

    def __init__(self):
        super().__init__(2, SelectionMethod.ABOVE_INDUSTRY_MEAN, 'xi')

    def select(self, esg: EsgTable, as_of: str, parameter: float) -> Universe:
        return select_above_industry_mean(esg, as_of, parameter)


_approach_registry: Dict[int, SelectionApproach] = {
    approach.code: approach for approach in (TopOfIndustry(), AboveIndustryMean())
}


def get_approach(code: int) -> SelectionApproach:
    """
    Фабричный метод для получения подхода отбора по номеру.

    Raises:
        ConfigError: Если подход с таким номером не существует
    """
    try:
        return _approach_registry[int(code)]
    except (KeyError, ValueError, TypeError):
        raise ConfigError('esg.approach', f"неизвестный подход '{code}', доступны {sorted(_approach_registry)}")


@log_action('SELECT_UNIVERSE')
def select_top_of_industry(esg: EsgTable, as_of: str, zeta: float) -> Universe:
    """
    Подход 1: в каждой отрасли берётся фирма с максимальным баллом; в
    универсум попадают такие фирмы с баллом > ζ. При равенстве максимумов
    выбираются все равные фирмы.

    Raises:
        ConfigError: Если ζ вне [0, 100]
        EmptyUniverseError: Если никто не прошёл порог
    """
    if not 0 <= zeta <= 100:
        raise ConfigError('esg.zeta', "должно лежать в [0, 100]")

    exploded = _scored_by_industry(esg, as_of)
    best = exploded.groupby('industry')['score'].transform('max')
    leaders = exploded[(exploded['score'] == best) & (exploded['score'] > zeta)]
    tickers = tuple(sorted(set(leaders['ticker'])))
    if not tickers:
        raise EmptyUniverseError('zeta', zeta)
    return Universe(tickers, SelectionMethod.TOP_OF_INDUSTRY, zeta, as_of)


@log_action('SELECT_UNIVERSE')
def select_above_industry_mean(esg: EsgTable, as_of: str, xi: float) -> Universe:
    """
    Подход 2: фирмы с баллом >= среднее по отрасли + ξ. Фирма с несколькими
    отраслями проходит, если превосходит порог хотя бы в одной.

    Raises:
        ConfigError: Если ξ < 0
        EmptyUniverseError: Если никто не прошёл порог
    """
    if not xi >= 0:
        raise ConfigError('esg.xi', "должно быть неотрицательным")

    exploded = _scored_by_industry(esg, as_of)
    means = exploded.groupby('industry')['score'].transform('mean')
    # Фирма ровно на пороге проходит; среднее считается с ошибкой округления
    tolerance = 1e-9 * np.maximum(1.0, means.abs())
    passing = exploded[exploded['score'] - means >= xi - tolerance]
    tickers = tuple(sorted(set(passing['ticker'])))
    if not tickers:
        raise EmptyUniverseError('xi', xi)
    return Universe(tickers, SelectionMethod.ABOVE_INDUSTRY_MEAN, xi, as_of)
