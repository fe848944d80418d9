"""Поиск пар: PCA-сжатие доходностей, кластеризация OPTICS, перебор пар внутри кластеров и их оценка."""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.cluster import OPTICS
from sklearn.decomposition import PCA

from ..decorators import log_action
from .exceptions import ConfigError, DataError, DegenerateSeriesError, ShapeError
from .models import PairCandidate, PairStats, PriceTable
from .stattests import adf_test, engle_granger, mean_reversion_stats

logger = logging.getLogger(__name__)

NOISE = -1


@dataclass(frozen=True)
class ReturnsMatrix:
    """Стандартизованные дневные доходности: строка на тикер."""

    tickers: Tuple[str, ...]
    matrix: np.ndarray


@dataclass(frozen=True)
class Embedding:
    tickers: Tuple[str, ...]
    coordinates: np.ndarray
    explained_variance: np.ndarray

    @property
    def k(self) -> int:
        return self.coordinates.shape[1]


@dataclass(frozen=True)
class ClusterLabels:
    """Метки кластеров по тикерам: -1 - шум, 0..m-1 - номер кластера."""

    tickers: Tuple[str, ...]
    labels: np.ndarray

    def clusters(self) -> Dict[int, List[str]]:
        groups: Dict[int, List[str]] = {}
        for ticker, label in zip(self.tickers, self.labels):
            if label != NOISE:
                groups.setdefault(int(label), []).append(ticker)
        return {cid: sorted(members) for cid, members in sorted(groups.items())}

    def label_of(self, ticker: str) -> int:
        return int(self.labels[self.tickers.index(ticker)])

    @property
    def n_noise(self) -> int:
        return int(np.count_nonzero(self.labels == NOISE))

    @property
    def n_clusters(self) -> int:
        return len(self.clusters())


@dataclass(frozen=True)
class SelectionCriteria:
    """Пороги отбора пар; None отключает критерий."""

    coint_alpha: Optional[float] = 0.05
    min_half_life: Optional[float] = 1.0
    max_half_life: Optional[float] = None
    max_hurst: Optional[float] = 0.5
    min_cross: Optional[int] = 1
    max_pairs: Optional[int] = None
    half_window_cap: bool = True

    def accepts(self, stats: PairStats) -> bool:
        if stats.degenerate:
            return False
        if self.coint_alpha is not None and not stats.coint_p <= self.coint_alpha:
            return False
        if self.min_half_life is not None and not stats.half_life >= self.min_half_life:
            return False
        upper = self.max_half_life
        if upper is None and self.half_window_cap and stats.n_obs:
            upper = stats.n_obs / 2.0
        if upper is not None and not stats.half_life <= upper:
            return False
        if self.max_hurst is not None and not stats.hurst < self.max_hurst:
            return False
        if self.min_cross is not None and not stats.cross_count >= self.min_cross:
            return False
        return True


def build_returns_matrix(prices: PriceTable) -> ReturnsMatrix:
    """
    Простые дневные доходности r_t = p_t/p_{t-1} - 1, стандартизованные по тикеру
    к нулевому среднему и единичному стандартному отклонению.

    Raises:
        ShapeError: Если дат меньше двух или в таблице есть пропуски
        DegenerateSeriesError: Если доходности тикера постоянны (с именем тикера)
    """
    if prices.n_dates < 2:
        raise ShapeError("Для доходностей нужно не меньше двух дат")
    if prices.has_gaps:
        raise ShapeError("Таблица цен содержит пропуски: сначала выполните очистку")

    closes = prices.frame.to_numpy().T
    returns = closes[:, 1:] / closes[:, :-1] - 1.0
    means = returns.mean(axis=1, keepdims=True)
    stds = returns.std(axis=1, keepdims=True)
    for ticker, std in zip(prices.tickers, stds[:, 0]):
        if not std > 1e-12:
            raise DegenerateSeriesError("нулевая дисперсия доходностей", ticker=ticker)
    return ReturnsMatrix(tuple(prices.tickers), (returns - means) / stds)


def pca_reduce(m: ReturnsMatrix, variance_target: float = 0.90, max_dims: int = 10) -> Embedding:
    """
    Проекция тикеров на ведущие главные компоненты.

    Берётся наименьшее k, при котором накопленная доля объяснённой
    дисперсии не меньше variance_target, но не больше max_dims и не меньше 1.

    Raises:
        ShapeError: Если тикеров меньше двух или дат меньше трёх
        DegenerateSeriesError: Если ковариация нулевого ранга
    """
    matrix = np.asarray(m.matrix, dtype=float)
    if matrix.shape[0] < 2 or matrix.shape[1] < 2:
        raise ShapeError("Для PCA нужно не меньше двух тикеров и трёх дат")
    if max_dims < 1:
        raise ConfigError('discovery.max_dims', "должно быть >= 1")
    if np.allclose(matrix - matrix.mean(axis=0), 0.0):
        raise DegenerateSeriesError("ковариация нулевого ранга в PCA")

    pca = PCA(svd_solver='full').fit(matrix)
    ratios = np.clip(pca.explained_variance_ratio_, 0.0, 1.0)
    cumulative = np.cumsum(ratios)
    k = int(np.searchsorted(cumulative, variance_target - 1e-12) + 1)
    k = max(1, min(k, max_dims, len(ratios)))

    coordinates = pca.transform(matrix)[:, :k]
    return Embedding(m.tickers, coordinates, ratios[:k].copy())


def _renumber(tickers: Sequence[str], raw: np.ndarray, min_samples: int) -> np.ndarray:
    """Кластеры меньше min_samples - в шум; номера по наименьшему тикеру кластера."""
    groups: Dict[int, List[int]] = {}
    for index, label in enumerate(raw):
        if label != NOISE:
            groups.setdefault(int(label), []).append(index)
    kept = [members for members in groups.values() if len(members) >= min_samples]
    kept.sort(key=lambda members: min(tickers[i] for i in members))

    labels = np.full(len(tickers), NOISE, dtype=int)
    for cid, members in enumerate(kept):
        labels[members] = cid
    return labels


def optics_cluster(e: Embedding, min_samples: int = 3, xi: float = 0.05) -> ClusterLabels:
    """
    Кластеризация OPTICS с извлечением кластеров ξ-методом (евклидова метрика).

    Точки вне извлечённых кластеров помечаются -1. Если точек меньше
    min_samples, все точки - шум.

    Raises:
        ConfigError: Если min_samples < 2 или xi вне (0, 1)
    """
    if min_samples < 2:
        raise ConfigError('discovery.min_samples', "должно быть >= 2")
    if not 0 < xi < 1:
        raise ConfigError('discovery.xi', "должно лежать в (0, 1)")

    tickers = tuple(e.tickers)
    coordinates = np.asarray(e.coordinates, dtype=float)
    n = len(tickers)
    if n < min_samples:
        return ClusterLabels(tickers, np.full(n, NOISE, dtype=int))
    if np.allclose(coordinates, coordinates[0]):
        return ClusterLabels(tickers, np.zeros(n, dtype=int))

    model = OPTICS(min_samples=min_samples, xi=xi, metric='euclidean', cluster_method='xi').fit(coordinates)
    return ClusterLabels(tickers, _renumber(tickers, model.labels_, min_samples))


def enumerate_pairs(labels: ClusterLabels) -> List[PairCandidate]:
    """
    Все пары внутри каждого кластера: C(s, 2) пар на кластер размера s.

    Порядок: номер кластера, затем лексикографически. Шумовые тикеры не участвуют.
    """
    pairs = []
    for cid, members in labels.clusters().items():
        for ticker_a, ticker_b in itertools.combinations(members, 2):
            pairs.append(PairCandidate(ticker_a, ticker_b, cid))
    return pairs


def score_pair(train_prices: PriceTable, pair: PairCandidate, hurst_min_lag: int = 2, hurst_max_lag: int = 20) -> PairStats:
    """
    Оценка пары на обучающем окне.

    Коинтеграция проверяется на уровнях цен; спред a - h·b строится без
    свободного члена, по нему считаются период полураспада, Хёрст и пересечения.

    Returns:
        Объект PairStats (degenerate=True, если ряды линейно совпадают)
    """
    series_a = train_prices.closes(pair.ticker_a)
    series_b = train_prices.closes(pair.ticker_b)
    result = engle_granger(series_a, series_b)
    n_obs = len(series_a)

    if result.degenerate:
        return PairStats(pair, result.hedge_ratio, result.intercept, 0.0, float('nan'), float('nan'), 0, n_obs=n_obs, degenerate=True)

    spread = series_a - result.hedge_ratio * series_b
    reversion = mean_reversion_stats(spread, hurst_min_lag, hurst_max_lag)
    return PairStats(
        pair=pair,
        hedge_ratio=result.hedge_ratio,
        intercept=result.intercept,
        coint_p=result.p_value,
        half_life=reversion.half_life,
        hurst=reversion.hurst,
        cross_count=reversion.cross_count,
        spread_adf_p=adf_test(spread).p_value,
        n_obs=n_obs,
    )


@log_action('SCORE_PAIRS')
def score_pairs(train_prices: PriceTable, candidates: Sequence[PairCandidate], workers: int = 4,
                hurst_min_lag: int = 2, hurst_max_lag: int = 20) -> List[PairStats]:
    """
    Параллельная оценка кандидатов. Пары с вырожденными данными пропускаются
    с предупреждением; результат отсортирован по паре.
    """
    def _score(pair: PairCandidate) -> Optional[PairStats]:
        try:
            return score_pair(train_prices, pair, hurst_min_lag, hurst_max_lag)
        except DataError as e:
            logger.warning(f"SCORE_PAIR pair='{pair.label}' skipped='{e}'")
            return None

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        results = list(executor.map(_score, candidates))
    return sorted((r for r in results if r is not None), key=lambda s: (s.pair.ticker_a, s.pair.ticker_b))


def filter_pairs(stats: Sequence[PairStats], criteria: SelectionCriteria) -> List[PairStats]:
    """
    Пары, удовлетворяющие всем включённым критериям; исходный порядок сохраняется.

    При max_pairs остаются лучшие по p-значению коинтеграции (затем по паре).
    """
    survivors = [s for s in stats if criteria.accepts(s)]
    if criteria.max_pairs is not None and len(survivors) > criteria.max_pairs:
        ranked = sorted(survivors, key=lambda s: (s.coint_p, s.pair.ticker_a, s.pair.ticker_b))
        keep = {s.pair for s in ranked[:criteria.max_pairs]}
        survivors = [s for s in survivors if s.pair in keep]
    return survivors


def discover_candidates(prices: PriceTable, variance_target: float = 0.90, max_dims: int = 10,
                        min_samples: int = 3, xi: float = 0.05) -> Tuple[Embedding, ClusterLabels, List[PairCandidate]]:
    """PCA → OPTICS → перебор пар для таблицы цен универсума."""
    embedding = pca_reduce(build_returns_matrix(prices), variance_target, max_dims)
    labels = optics_cluster(embedding, min_samples, xi)
    logger.info(f"DISCOVER dims={embedding.k} clusters={labels.n_clusters} noise={labels.n_noise}")
    return embedding, labels, enumerate_pairs(labels)
