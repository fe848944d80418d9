"""
Синтетический рынок с заложенными коинтегрированными парами.

Тикеры разбиты на кластеры по пять; у каждого кластера общий фактор
(случайное блуждание логарифма цены). Внутри первых n_pairs кластеров
вторая бумага строится как a = h·b + u, где u - стационарный AR(1).
ESG-оценки одинаковы внутри отрасли-кластера, поэтому оба подхода
отбора оставляют все торгуемые тикеры; дополнительные фирмы без цен
получают заниженные оценки.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from ..decorators import log_action
from .config import PipelineConfig
from .exceptions import ConfigError, OutputError
from .ingest import INDUSTRY_SEPARATOR
from .models import EsgTable, PairCandidate, PriceTable

logger = logging.getLogger(__name__)

CLUSTER_SIZE = 5
START_DATE = '2019-01-01'
N_MONTHS = 12
FACTOR_VOLATILITY = 0.02
IDIOSYNCRATIC_VOLATILITY = 0.003


@dataclass
class SyntheticMarket:
    prices: PriceTable
    esg: EsgTable
    planted: List[PairCandidate] = field(default_factory=list)
    hedge_ratios: Dict[str, float] = field(default_factory=dict)
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def planted_labels(self) -> List[str]:
        return [pair.label for pair in self.planted]


def _ticker(index: int) -> str:
    return f"S{index + 1:02d}"


def _ar1(rng: np.random.Generator, n: int, phi: float, scale: float) -> np.ndarray:
    shocks = rng.normal(0.0, scale, n)
    values = np.empty(n)
    values[0] = shocks[0] / np.sqrt(1.0 - phi ** 2)
    for t in range(1, n):
        values[t] = phi * values[t - 1] + shocks[t]
    return values


@log_action('SYNTH')
def generate_market(n_tickers: int = 20, n_pairs: int = 3, n_days: int = 750, phi: float = 0.7,
                    noise_scale: float = 1.0, n_firms_extra: int = 0, seed: int = 42) -> SyntheticMarket:
    """
    Генерация цен и ESG-таблицы.

    Args:
        n_tickers: Число торгуемых тикеров
        n_pairs: Число заложенных пар (по одной в кластере)
        n_days: Число торговых дней
        phi: Коэффициент AR(1) спреда пары
        noise_scale: Стандартное отклонение инноваций спреда
        n_firms_extra: Число фирм только с ESG-оценкой
        seed: Зерно генератора

    Returns:
        Объект SyntheticMarket
    """
    n_clusters = max(1, n_tickers // CLUSTER_SIZE)
    if n_pairs > n_clusters:
        raise ConfigError('synth.n_pairs', f"не больше одного на кластер: кластеров {n_clusters}")
    if not -1 < phi < 1:
        raise ConfigError('synth.phi', "должно лежать в (-1, 1)")

    rng = np.random.default_rng(seed)
    dates = pd.bdate_range(START_DATE, periods=n_days)
    tickers = [_ticker(i) for i in range(n_tickers)]
    cluster_of = {ticker: min(i // CLUSTER_SIZE, n_clusters - 1) for i, ticker in enumerate(tickers)}

    factors = np.cumsum(rng.normal(0.0, FACTOR_VOLATILITY, (n_clusters, n_days)), axis=1)
    closes: Dict[str, np.ndarray] = {}
    for ticker in tickers:
        idiosyncratic = np.cumsum(rng.normal(0.0, IDIOSYNCRATIC_VOLATILITY, n_days))
        closes[ticker] = 100.0 * np.exp(factors[cluster_of[ticker]] + idiosyncratic)

    planted, hedge_ratios = [], {}
    for cid in range(n_pairs):
        members = [t for t in tickers if cluster_of[t] == cid]
        base, derived = members[0], members[1]
        h = float(rng.uniform(1.0, 2.0))
        closes[derived] = h * closes[base] + _ar1(rng, n_days, phi, noise_scale)
        pair = PairCandidate(*sorted((base, derived)), cid)
        planted.append(pair)
        hedge_ratios[pair.label] = h if pair.ticker_a == derived else 1.0 / h

    frame = pd.DataFrame(closes, index=dates)
    prices = PriceTable(frame)
    esg = _build_esg(rng, tickers, cluster_of, n_clusters, n_firms_extra)
    params = {
        'n_tickers': n_tickers, 'n_pairs': n_pairs, 'n_days': n_days, 'phi': phi,
        'noise_scale': noise_scale, 'n_firms_extra': n_firms_extra, 'seed': seed,
    }
    logger.info(f"SYNTH planted={[p.label for p in planted]}")
    return SyntheticMarket(prices, esg, planted, hedge_ratios, params)


def _build_esg(rng: np.random.Generator, tickers: List[str], cluster_of: Dict[str, int],
               n_clusters: int, n_firms_extra: int) -> EsgTable:
    months = [f"{START_DATE[:4]}-{m:02d}" for m in range(1, N_MONTHS + 1)]
    industry_score = {cid: 60.0 + (5.0 * cid) % 40 for cid in range(n_clusters)}

    rows = []
    for ticker in tickers:
        cid = cluster_of[ticker]
        for month in months:
            rows.append({'month': month, 'ticker': ticker, 'name': f"Firm {ticker}",
                         'industries': (f"Industry-{cid + 1}",), 'score': industry_score[cid]})
    for i in range(n_firms_extra):
        ticker = f"X{i + 1:02d}"
        cid = int(rng.integers(0, n_clusters))
        score = float(np.round(rng.uniform(10.0, 45.0), 1))
        for month in months:
            rows.append({'month': month, 'ticker': ticker, 'name': f"Firm {ticker}",
                         'industries': (f"Industry-{cid + 1}",), 'score': score})
    return EsgTable.from_records(rows)


def save_esg(esg: EsgTable, path: Path, delimiter: str = ',') -> Path:
    """Запись ESG-таблицы в CSV (month, ticker, name, industry, score)."""
    records = esg.records.copy()
    records['industry'] = records['industries'].map(INDUSTRY_SEPARATOR.join)
    records['score'] = records['score'].map(lambda s: '' if pd.isna(s) else repr(float(s)))
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        records[['month', 'ticker', 'name', 'industry', 'score']].to_csv(path, sep=delimiter, index=False)
    except OSError as e:
        raise OutputError(path, str(e))
    return path


def write_market(market: SyntheticMarket, output_dir: Path, config_values: Optional[Dict[str, Any]] = None) -> Tuple[Path, Path, Path]:
    """
    Запись рынка на диск: prices.csv, esg.csv и config.json, указывающий на них.

    Returns:
        Пути (prices, esg, config)
    """
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        prices_path = market.prices.save(output_dir / 'prices.csv')
    except OSError as e:
        raise OutputError(output_dir / 'prices.csv', str(e))
    esg_path = save_esg(market.esg, output_dir / 'esg.csv')

    values = dict(config_values or {})
    values.update({
        'run.prices': str(prices_path),
        'run.esg': str(esg_path),
        'run.seed': market.params['seed'],
        **{f"synth.{key}": value for key, value in market.params.items() if key != 'seed'},
    })
    try:
        config_path = PipelineConfig(values).save(output_dir / 'config.json')
    except OSError as e:
        raise OutputError(output_dir / 'config.json', str(e))
    return prices_path, esg_path, config_path
