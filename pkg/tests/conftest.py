from pathlib import Path
from typing import Dict, Sequence

import numpy as np
import pandas as pd
import pytest

from esgpairs.core.models import EsgTable, PriceTable


def ar1(rng: np.random.Generator, n: int, phi: float, scale: float = 1.0) -> np.ndarray:
    shocks = rng.normal(0.0, scale, n)
    values = np.empty(n)
    values[0] = shocks[0]
    for t in range(1, n):
        values[t] = phi * values[t - 1] + shocks[t]
    return values


def random_walk(rng: np.random.Generator, n: int, start: float = 100.0, scale: float = 1.0) -> np.ndarray:
    return start + np.cumsum(rng.normal(0.0, scale, n))


def price_table(columns: Dict[str, Sequence[float]], start: str = '2020-01-01') -> PriceTable:
    n = len(next(iter(columns.values())))
    frame = pd.DataFrame({k: np.asarray(v, dtype=float) for k, v in columns.items()},
                         index=pd.bdate_range(start, periods=n))
    return PriceTable(frame)


def esg_table(rows) -> EsgTable:
    """rows: (month, ticker, 'Отрасль1;Отрасль2', score)."""
    return EsgTable.from_records(
        {'month': m, 'ticker': t, 'name': t, 'industries': tuple(ind.split(';')), 'score': s} for m, t, ind, s in rows
    )


def write_lines(path: Path, lines: Sequence[str]) -> Path:
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def cointegrated_pair(rng) -> PriceTable:
    """y = 2x + AR(1), 750 дней; x - случайное блуждание от 300."""
    x = random_walk(rng, 750, 300.0)
    y = 2.0 * x + ar1(rng, 750, 0.7)
    return price_table({'XX': x, 'YY': y})


@pytest.fixture
def prices_file(tmp_path) -> Path:
    return write_lines(tmp_path / 'prices.csv', [
        'date,ticker,close',
        '2021-01-04,AAA,10.0',
        '2021-01-04,BBB,20.0',
        '2021-01-05,AAA,10.5',
        '2021-01-05,BBB,19.5',
        '2021-01-06,AAA,11.0',
        '2021-01-06,BBB,19.0',
    ])
