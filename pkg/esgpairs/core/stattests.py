"""
Статистические тесты для отбора пар: OLS, ADF, Энгл-Грейнджер,
показатель Хёрста, период полураспада, EMA и число пересечений среднего.

P-значения ADF и Энгла-Грейнджера берутся из аппроксимации поверхностей
отклика МакКиннона в statsmodels (вариант с константой без тренда;
для остатков коинтеграционной регрессии - поверхность для двух переменных).
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
import statsmodels.api as sm
from statsmodels.tsa.stattools import adfuller, coint

from .exceptions import ConfigError, DegenerateSeriesError, ShapeError, SingularRegressorError
from .models import as_float_array

LN2 = math.log(2.0)


@dataclass(frozen=True)
class OlsFit:
    intercept: float
    slope: float
    residuals: np.ndarray
    r_squared: float


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    p_value: float
    lags_used: int
    n_obs: int
    critical_values: Dict[str, float] = field(default_factory=dict)

    def is_stationary(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


@dataclass(frozen=True)
class CointResult:
    hedge_ratio: float
    intercept: float
    residuals: np.ndarray
    p_value: float
    statistic: float = float('nan')
    critical_values: Dict[str, float] = field(default_factory=dict)
    degenerate: bool = False


@dataclass(frozen=True)
class MeanReversionStats:
    """lambda_ - коэффициент возврата к среднему за бар; half_life в барах, знак сохраняется."""

    half_life: float
    lambda_: float
    hurst: float = float('nan')
    cross_count: int = 0
    infinite: bool = False


def _check_pair(y: np.ndarray, x: np.ndarray, min_length: int) -> None:
    if len(y) != len(x):
        raise ShapeError(f"Длины рядов не совпадают: {len(y)} и {len(x)}")
    if len(y) < min_length:
        raise ShapeError(f"Нужно не меньше {min_length} наблюдений, получено {len(y)}")


def ols_fit(y: Sequence[float], x: Sequence[float], with_intercept: bool = True) -> OlsFit:
    """
    Регрессия y на x методом наименьших квадратов.

    Args:
        y: Зависимый ряд
        x: Регрессор
        with_intercept: Оценивать ли свободный член

    Returns:
        Объект OlsFit; slope - коэффициент хеджирования

    Raises:
        ShapeError: Если длины различаются или меньше 3
        SingularRegressorError: Если x постоянен
    """
    y = as_float_array(y, 'y')
    x = as_float_array(x, 'x')
    _check_pair(y, x, 3)
    if np.ptp(x) == 0:
        raise SingularRegressorError()

    exog = sm.add_constant(x, has_constant='add') if with_intercept else x.reshape(-1, 1)
    result = sm.OLS(y, exog).fit()
    params = np.asarray(result.params)
    intercept = float(params[0]) if with_intercept else 0.0
    slope = float(params[-1])

    residuals = y - intercept - slope * x
    r_squared = float(result.rsquared)
    if not np.isfinite(r_squared):
        r_squared = 1.0 if np.allclose(residuals, 0.0) else 0.0
    return OlsFit(intercept, slope, residuals, min(max(r_squared, 0.0), 1.0))


def schwert_max_lags(n: int) -> int:
    """Максимальный лаг по правилу Шверта: floor(12·(n/100)^0.25)."""
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def _critical_values(raw: Dict[str, float]) -> Dict[str, float]:
    return {key: float(value) for key, value in raw.items()}


def adf_test(series: Sequence[float], max_lags: Optional[int] = None) -> AdfResult:
    """
    Расширенный тест Дики-Фуллера (константа, без тренда).

    Порядок лагов выбирается по AIC среди 0..max_lags.

    Args:
        series: Ряд
        max_lags: Максимальный лаг (по умолчанию правило Шверта)

    Returns:
        Объект AdfResult

    Raises:
        ShapeError: Если ряд короче max_lags + 10
        DegenerateSeriesError: Если ряд постоянен
    """
    values = as_float_array(series)
    n = len(values)
    if max_lags is None:
        max_lags = schwert_max_lags(n)
    if max_lags < 0:
        raise ConfigError('max_lags', "должно быть неотрицательным")
    if n < max_lags + 10:
        raise ShapeError(f"Для ADF с max_lags={max_lags} нужно не меньше {max_lags + 10} наблюдений, получено {n}")
    if np.ptp(values) == 0:
        raise DegenerateSeriesError("постоянный ряд в ADF")

    # statsmodels требует maxlag < n/2 - 1 - ntrend
    effective = max(0, min(max_lags, n // 2 - 2))
    statistic, p_value, used_lag, n_obs, critical, _ = adfuller(values, maxlag=effective, regression='c', autolag='AIC')
    return AdfResult(
        statistic=float(statistic),
        p_value=float(min(max(p_value, 0.0), 1.0)),
        lags_used=int(used_lag),
        n_obs=int(n_obs),
        critical_values=_critical_values(critical),
    )


def engle_granger(y: Sequence[float], x: Sequence[float]) -> CointResult:
    """
    Двухшаговый тест коинтеграции Энгла-Грейнджера.

    Шаг 1 - OLS y на x со свободным членом, шаг 2 - ADF на остатках
    с p-значением по поверхности МакКиннона для двух переменных.

    Args:
        y: Первый ценовой ряд
        x: Второй ценовой ряд

    Returns:
        Объект CointResult; при нулевых остатках degenerate=True и p_value=0

    Raises:
        ShapeError: Если длины различаются или меньше 30
        SingularRegressorError: Если x постоянен
    """
    y = as_float_array(y, 'y')
    x = as_float_array(x, 'x')
    _check_pair(y, x, 30)
    fit = ols_fit(y, x, with_intercept=True)

    scale = float(np.std(y)) + float(np.mean(np.abs(y)))
    if float(np.sqrt(np.mean(fit.residuals ** 2))) <= 1e-10 * scale:
        return CointResult(fit.slope, fit.intercept, fit.residuals, 0.0, degenerate=True)

    statistic, p_value, critical = coint(y, x, trend='c', autolag='aic')
    return CointResult(
        hedge_ratio=fit.slope,
        intercept=fit.intercept,
        residuals=fit.residuals,
        p_value=float(min(max(p_value, 0.0), 1.0)),
        statistic=float(statistic),
        critical_values=dict(zip(('1%', '5%', '10%'), (float(v) for v in critical))),
    )


def hurst_exponent(series: Sequence[float], min_lag: int = 2, max_lag: int = 20) -> float:
    """
    Показатель Хёрста по масштабу лаговых разностей.

    H - наклон log(sqrt(mean((y[t+τ] - y[t])²))) по log(τ), τ ∈ [min_lag, max_lag].
    H < 0.5 - возврат к среднему, ≈ 0.5 - случайное блуждание, > 0.5 - тренд.

    Raises:
        ConfigError: Если min_lag < 2 или max_lag <= min_lag
        ShapeError: Если ряд короче 2 × max_lag
        DegenerateSeriesError: Если масштаб разностей нулевой на каком-либо лаге
    """
    values = as_float_array(series)
    if min_lag < 2:
        raise ConfigError('discovery.hurst_min_lag', "должно быть >= 2")
    if max_lag <= min_lag:
        raise ConfigError('discovery.hurst_max_lag', "должно быть больше min_lag")
    if len(values) < 2 * max_lag:
        raise ShapeError(f"Для показателя Хёрста нужно не меньше {2 * max_lag} наблюдений, получено {len(values)}")

    lags = np.arange(min_lag, max_lag + 1)
    scales = np.array([np.sqrt(np.mean((values[lag:] - values[:-lag]) ** 2)) for lag in lags])
    if np.any(scales == 0):
        raise DegenerateSeriesError("нулевой масштаб разностей в оценке Хёрста")
    return float(np.polyfit(np.log(lags), np.log(scales), 1)[0])


def half_life(series: Sequence[float]) -> MeanReversionStats:
    """
    Период полураспада отклонения от среднего.

    Регрессия Δy_t на (y_{t-1} - mean(y)) со свободным членом; lambda - наклон,
    half_life = -ln(2)/lambda. Отрицательный период не обрезается.

    Raises:
        ShapeError: Если ряд короче 20
        DegenerateSeriesError: Если ряд постоянен
    """
    values = as_float_array(series)
    if len(values) < 20:
        raise ShapeError(f"Для периода полураспада нужно не меньше 20 наблюдений, получено {len(values)}")

    lagged = values[:-1] - values.mean()
    delta = np.diff(values)
    try:
        fit = ols_fit(delta, lagged, with_intercept=True)
    except SingularRegressorError:
        raise DegenerateSeriesError("постоянный ряд в оценке периода полураспада")

    lam = fit.slope
    if lam == 0.0:
        return MeanReversionStats(half_life=math.inf, lambda_=0.0, infinite=True)
    return MeanReversionStats(half_life=-LN2 / lam, lambda_=lam)


def ema(series: Sequence[float], span: int) -> np.ndarray:
    """
    Экспоненциальная скользящая средняя, α = 2/(span+1).

    Первое значение совпадает с первым наблюдением (без отбрасывания разгона).

    Raises:
        ConfigError: Если span < 1
        ShapeError: Если ряд пуст
    """
    if span < 1:
        raise ConfigError('span', "период EMA должен быть >= 1")
    values = as_float_array(series)
    if len(values) == 0:
        raise ShapeError("EMA от пустого ряда")
    return pd.Series(values).ewm(span=span, adjust=False).mean().to_numpy()


def zero_crossings(series: Sequence[float]) -> int:
    """
    Число смен знака у центрированного по среднему ряда.

    Нулевые значения наследуют предыдущий знак; у постоянного ряда 0 пересечений.
    """
    values = as_float_array(series)
    if len(values) < 2:
        raise ShapeError("Для подсчёта пересечений нужно не меньше 2 наблюдений")
    signs = np.sign(values - values.mean())
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def mean_reversion_stats(spread: Sequence[float], hurst_min_lag: int = 2, hurst_max_lag: int = 20) -> MeanReversionStats:
    """Полный набор характеристик возврата к среднему для спреда."""
    base = half_life(spread)
    return MeanReversionStats(
        half_life=base.half_life,
        lambda_=base.lambda_,
        hurst=hurst_exponent(spread, hurst_min_lag, hurst_max_lag),
        cross_count=zero_crossings(spread),
        infinite=base.infinite,
    )
