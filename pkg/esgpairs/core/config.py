"""Конфигурация конвейера: плоские ключи с точками, файл JSON, переопределения флагами."""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from .discovery import SelectionCriteria
from .exceptions import ConfigError, LoadError
from .ingest import MONTH_RE
from .models import CleaningPolicy, ExecutionParams, StrategyParams

logger = logging.getLogger(__name__)

SEED_ENV = 'ESGPAIRS_SEED'
STAGES = ('all', 'esg', 'screen')

DEFAULTS: Dict[str, Any] = {
    'ingest.train_fraction': 0.7,
    'ingest.min_history_days': 2,
    'ingest.require_full_history': True,
    'ingest.missing_score_is_absent': True,
    'ingest.delimiter': ',',
    'esg.approach': 1,
    'esg.zeta': 50.0,
    'esg.xi': 0.0,
    'esg.as_of': None,
    'esg.rank_k': 5,
    'discovery.variance_target': 0.90,
    'discovery.max_dims': 10,
    'discovery.min_samples': 3,
    'discovery.xi': 0.05,
    'discovery.coint_alpha': 0.05,
    'discovery.min_half_life': 1.0,
    'discovery.max_half_life': None,
    'discovery.max_hurst': 0.5,
    'discovery.min_cross': 1,
    'discovery.hurst_min_lag': 2,
    'discovery.hurst_max_lag': 20,
    'discovery.max_pairs': None,
    'strategy.fast_span': 10,
    'strategy.slow_span': 40,
    'strategy.threshold_z': 1.0,
    'strategy.buy_threshold': None,
    'strategy.sell_threshold': None,
    'backtest.commission_rate': 0.001,
    'backtest.initial_capital': 1000.0,
    'backtest.annualization_factor': 252,
    'backtest.trade_units': 1.0,
    'backtest.slippage': 0.0,
    'run.output_dir': 'output',
    'run.seed': 42,
    'run.stages': 'all',
    'run.workers': 4,
    'run.prices': None,
    'run.esg': None,
    'synth.n_tickers': 20,
    'synth.n_pairs': 3,
    'synth.n_days': 750,
    'synth.phi': 0.7,
    'synth.noise_scale': 1.0,
    'synth.n_firms_extra': 0,
}

# Ключи, допускающие null
_NULLABLE = {
    'esg.as_of', 'discovery.max_half_life', 'discovery.max_pairs',
    'strategy.buy_threshold', 'strategy.sell_threshold', 'run.prices', 'run.esg',
}


def _coerce(key: str, value: Any) -> Any:
    """Приведение значения к типу значения по умолчанию."""
    if value is None:
        if key in _NULLABLE:
            return None
        raise ConfigError(key, "значение не может быть null")

    default = DEFAULTS[key]
    if key in _NULLABLE and default is None:
        if key in ('discovery.max_pairs',):
            expected = int
        elif key in ('esg.as_of', 'run.prices', 'run.esg'):
            expected = str
        else:
            expected = float
    else:
        expected = type(default)

    try:
        if expected is bool:
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered not in ('true', 'false', '1', '0', 'yes', 'no'):
                    raise ValueError(value)
                return lowered in ('true', '1', 'yes')
            return bool(value)
        if expected is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if expected is float:
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"ожидается {expected.__name__}, получено '{value}'")


class PipelineConfig:
    """Параметры всех модулей в одном плоском словаре."""

    def __init__(self, values: Optional[Mapping[str, Any]] = None):
        self._values: Dict[str, Any] = dict(DEFAULTS)
        for key, value in (values or {}).items():
            self.set(key, value)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'PipelineConfig':
        return cls(data)

    @classmethod
    def from_file(cls, path: Path) -> 'PipelineConfig':
        """
        Загрузка конфигурации из JSON-файла с плоскими ключами.

        Raises:
            LoadError: Если файл не читается или не является JSON-объектом
            ConfigError: Если встречен неизвестный ключ или неверный тип
        """
        path = Path(path)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except FileNotFoundError:
            raise LoadError(path, "файл не найден")
        except json.JSONDecodeError as e:
            raise LoadError(path, f"некорректный JSON: {e}")
        if not isinstance(data, dict):
            raise LoadError(path, "ожидается JSON-объект с плоскими ключами")
        return cls(data)

    @classmethod
    def load(cls, path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None,
             environ: Optional[Mapping[str, str]] = None) -> 'PipelineConfig':
        """Значения по умолчанию < файл < переменная окружения seed < флаги."""
        config = cls.from_file(path) if path is not None else cls()
        environ = os.environ if environ is None else environ
        if environ.get(SEED_ENV):
            config.set('run.seed', environ[SEED_ENV])
            logger.info(f"CONFIG run.seed={config.get('run.seed')} source='{SEED_ENV}'")
        return config.with_overrides(overrides or {})

    def get(self, key: str) -> Any:
        if key not in DEFAULTS:
            raise ConfigError(key, "неизвестный ключ")
        return self._values[key]

    def __getitem__(self, key: str) -> Any:
        return self.get(key)

    def set(self, key: str, value: Any) -> None:
        if key not in DEFAULTS:
            raise ConfigError(key, "неизвестный ключ")
        self._values[key] = _coerce(key, value)

    def with_overrides(self, overrides: Mapping[str, Any]) -> 'PipelineConfig':
        """Новая конфигурация; значения None в overrides пропускаются."""
        merged = PipelineConfig(self._values)
        for key, value in overrides.items():
            if value is not None:
                merged.set(key, value)
        return merged

    def validate(self) -> 'PipelineConfig':
        """
        Проверка всех параметров до запуска этапов.

        Raises:
            ConfigError: С именем первого ключа вне допустимой области
        """
        v = self._values

        def require(key: str, ok: bool, reason: str) -> None:
            if not ok:
                raise ConfigError(key, reason)

        require('ingest.train_fraction', 0 < v['ingest.train_fraction'] < 1, "должно лежать в (0, 1)")
        require('ingest.min_history_days', v['ingest.min_history_days'] >= 2, "должно быть >= 2")
        require('ingest.delimiter', len(v['ingest.delimiter']) == 1, "ожидается один символ")
        require('esg.approach', v['esg.approach'] in (1, 2), "допустимы подходы 1 и 2")
        require('esg.zeta', 0 <= v['esg.zeta'] <= 100, "должно лежать в [0, 100]")
        require('esg.xi', v['esg.xi'] >= 0, "должно быть неотрицательным")
        if v['esg.as_of'] is not None:
            require('esg.as_of', bool(MONTH_RE.match(v['esg.as_of'])), "ожидается формат YYYY-MM")
        require('esg.rank_k', v['esg.rank_k'] >= 1, "должно быть >= 1")
        require('discovery.variance_target', 0 < v['discovery.variance_target'] <= 1, "должно лежать в (0, 1]")
        require('discovery.max_dims', v['discovery.max_dims'] >= 1, "должно быть >= 1")
        require('discovery.min_samples', v['discovery.min_samples'] >= 2, "должно быть >= 2")
        require('discovery.xi', 0 < v['discovery.xi'] < 1, "должно лежать в (0, 1)")
        require('discovery.coint_alpha', 0 < v['discovery.coint_alpha'] < 1, "должно лежать в (0, 1)")
        require('discovery.min_half_life', v['discovery.min_half_life'] >= 0, "должно быть неотрицательным")
        if v['discovery.max_half_life'] is not None:
            require('discovery.max_half_life', v['discovery.max_half_life'] >= v['discovery.min_half_life'],
                    "должно быть не меньше discovery.min_half_life")
        require('discovery.max_hurst', 0 < v['discovery.max_hurst'] <= 1, "должно лежать в (0, 1]")
        require('discovery.min_cross', v['discovery.min_cross'] >= 0, "должно быть неотрицательным")
        require('discovery.hurst_min_lag', v['discovery.hurst_min_lag'] >= 2, "должно быть >= 2")
        require('discovery.hurst_max_lag', v['discovery.hurst_max_lag'] > v['discovery.hurst_min_lag'],
                "должно быть больше discovery.hurst_min_lag")
        if v['discovery.max_pairs'] is not None:
            require('discovery.max_pairs', v['discovery.max_pairs'] >= 1, "должно быть >= 1")
        require('run.stages', v['run.stages'] in STAGES, f"допустимые значения: {', '.join(STAGES)}")
        require('run.workers', v['run.workers'] >= 1, "должно быть >= 1")
        require('run.seed', v['run.seed'] >= 0, "должно быть неотрицательным")
        require('synth.n_tickers', v['synth.n_tickers'] >= 2, "должно быть >= 2")
        require('synth.n_pairs', 0 <= v['synth.n_pairs'] <= max(1, v['synth.n_tickers'] // 5),
                "не больше одной пары на кластер из пяти тикеров")
        require('synth.n_days', v['synth.n_days'] >= 60, "должно быть >= 60")
        require('synth.phi', -1 < v['synth.phi'] < 1, "должно лежать в (-1, 1)")
        require('synth.noise_scale', v['synth.noise_scale'] > 0, "должно быть положительным")
        require('synth.n_firms_extra', v['synth.n_firms_extra'] >= 0, "должно быть неотрицательным")

        # Инварианты параметров стратегии и исполнения проверяются их конструкторами
        self.strategy_params()
        self.execution_params()
        self.cleaning_policy()
        return self

    def cleaning_policy(self) -> CleaningPolicy:
        return CleaningPolicy(
            require_full_history=self['ingest.require_full_history'],
            min_history_days=self['ingest.min_history_days'],
            missing_score_is_absent=self['ingest.missing_score_is_absent'],
        )

    def strategy_params(self) -> StrategyParams:
        return StrategyParams(
            fast_span=self['strategy.fast_span'],
            slow_span=self['strategy.slow_span'],
            buy_threshold=self['strategy.buy_threshold'],
            sell_threshold=self['strategy.sell_threshold'],
            threshold_z=self['strategy.threshold_z'],
        )

    def execution_params(self) -> ExecutionParams:
        return ExecutionParams(
            commission_rate=self['backtest.commission_rate'],
            initial_capital=self['backtest.initial_capital'],
            annualization_factor=self['backtest.annualization_factor'],
            trade_units=self['backtest.trade_units'],
            slippage=self['backtest.slippage'],
        )

    def selection_criteria(self) -> SelectionCriteria:
        return SelectionCriteria(
            coint_alpha=self['discovery.coint_alpha'],
            min_half_life=self['discovery.min_half_life'],
            max_half_life=self['discovery.max_half_life'],
            max_hurst=self['discovery.max_hurst'],
            min_cross=self['discovery.min_cross'],
            max_pairs=self['discovery.max_pairs'],
        )

    def section(self, prefix: str) -> Dict[str, Any]:
        """Ключи одного раздела без префикса: section('synth') -> {'phi': 0.7, ...}."""
        head = prefix.rstrip('.') + '.'
        return {key[len(head):]: value for key, value in self._values.items() if key.startswith(head)}

    def to_dict(self) -> Dict[str, Any]:
        return dict(sorted(self._values.items()))

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=2)
        return path

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PipelineConfig) and self._values == other._values

    def __repr__(self) -> str:
        changed = {k: v for k, v in self._values.items() if DEFAULTS[k] != v}
        return f"PipelineConfig({changed})"
