"""
Сценарии конвейера: полный прогон, ESG-отчёт, поиск пар, бэктест
заданного списка пар и генерация синтетического рынка.
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

from ..decorators import log_action
from .backtest import backtest_pairs
from .config import PipelineConfig
from .discovery import discover_candidates, filter_pairs, score_pair, score_pairs
from .esg import get_approach, monthly_means, rank_industries, summarize
from .exceptions import ConfigError, DataError, EmptyMetricError, EmptyPairsError, EmptyUniverseError, EsgPairsError, StageError
from .ingest import clean_and_align, load_esg, load_prices, train_test_split
from .models import BacktestReport, EsgTable, PairCandidate, PairStats, PriceTable, StrategyParams, Universe
from .reports import (
    METRICS,
    emit_boxplot_data,
    emit_monthly_means,
    emit_pairstats_table,
    emit_results_table,
    export_summary,
    load_pair_list,
    write_details,
    write_json,
)
from .strategy import build_spread, resolve_params
from .synth import generate_market, write_market

logger = logging.getLogger(__name__)


@dataclass
class StageRecord:
    name: str
    rows_in: int = 0
    rows_out: int = 0
    seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {'stage': self.name, 'rows_in': self.rows_in, 'rows_out': self.rows_out, 'seconds': round(self.seconds, 6)}


@dataclass
class RunManifest:
    """Снимок конфигурации, счётчики и время по этапам, пути артефактов."""

    config: Dict[str, Any]
    stages: List[StageRecord] = field(default_factory=list)
    artifacts: Dict[str, str] = field(default_factory=dict)
    pairs: List[str] = field(default_factory=list)

    def stage(self, name: str) -> StageRecord:
        for record in self.stages:
            if record.name == name:
                return record
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'config': self.config,
            'stages': [s.to_dict() for s in self.stages],
            'artifacts': dict(sorted(self.artifacts.items())),
            'pairs': list(self.pairs),
        }


class PipelineUseCases:
    """Этапы конвейера поверх одной конфигурации."""

    def __init__(self, config: PipelineConfig):
        self.config = config.validate()
        self.output_dir = Path(config['run.output_dir'])
        self.manifest = RunManifest(config.to_dict())
        self._written: List[Path] = []

    @contextmanager
    def stage(self, name: str) -> Iterator[StageRecord]:
        """Замер времени этапа; любое исключение оборачивается в StageError."""
        record = StageRecord(name)
        started = time.perf_counter()
        try:
            yield record
        except StageError:
            raise
        except Exception as e:
            raise StageError(name, e) from e
        finally:
            record.seconds = time.perf_counter() - started
        self.manifest.stages.append(record)
        logger.info(f"STAGE stage='{name}' rows_in={record.rows_in} rows_out={record.rows_out} seconds={record.seconds:.3f}")

    def _artifact(self, key: str, path: Path) -> Path:
        self._written.append(Path(path))
        self.manifest.artifacts[key] = str(path)
        return path

    def remove_partial_outputs(self) -> None:
        for path in self._written:
            try:
                path.unlink()
            except OSError:
                pass
        self._written.clear()
        self.manifest.artifacts.clear()

    def _require(self, key: str) -> str:
        value = self.config[key]
        if value is None:
            raise ConfigError(key, "не задан путь к входному файлу")
        return value

    def load_prices(self) -> PriceTable:
        with self.stage('load') as record:
            raw = load_prices(Path(self._require('run.prices')), self.config['ingest.delimiter'])
            record.rows_in = raw.n_rows + raw.dropped
            record.rows_out = raw.n_rows
        with self.stage('clean') as record:
            record.rows_in = raw.n_tickers
            prices = clean_and_align(raw, self.config.cleaning_policy())
            record.rows_out = prices.n_tickers
        return prices

    def load_esg(self) -> EsgTable:
        return load_esg(Path(self._require('run.esg')), self.config.cleaning_policy(), self.config['ingest.delimiter'])

    def as_of(self, esg: EsgTable) -> str:
        return self.config['esg.as_of'] or esg.months[-1]

    def select_universe(self, prices: PriceTable) -> Tuple[PriceTable, Optional[Universe]]:
        """ESG-отбор и сужение таблицы цен до универсума; без ESG-файла берутся все тикеры."""
        with self.stage('esg_select') as record:
            record.rows_in = prices.n_tickers
            if self.config['run.esg'] is None:
                logger.warning("ESG_SELECT skipped='run.esg не задан' universe='all'")
                record.rows_out = prices.n_tickers
                return prices, None

            esg = self.load_esg()
            approach = get_approach(self.config['esg.approach'])
            parameter = self.config[f"esg.{approach.parameter_name}"]
            universe = approach.select(esg, self.as_of(esg), parameter)

            tradable = [t for t in universe.tickers if t in prices]
            missing = len(universe) - len(tradable)
            if missing:
                logger.warning(f"ESG_SELECT without_prices={missing}")
            if not tradable:
                raise EmptyUniverseError(approach.parameter_name, parameter)
            self._artifact('universe', write_json(universe.to_dict(), self.output_dir / 'universe.json'))
            record.rows_out = len(tradable)
            return prices.select(tradable), universe

    def split(self, prices: PriceTable) -> Tuple[PriceTable, PriceTable]:
        with self.stage('split') as record:
            record.rows_in = prices.n_dates
            train, test = train_test_split(prices, self.config['ingest.train_fraction'])
            record.rows_out = train.n_dates
        return train, test

    def discover(self, train: PriceTable) -> List[PairCandidate]:
        c = self.config
        with self.stage('discover') as record:
            record.rows_in = train.n_tickers
            _, _, candidates = discover_candidates(
                train, c['discovery.variance_target'], c['discovery.max_dims'], c['discovery.min_samples'], c['discovery.xi'])
            if not candidates:
                raise EmptyPairsError('discover')
            record.rows_out = len(candidates)
        return candidates

    def score(self, train: PriceTable, candidates: Sequence[PairCandidate]) -> List[PairStats]:
        c = self.config
        with self.stage('score') as record:
            record.rows_in = len(candidates)
            stats = score_pairs(train, candidates, c['run.workers'], c['discovery.hurst_min_lag'], c['discovery.hurst_max_lag'])
            record.rows_out = len(stats)
        return stats

    def filter(self, stats: Sequence[PairStats]) -> List[PairStats]:
        with self.stage('filter') as record:
            record.rows_in = len(stats)
            survivors = filter_pairs(stats, self.config.selection_criteria())
            if not survivors:
                raise EmptyPairsError('filter')
            record.rows_out = len(survivors)
            self._artifact('pairstats', emit_pairstats_table(survivors, self.output_dir / 'pairstats.csv'))
        self.manifest.pairs = [s.pair.label for s in survivors]
        return survivors

    def thresholds(self, train: PriceTable, stats: Sequence[PairStats]) -> Dict[PairCandidate, StrategyParams]:
        """Пороги каждой пары по обучающему окну; в тестовом окне они не пересчитываются."""
        base = self.config.strategy_params()
        resolved = {}
        for item in stats:
            spread = build_spread(train.closes(item.pair.ticker_a), train.closes(item.pair.ticker_b), item.hedge_ratio, base)
            resolved[item.pair] = resolve_params(base, spread)
        return resolved

    def backtest(self, windows: Dict[str, PriceTable], stats: Sequence[PairStats]) -> Dict[str, List[BacktestReport]]:
        """Бэктест по окнам; пороги считаются внутри этапа backtest_train."""
        ep = self.config.execution_params()
        params: Optional[Dict[PairCandidate, StrategyParams]] = None
        reports = {}
        for window, prices in windows.items():
            with self.stage(f"backtest_{window}") as record:
                record.rows_in = len(stats)
                if params is None:
                    params = self.thresholds(windows['train'], stats)
                reports[window] = backtest_pairs(prices, stats, params, ep, window, self.config['run.workers'])
                record.rows_out = len(reports[window])
        return reports

    def emit(self, reports: Dict[str, List[BacktestReport]]) -> None:
        with self.stage('emit') as record:
            for window, window_reports in reports.items():
                record.rows_in += len(window_reports)
                self._artifact(f"{window}_results", emit_results_table(window_reports, window, self.output_dir / f"{window}_results.csv"))
                for metric in METRICS:
                    path = self.output_dir / f"boxplot_{window}_{metric}.json"
                    try:
                        emit_boxplot_data(window_reports, metric, path)
                    except EmptyMetricError as e:
                        logger.warning(f"EMIT_BOXPLOT window='{window}' skipped='{e}'")
                        continue
                    self._artifact(f"boxplot_{window}_{metric}", path)
                for path in write_details(window_reports, self.output_dir):
                    self._written.append(path)
            self.manifest.artifacts['details'] = str(self.output_dir / 'details')
            record.rows_out = len(self.manifest.artifacts)

    def write_manifest(self) -> Path:
        path = self.output_dir / 'manifest.json'
        self.manifest.artifacts['manifest'] = str(path)
        write_json(self.manifest.to_dict(), path)
        return path

    def run(self) -> RunManifest:
        prices = self.load_prices()
        prices, _ = self.select_universe(prices)
        if self.config['run.stages'] == 'esg':
            return self.manifest
        train, test = self.split(prices)
        survivors = self.filter(self.score(train, self.discover(train)))
        if self.config['run.stages'] == 'screen':
            return self.manifest
        self.emit(self.backtest({'train': train, 'test': test}, survivors))
        return self.manifest

    def run_pair_list(self, pairs_path: Path) -> RunManifest:
        """Бэктест заданного списка пар без поиска: коэффициенты хеджирования оцениваются на обучающем окне."""
        prices = self.load_prices()
        train, test = self.split(prices)
        with self.stage('score') as record:
            listed = load_pair_list(pairs_path)
            record.rows_in = len(listed)
            stats = []
            for first, second in listed:
                a, b = sorted((first, second))
                for ticker in (a, b):
                    if ticker not in train:
                        raise DataError(f"Тикер '{ticker}' из списка пар отсутствует в таблице цен")
                item = score_pair(train, PairCandidate(a, b), self.config['discovery.hurst_min_lag'], self.config['discovery.hurst_max_lag'])
                stats.append(item)
            stats.sort(key=lambda s: (s.pair.ticker_a, s.pair.ticker_b))
            record.rows_out = len(stats)
            self._artifact('pairstats', emit_pairstats_table(stats, self.output_dir / 'pairstats.csv'))
        self.manifest.pairs = [s.pair.label for s in stats]
        self.emit(self.backtest({'train': train, 'test': test}, stats))
        return self.manifest

    def esg_report(self) -> Dict[str, Any]:
        """Сводка ESG на дату, рейтинг отраслей и средние по месяцам."""
        with self.stage('esg_report') as record:
            esg = self.load_esg()
            record.rows_in = esg.n_rows
            summary = summarize(esg, self.as_of(esg))
            k = min(self.config['esg.rank_k'], len(summary.industry_means))
            top, bottom = rank_industries(summary, k) if k else ([], [])
            monthly = monthly_means(esg)
            self._artifact('esg_summary', export_summary(summary, self.output_dir / 'esg_summary.json', top, bottom, monthly))
            self._artifact('esg_monthly_means', emit_monthly_means(monthly, self.output_dir / 'esg_monthly_means.csv'))
            record.rows_out = summary.n_firms
        return {'summary': summary, 'top': top, 'bottom': bottom, 'monthly': monthly}


def _guarded(use_cases: PipelineUseCases, action) -> RunManifest:
    try:
        manifest = action()
    except EsgPairsError:
        use_cases.remove_partial_outputs()
        raise
    use_cases.write_manifest()
    return manifest


@log_action('RUN_PIPELINE')
def run_pipeline(config: PipelineConfig) -> RunManifest:
    """
    Полный прогон: load → clean → ESG select → split → discover → score →
    filter → backtest(train) → backtest(test) → emit; манифест пишется последним.

    Raises:
        ConfigError: Если конфигурация некорректна (до первого этапа)
        StageError: С именем упавшего этапа; частичные результаты удаляются
    """
    use_cases = PipelineUseCases(config)
    return _guarded(use_cases, use_cases.run)


@log_action('RUN_PAIR_LIST')
def run_pair_list(config: PipelineConfig, pairs_path: Path) -> RunManifest:
    use_cases = PipelineUseCases(config)
    return _guarded(use_cases, lambda: use_cases.run_pair_list(pairs_path))


def esg_report(config: PipelineConfig) -> Dict[str, Any]:
    use_cases = PipelineUseCases(config)
    try:
        return use_cases.esg_report()
    except EsgPairsError:
        use_cases.remove_partial_outputs()
        raise


def synthesize(config: PipelineConfig, output_dir: Optional[Path] = None) -> Tuple[Path, Path, Path]:
    """Генерация синтетического рынка по разделу synth конфигурации."""
    config = config.validate()
    market = generate_market(seed=config['run.seed'], **config.section('synth'))
    target = Path(output_dir or config['run.output_dir'])
    return write_market(market, target, {key: value for key, value in config.to_dict().items() if not key.startswith('run.')})
