import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from ..core.config import PipelineConfig
from ..core.exceptions import EsgPairsError
from ..core.reports import fmt
from ..core.usecases import esg_report, run_pair_list, run_pipeline, synthesize
from ..decorators import configure_logging

logger = logging.getLogger(__name__)

# Флаг -> ключ конфигурации
FLAG_KEYS: Dict[str, str] = {
    'prices': 'run.prices',
    'esg': 'run.esg',
    'output_dir': 'run.output_dir',
    'seed': 'run.seed',
    'workers': 'run.workers',
    'stages': 'run.stages',
    'train_fraction': 'ingest.train_fraction',
    'min_history': 'ingest.min_history_days',
    'delimiter': 'ingest.delimiter',
    'esg_approach': 'esg.approach',
    'zeta': 'esg.zeta',
    'xi': 'esg.xi',
    'as_of': 'esg.as_of',
    'rank_k': 'esg.rank_k',
    'variance_target': 'discovery.variance_target',
    'max_dims': 'discovery.max_dims',
    'min_samples': 'discovery.min_samples',
    'xi_cluster': 'discovery.xi',
    'coint_alpha': 'discovery.coint_alpha',
    'min_half_life': 'discovery.min_half_life',
    'max_half_life': 'discovery.max_half_life',
    'max_hurst': 'discovery.max_hurst',
    'min_cross': 'discovery.min_cross',
    'max_pairs': 'discovery.max_pairs',
    'fast_span': 'strategy.fast_span',
    'slow_span': 'strategy.slow_span',
    'threshold_z': 'strategy.threshold_z',
    'buy_threshold': 'strategy.buy_threshold',
    'sell_threshold': 'strategy.sell_threshold',
    'commission': 'backtest.commission_rate',
    'capital': 'backtest.initial_capital',
    'n_tickers': 'synth.n_tickers',
    'n_pairs': 'synth.n_pairs',
    'n_days': 'synth.n_days',
    'phi': 'synth.phi',
    'noise_scale': 'synth.noise_scale',
    'n_firms_extra': 'synth.n_firms_extra',
}


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=Path, help="JSON-файл конфигурации с плоскими ключами")
    parser.add_argument('--output-dir', help="Директория результатов")
    parser.add_argument('--seed', type=int, help="Зерно (переопределяет ESGPAIRS_SEED)")
    parser.add_argument('--log-dir', type=Path, default=Path('logs'), help="Директория логов")


def _ingest(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--prices', help="Файл цен date,ticker,close")
    parser.add_argument('--delimiter', help="Разделитель столбцов")
    parser.add_argument('--train-fraction', type=float, help="Доля обучающего окна в (0, 1)")
    parser.add_argument('--min-history', type=int, help="Минимальная история тикера, дней")


def _esg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--esg', help="Файл ESG month,ticker,name,industry,score")
    parser.add_argument('--esg-approach', type=int, choices=(1, 2), help="1 - лидер отрасли > ζ, 2 - выше среднего по отрасли + ξ")
    parser.add_argument('--zeta', type=float, help="Порог ζ подхода 1")
    parser.add_argument('--xi', type=float, help="Надбавка ξ подхода 2")
    parser.add_argument('--as-of', help="Месяц ESG-среза YYYY-MM")


def _discovery(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--variance-target', type=float, help="Доля объяснённой дисперсии PCA")
    parser.add_argument('--max-dims', type=int, help="Максимум главных компонент")
    parser.add_argument('--min-samples', type=int, help="min_samples OPTICS")
    parser.add_argument('--xi-cluster', type=float, help="ξ извлечения кластеров OPTICS")
    parser.add_argument('--coint-alpha', type=float, help="Уровень значимости коинтеграции")
    parser.add_argument('--min-half-life', type=float, help="Минимальный период полураспада")
    parser.add_argument('--max-half-life', type=float, help="Максимальный период полураспада")
    parser.add_argument('--max-hurst', type=float, help="Верхняя граница показателя Хёрста")
    parser.add_argument('--min-cross', type=int, help="Минимум пересечений среднего")
    parser.add_argument('--max-pairs', type=int, help="Ограничение числа пар (лучшие по p-значению)")
    parser.add_argument('--workers', type=int, help="Число потоков для пар")


def _strategy(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--fast-span', type=int, help="Период быстрой EMA")
    parser.add_argument('--slow-span', type=int, help="Период медленной EMA")
    parser.add_argument('--threshold-z', type=float, help="Множитель σ для автоматических порогов")
    parser.add_argument('--buy-threshold', type=float, help="Явный порог входа в long")
    parser.add_argument('--sell-threshold', type=float, help="Явный порог входа в short")
    parser.add_argument('--commission', type=float, help="Комиссия, доля номинала")
    parser.add_argument('--capital', type=float, help="Начальный капитал")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='esgpairs', description="ESGPairs - ESG-отбор и парный трейдинг")
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help="Полный конвейер")
    for add in (_common, _ingest, _esg, _discovery, _strategy):
        add(run)
    run.add_argument('--stages', choices=('all', 'esg', 'screen'), help="Остановиться после этапа")

    report = sub.add_parser('esg-report', help="Сводная ESG-статистика")
    _common(report)
    _esg(report)
    report.add_argument('--delimiter', help="Разделитель столбцов")
    report.add_argument('--rank-k', type=int, help="Число отраслей в рейтинге")

    screen = sub.add_parser('screen', help="Только поиск и отбор пар")
    for add in (_common, _ingest, _esg, _discovery):
        add(screen)

    backtest = sub.add_parser('backtest', help="Бэктест заданного списка пар")
    for add in (_common, _ingest, _strategy):
        add(backtest)
    backtest.add_argument('--pairs', type=Path, required=True, help="CSV со столбцами pair1,pair2")
    backtest.add_argument('--workers', type=int, help="Число потоков для пар")

    synth = sub.add_parser('synth', help="Синтетический рынок с заложенными парами")
    _common(synth)
    synth.add_argument('--n-tickers', type=int, help="Число тикеров")
    synth.add_argument('--n-pairs', type=int, help="Число заложенных пар")
    synth.add_argument('--n-days', type=int, help="Число торговых дней")
    synth.add_argument('--phi', type=float, help="AR(1)-коэффициент спреда")
    synth.add_argument('--noise-scale', type=float, help="Стандартное отклонение инноваций спреда")
    synth.add_argument('--n-firms-extra', type=int, help="Фирмы только с ESG-оценкой")
    return parser


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    """Значения по умолчанию < файл < ESGPAIRS_SEED < флаги."""
    overrides = {key: getattr(args, flag) for flag, key in FLAG_KEYS.items() if getattr(args, flag, None) is not None}
    return PipelineConfig.load(args.config, overrides)


def run_command(args: argparse.Namespace) -> None:
    manifest = run_pipeline(config_from_args(args))
    print(f"Пар после отбора: {len(manifest.pairs)}")
    for label in manifest.pairs:
        print(f"  {label}")
    print(f"Манифест: {manifest.artifacts.get('manifest')}")


def esg_report_command(args: argparse.Namespace) -> None:
    result = esg_report(config_from_args(args))
    summary = result['summary']
    print(f"ESG-срез на {summary.as_of}")
    print(f"  Средний балл фирм: {fmt(summary.mean_firm_score)}")
    print(f"  Средний балл отраслей: {fmt(summary.mean_industry_score)}")
    print(f"  Фирм: {summary.n_firms}, без оценки: {summary.n_missing}")
    print(f"  Лучшая фирма: {summary.top_firm[0]} ({fmt(summary.top_firm[1])})")
    print(f"  Худшая фирма: {summary.bottom_firm[0]} ({fmt(summary.bottom_firm[1])})")
    print("  Лучшие отрасли:")
    for name, value in result['top']:
        print(f"    {name}: {fmt(value)}")
    print("  Худшие отрасли:")
    for name, value in result['bottom']:
        print(f"    {name}: {fmt(value)}")


def screen_command(args: argparse.Namespace) -> None:
    config = config_from_args(args).with_overrides({'run.stages': 'screen'})
    manifest = run_pipeline(config)
    print(f"Отобрано пар: {len(manifest.pairs)}")
    print(f"Таблица: {manifest.artifacts.get('pairstats')}")


def backtest_command(args: argparse.Namespace) -> None:
    manifest = run_pair_list(config_from_args(args), args.pairs)
    for key in ('train_results', 'test_results'):
        print(f"{key}: {manifest.artifacts.get(key)}")


def synth_command(args: argparse.Namespace) -> None:
    prices, esg, config = synthesize(config_from_args(args))
    print(f"Цены: {prices}")
    print(f"ESG: {esg}")
    print(f"Конфигурация: {config}")


COMMANDS: Dict[str, Callable[[argparse.Namespace], None]] = {
    'run': run_command,
    'esg-report': esg_report_command,
    'screen': screen_command,
    'backtest': backtest_command,
    'synth': synth_command,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Точка входа CLI; возвращает код выхода."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_dir)
    try:
        COMMANDS[args.command](args)
    except EsgPairsError as e:
        print(f"Ошибка: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"UNEXPECTED error_type={type(e).__name__}")
        print(f"Непредвиденная ошибка: {e}", file=sys.stderr)
        return 1
    return 0
