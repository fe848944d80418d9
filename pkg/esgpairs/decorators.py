import functools
import inspect
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Optional

logger = logging.getLogger(__name__)

# Параметры вызова, которые поднимаются в запись лога
_LOGGED_PARAMS = ('path', 'zeta', 'xi', 'window', 'hedge_ratio', 'as_of', 'train_fraction', 'metric')


def configure_logging(log_dir: Optional[Path] = None, level: int = logging.INFO) -> None:
    """
    Настройка логирования: файл actions.log и консоль.

    Args:
        log_dir: Директория для логов (по умолчанию logs/)
        level: Уровень логирования
    """
    log_dir = Path(log_dir) if log_dir is not None else Path('logs')
    log_dir.mkdir(parents=True, exist_ok=True)

    root = logging.getLogger('esgpairs')
    root.setLevel(level)
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter('%(levelname)s %(asctime)s %(message)s', datefmt='%Y-%m-%dT%H:%M:%S')
    file_handler = logging.FileHandler(log_dir / 'actions.log', encoding='utf-8')
    stream_handler = logging.StreamHandler()
    for handler in (file_handler, stream_handler):
        handler.setFormatter(formatter)
        root.addHandler(handler)


def log_action(action_name: str = None):
    """
    Декоратор для логирования операций конвейера.

    Args:
        action_name: Название операции (LOAD_PRICES/CLEAN/BACKTEST/...)
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            operation = action_name or func.__name__.upper()

            log_data = {
                'timestamp': datetime.now().isoformat(),
                'action': operation,
            }

            try:
                sig = inspect.signature(func)
                bound_args = sig.bind(*args, **kwargs)
                bound_args.apply_defaults()
                params = bound_args.arguments

                for name in _LOGGED_PARAMS:
                    if name in params and params[name] is not None:
                        log_data[name] = _render(params[name])
                if 'pair' in params and hasattr(params['pair'], 'label'):
                    log_data['pair'] = params['pair'].label

                result = func(*args, **kwargs)

                log_data.update(_describe_result(result))
                log_data['result'] = 'OK'
                logger.info(f"{operation} {_format_log_data(log_data)}")
                return result

            except Exception as e:
                log_data.update({
                    'result': 'ERROR',
                    'error_type': type(e).__name__,
                    'error_message': str(e)
                })
                logger.error(f"{operation} {_format_log_data(log_data)}")
                raise

        return wrapper
    return decorator


def _render(value: Any) -> Any:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _describe_result(result: Any) -> dict:
    """Размеры результата для лога: строки, тикеры, пары, сделки."""
    described = {}
    if isinstance(result, tuple):
        return {'parts': len(result)}
    for attr, key in (('n_rows', 'rows'), ('n_tickers', 'tickers'), ('n_dates', 'dates'), ('n_trades', 'trades'), ('dropped', 'dropped')):
        value = getattr(result, attr, None)
        if isinstance(value, int):
            described[key] = value
    if isinstance(result, list):
        described['items'] = len(result)
    return described


def _format_log_data(data: dict) -> str:
    """Форматирование данных лога в строку."""
    parts = []
    for key, value in data.items():
        if key != 'action':
            if isinstance(value, (int, float)) or (isinstance(value, str) and value.replace('.', '').replace('-', '').isdigit()):
                parts.append(f"{key}={value}")
            else:
                parts.append(f"{key}='{value}'")
    return ' '.join(parts)
