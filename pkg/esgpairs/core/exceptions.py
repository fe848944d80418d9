from typing import Iterable, Optional


class EsgPairsError(Exception):
    """Базовое исключение пакета. Несёт код выхода для CLI."""

    exit_code = 1


class ConfigError(EsgPairsError):
    """Исключение при некорректной конфигурации или параметре."""

    exit_code = 2

    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"Некорректный параметр '{key}': {reason}")


class DataError(EsgPairsError):
    """Базовое исключение для проблем с данными."""

    exit_code = 3


class LoadError(DataError):
    """Исключение при невозможности прочитать файл."""

    def __init__(self, path: str, reason: str):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"Не удалось загрузить '{self.path}': {reason}")


class EmptyInputError(DataError):
    """Исключение, когда в файле нет ни одной корректной строки."""

    def __init__(self, path: str, dropped: int = 0):
        self.path = str(path)
        self.dropped = dropped
        super().__init__(f"В файле '{self.path}' нет корректных строк (отброшено: {dropped})")


class DuplicateRecordError(DataError):
    """Исключение при повторе пары (тикер, месяц) в ESG-файле."""

    def __init__(self, offenders: Iterable[tuple]):
        self.offenders = sorted(offenders)
        shown = ", ".join(f"{ticker}@{month}" for ticker, month in self.offenders[:10])
        super().__init__(f"Дублирующиеся ESG-записи ({len(self.offenders)}): {shown}")


class SplitError(DataError):
    """Исключение, когда разбиение даёт пустую обучающую или тестовую часть."""

    def __init__(self, fraction: float, n_dates: int):
        self.fraction = fraction
        self.n_dates = n_dates
        super().__init__(f"Доля {fraction} на {n_dates} датах даёт пустую обучающую или тестовую выборку")


class ShapeError(DataError):
    """Исключение при несовпадении длин или слишком коротком ряде."""

    def __init__(self, message: str):
        super().__init__(message)


class SingularRegressorError(DataError):
    """Исключение при постоянном регрессоре в OLS."""

    def __init__(self):
        super().__init__("Регрессор x постоянен: OLS вырождена")


class DegenerateSeriesError(DataError):
    """Исключение для вырожденных (постоянных, нулевой дисперсии) данных."""

    def __init__(self, what: str, ticker: Optional[str] = None):
        self.what = what
        self.ticker = ticker
        suffix = f" (тикер {ticker})" if ticker else ""
        super().__init__(f"Вырожденные данные: {what}{suffix}")


class EmptySummaryError(DataError):
    """Исключение, когда ни у одной фирмы нет ESG-оценки."""

    def __init__(self, as_of: str):
        self.as_of = as_of
        super().__init__(f"Нет фирм с ESG-оценкой на {as_of}")


class BoundsError(DataError):
    """Исключение при запросе большего числа отраслей, чем есть."""

    def __init__(self, k: int, available: int):
        self.k = k
        self.available = available
        super().__init__(f"Запрошено {k} отраслей, доступно {available}")


class AccountingError(DataError):
    """Исключение при неположительном капитале (капитал исчерпан)."""

    def __init__(self, bar: int, equity: float):
        self.bar = bar
        self.equity = equity
        super().__init__(f"Капитал исчерпан на баре {bar}: {equity:.4f}")


class EmptyMetricError(DataError):
    """Исключение, когда все значения метрики не определены."""

    def __init__(self, metric: str):
        self.metric = metric
        super().__init__(f"Нет определённых значений метрики '{metric}'")


class EmptyUniverseError(EsgPairsError):
    """Исключение, когда после фильтра не осталось ни одного тикера."""

    exit_code = 4

    def __init__(self, field: str, value):
        self.field = field
        self.value = value
        super().__init__(f"Пустой универсум: все тикеры отсеяны параметром {field}={value}")


class EmptyPairsError(EsgPairsError):
    """Исключение, когда на этапе не осталось ни одной пары."""

    exit_code = 4

    def __init__(self, stage: str):
        self.stage = stage
        super().__init__(f"Нет пар на этапе '{stage}'")


class OutputError(EsgPairsError):
    """Исключение при невозможности записать результат."""

    exit_code = 5

    def __init__(self, path: str, reason: str):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"Не удалось записать '{self.path}': {reason}")


class StageError(EsgPairsError):
    """Исключение конвейера: указывает этап и исходную причину."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, 'exit_code', 1)
        super().__init__(f"Этап '{stage}' завершился ошибкой: {cause}")
