"""
Иерархия исключений пакета и коды выхода CLI
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from .services.evaluation import MetricsReport


class NewsMetapathError(Exception):
    """Базовое исключение пакета"""

    exit_code: int = 3
    """Код выхода CLI для этого класса ошибок"""


class DataError(NewsMetapathError):
    """Ошибка входных данных (неполный или некорректный корпус)"""

    exit_code = 2


class DimensionError(NewsMetapathError, ValueError):
    """Несовпадение размерностей тензоров"""


class ConfigurationError(NewsMetapathError, ValueError):
    """Некорректная конфигурация"""


class PreconditionError(NewsMetapathError, ValueError):
    """Нарушено предусловие операции"""


class DomainError(NewsMetapathError, ValueError):
    """Аргумент вне области определения"""


class EvaluationError(NewsMetapathError):
    """Функция вернула нечисловое значение"""


class StateError(NewsMetapathError):
    """Кэш прямого прохода устарел или отсутствует"""


class TrainingError(NewsMetapathError):
    """Ошибка в ходе обучения (например, NaN в градиенте)"""


class ConflictError(DataError):
    """Повторная регистрация идентификатора"""


class NotFoundError(DataError, KeyError):
    """Идентификатор не найден"""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class SchemaError(DataError):
    """Нарушение схемы гетерогенного графа"""


class NodeTypeError(DataError):
    """Узел имеет не тот тип"""


class IsolationError(DataError):
    """У новости нет ни одного экземпляра мета-пути"""


class IngestionError(DataError):
    """Ошибка разбора входного файла"""

    def __init__(self, message: str, line: int | None = None):
        """
        Args:
            message: Описание ошибки
            line: Номер строки (с единицы), если известен
        """
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class CoverageError(DataError):
    """Для части узлов нет признаков"""

    def __init__(self, missing: list[str], total_missing: int | None = None):
        """
        Args:
            missing: Отсортированные идентификаторы (не более десяти)
            total_missing: Общее число узлов без признаков
        """
        self.missing = missing
        if total_missing is None:
            total_missing = len(missing)
        self.total_missing = total_missing
        super().__init__(
            f"{self.total_missing} node(s) without features: {', '.join(missing)}"
        )


class AUCUndefinedError(EvaluationError):
    """AUC не определён: в разметке один класс"""

    def __init__(self, report: MetricsReport | Any):
        """
        Args:
            report: Отчёт с остальными метриками (auc = nan)
        """
        self.report = report
        super().__init__("AUC is undefined when only one class is present")
