"""
Иерархия исключений qsatlink
"""

from typing import Optional


class QSatLinkError(Exception):
    """Базовое исключение пакета"""


class InvalidParameterError(QSatLinkError, ValueError):
    """Параметр вне допустимой области"""


class ZenithOutOfRangeError(InvalidParameterError):
    """Зенитный угол вне диапазона [0, 80°]"""

    def __init__(self, zenith: float, limit: float):
        self.zenith = zenith
        self.limit = limit
        super().__init__(
            f"Зенитный угол {zenith:.6f} рад вне диапазона модели [0, {limit:.6f}] рад"
        )


class MomentMatchingError(QSatLinkError, ArithmeticError):
    """Моменты W² не допускают логнормального сопоставления"""


class NoSignalError(QSatLinkError, ArithmeticError):
    """QBER не определён: нет ни сигнальных, ни шумовых фотонов"""


class IntegrationError(QSatLinkError, RuntimeError):
    """Квадратура по апертуре не достигла заданной точности"""

    def __init__(self, message: str, sample_index: Optional[int] = None,
                 estimate: Optional[float] = None, error_estimate: Optional[float] = None):
        self.sample_index = sample_index
        self.estimate = estimate
        self.error_estimate = error_estimate
        if sample_index is not None:
            message = f"{message} (выборка #{sample_index})"
        super().__init__(message)


class ConfigurationError(QSatLinkError):
    """Некорректная конфигурация запуска или пресетов"""
