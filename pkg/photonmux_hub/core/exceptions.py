"""
Пользовательские исключения для модели мультиплексированного источника фотонов
"""

from typing import Any


class PhotonMuxError(Exception):
    """Базовое исключение пакета"""


class DomainError(PhotonMuxError, ValueError):
    def __init__(self, name: str, value: Any, reason: str):
        self.name = name
        self.value = value
        self.reason = reason
        message = f"Недопустимое значение {name}={value}: {reason}"
        super().__init__(message)


class ConfigValidationError(PhotonMuxError, ValueError):
    def __init__(self, field: str, value: Any, reason: str):
        self.field = field
        self.value = value
        self.reason = reason
        message = f"Параметр '{field}'={value} вне допустимого диапазона: {reason}"
        super().__init__(message)


class InconsistentRateError(ConfigValidationError):
    def __init__(self, mu: float, implied_mu: float):
        self.mu = mu
        self.implied_mu = implied_mu
        super().__init__(
            "mu", mu,
            f"не согласовано с delta_t0 * herald_rate_r = {implied_mu!r}"
        )


class TruncationError(PhotonMuxError):
    def __init__(self, n_max: int, tail_mass: float):
        self.n_max = n_max
        self.tail_mass = tail_mass
        message = (f"Остаток распределения за n_max={n_max} равен {tail_mass:.3e}; "
                   f"увеличьте n_max")
        super().__init__(message)


class UndefinedValueError(PhotonMuxError):
    def __init__(self, quantity: str, reason: str):
        self.quantity = quantity
        self.reason = reason
        message = f"Величина {quantity} не определена: {reason}"
        super().__init__(message)


class ConfigMismatchError(PhotonMuxError):
    def __init__(self, reason: str):
        self.reason = reason
        message = f"Конфигурации не совпадают: {reason}"
        super().__init__(message)


class ConfigParseError(PhotonMuxError):
    def __init__(self, message: str, key: str | None = None,
                 line: int | None = None):
        self.key = key
        self.line = line
        location = []
        if key:
            location.append(f"ключ '{key}'")
        if line is not None:
            location.append(f"строка {line}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
