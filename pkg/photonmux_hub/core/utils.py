"""
Вспомогательные функции проверки входных данных
"""

import math

import numpy as np

from .exceptions import DomainError

# Порог на отброшенную массу распределения
TAIL_TOLERANCE = 1e-9

# Допуск на нормировку распределения
NORM_TOLERANCE = 1e-9


def validate_non_negative(name: str, value: float) -> float:
    """
    Проверка неотрицательного конечного числа
    Args:
        name: Имя параметра (для сообщения об ошибке)
        value: Значение
    Returns:
        Значение как float
    Raises:
        DomainError: если значение отрицательно или не число
    """
    if isinstance(value, bool) or not isinstance(value, (int, float, np.floating)):
        raise DomainError(name, value, "ожидается число")
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(name, value, "ожидается конечное число")
    if value < 0:
        raise DomainError(name, value, "ожидается неотрицательное число")
    return value


def validate_probability(name: str, value: float) -> float:
    """Проверка, что значение лежит в [0, 1]"""
    value = validate_non_negative(name, value)
    if value > 1:
        raise DomainError(name, value, "ожидается значение в [0, 1]")
    return value


def validate_count(name: str, value: int, minimum: int = 0) -> int:
    """Проверка целого числа не меньше minimum"""
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise DomainError(name, value, "ожидается целое число")
    if value < minimum:
        raise DomainError(name, value, f"ожидается целое >= {minimum}")
    return int(value)


def validate_interval(name: str, interval: tuple[float, float]) -> tuple[float, float]:
    """Интервал (lo, hi) с 0 < lo < hi"""
    try:
        lo, hi = interval
    except (TypeError, ValueError):
        raise DomainError(name, interval, "ожидается пара (min, max)")
    lo = validate_non_negative(f"{name}[0]", lo)
    hi = validate_non_negative(f"{name}[1]", hi)
    if lo <= 0 or hi <= lo:
        raise DomainError(name, interval, "ожидается 0 < min < max")
    return lo, hi


def log_grid(lo: float, hi: float, points: int) -> np.ndarray:
    """Логарифмическая сетка из points точек, концы включены точно"""
    grid = np.geomspace(lo, hi, points)
    grid[0], grid[-1] = lo, hi
    return grid
