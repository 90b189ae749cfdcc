"""
Оптимизация накачки: mu_opt = argmax P_1(mu) и максимум P_1
при ограничении снизу на отношение сигнал/шум
"""

import logging
import math
from typing import Callable

import numpy as np

from ..decorators import log_action
from .exceptions import DomainError, UndefinedValueError
from .loss_model import output_distribution
from .models import OptimizationResult, PhotonDistribution, SourceConfig
from .photon_stats import DEFAULT_N_MAX, mandel_q, snr
from .utils import log_grid, validate_count, validate_interval, validate_non_negative

logger = logging.getLogger("photonmux.core.optimizer")

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2

DEFAULT_MU_RANGE = (1e-4, 2.0)
DEFAULT_TOL = 1e-6
MIN_GRID_POINTS = 64
BISECTION_TOL = 1e-12
SNR_SLACK = 1e-6


def golden_section_max(f: Callable[[float], float], a: float, b: float,
                       tol: float = DEFAULT_TOL) -> tuple[float, float, int]:
    """
    Поиск золотого сечения для максимума унимодальной функции на [a, b].
    Returns:
        (a, b, iterations) - итоговый интервал шириной <= tol
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        return a, b, 0

    # число шагов для достижения точности
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)

    for _ in range(n - 1):
        if yc > yd:
            b = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)

    if yc > yd:
        return a, d, n
    return c, b, n


def _local_maxima(values: np.ndarray) -> list[int]:
    """Индексы локальных максимумов на сетке (включая концы)"""
    peaks = []
    last = len(values) - 1
    for i, v in enumerate(values):
        left = values[i - 1] if i > 0 else -math.inf
        right = values[i + 1] if i < last else -math.inf
        if v >= left and v >= right and (v > left or v > right):
            peaks.append(i)
    if not peaks:
        # плоская функция
        peaks.append(int(np.argmax(values)))
    return peaks


def _safe_mandel_q(dist: PhotonDistribution) -> float:
    try:
        return mandel_q(dist)
    except UndefinedValueError:
        return math.nan


class _Objective:
    """P_1(mu) при фиксированных остальных параметрах, с подсчетом вызовов"""

    def __init__(self, cfg_template: SourceConfig, n_max: int):
        self.cfg_template = cfg_template
        self.n_max = n_max
        self.evaluations = 0

    def distribution(self, mu: float) -> PhotonDistribution:
        self.evaluations += 1
        return output_distribution(self.cfg_template.replace(mu=float(mu)), self.n_max)

    def p1(self, mu: float) -> float:
        return self.distribution(mu).p1

    def snr(self, mu: float) -> float:
        return snr(self.distribution(mu))

    def result(self, mu: float, converged: bool, boundary: str | None = None,
               **extra) -> OptimizationResult:
        dist = self.distribution(mu)
        return OptimizationResult(
            mu_opt=float(mu),
            p1_max=dist.p1,
            snr_at_opt=snr(dist),
            mandel_q_at_opt=_safe_mandel_q(dist),
            iterations=self.evaluations,
            converged=bool(converged),
            boundary=boundary,
            **extra,
        )


def _maximize(objective: _Objective, lo: float, hi: float, tol: float,
              grid_points: int) -> tuple[float, bool, str | None]:
    """Грубая логарифмическая сетка + золотое сечение на каждом локальном максимуме"""
    grid = log_grid(lo, hi, grid_points)
    values = np.array([objective.p1(mu) for mu in grid])
    coarse_best = int(np.argmax(values))

    peaks = _local_maxima(values)
    if len(peaks) > 1:
        logger.warning(f"P1(mu) не унимодальна для {objective.cfg_template.short()}: "
                       f"{len(peaks)} локальных максимумов на сетке")

    best_mu, best_value = float(grid[coarse_best]), float(values[coarse_best])
    best_width = math.inf
    for i in peaks:
        a = grid[max(i - 1, 0)]
        b = grid[min(i + 1, len(grid) - 1)]
        left, right, _ = golden_section_max(objective.p1, a, b, tol)
        candidate = (left + right) / 2
        value = objective.p1(candidate)
        if value >= best_value:
            best_mu, best_value = float(candidate), float(value)
            best_width = float(right - left)

    boundary = None
    if best_mu - lo <= tol:
        boundary = "lower"
    elif hi - best_mu <= tol:
        boundary = "upper"
    converged = bool(boundary is None and best_width <= tol)
    if boundary:
        logger.warning(f"Максимум P1 на границе диапазона ({boundary}) "
                       f"для {objective.cfg_template.short()}")
    return best_mu, converged, boundary


@log_action
def optimize_mu(cfg_template: SourceConfig,
                mu_range: tuple[float, float] = DEFAULT_MU_RANGE,
                tol: float = DEFAULT_TOL,
                n_max: int = DEFAULT_N_MAX,
                grid_points: int = MIN_GRID_POINTS) -> OptimizationResult:
    """
    Оптимальное среднее число пар mu_opt, максимизирующее P_1 на выходе.

    Результат не хуже лучшей точки грубой сетки. Максимум на границе
    диапазона помечается converged=False и указанием границы.
    """
    lo, hi = validate_interval("mu_range", mu_range)
    tol = validate_non_negative("tol", tol)
    if tol == 0:
        raise DomainError("tol", tol, "ожидается > 0")
    grid_points = max(validate_count("grid_points", grid_points, 3), MIN_GRID_POINTS)

    objective = _Objective(cfg_template, n_max)
    mu, converged, boundary = _maximize(objective, lo, hi, tol, grid_points)
    return objective.result(mu, converged, boundary)


def _bisect_crossing(objective: _Objective, feasible: float, infeasible: float,
                     target: float) -> float:
    """Граница области SNR >= target между допустимой и недопустимой точками"""
    while abs(infeasible - feasible) > BISECTION_TOL * max(1.0, feasible):
        middle = (feasible + infeasible) / 2
        if objective.snr(middle) >= target:
            feasible = middle
        else:
            infeasible = middle
    return feasible


def _feasible_intervals(objective: _Objective, grid: np.ndarray,
                        ok: np.ndarray, target: float) -> list[tuple[float, float]]:
    intervals = []
    start = None
    for i, flag in enumerate(ok):
        if flag and start is None:
            start = grid[0] if i == 0 else _bisect_crossing(
                objective, grid[i], grid[i - 1], target)
        if not flag and start is not None:
            end = _bisect_crossing(objective, grid[i - 1], grid[i], target)
            intervals.append((start, end))
            start = None
    if start is not None:
        intervals.append((start, grid[-1]))
    return intervals


@log_action
def max_p1_with_snr_floor(cfg_template: SourceConfig, snr_target: float,
                          mu_range: tuple[float, float] = DEFAULT_MU_RANGE,
                          tol: float = DEFAULT_TOL,
                          n_max: int = DEFAULT_N_MAX,
                          grid_points: int = MIN_GRID_POINTS) -> OptimizationResult:
    """
    Максимум P_1(mu) при условии SNR(mu) >= snr_target.

    Допустимая область находится по грубой сетке и бисекцией на каждой смене
    знака SNR - target; монотонность SNR проверяется на той же сетке.
    Недостижимая цель возвращает результат с feasible=False.
    """
    target = validate_non_negative("snr_target", snr_target)
    if target == 0:
        raise DomainError("snr_target", target, "ожидается > 0")
    lo, hi = validate_interval("mu_range", mu_range)
    grid_points = max(validate_count("grid_points", grid_points, 3), MIN_GRID_POINTS)

    objective = _Objective(cfg_template, n_max)
    grid = log_grid(lo, hi, grid_points)
    snr_values = np.array([objective.snr(mu) for mu in grid])
    if np.any(np.diff(snr_values) > 0):
        logger.warning(f"SNR(mu) не монотонна для {cfg_template.short()}; "
                       f"граница ищется по участкам")

    ok = snr_values >= target
    if not ok.any():
        logger.info(f"Цель SNR={target:g} недостижима для {cfg_template.short()}")
        return OptimizationResult.infeasible(target, objective.evaluations)
    if ok.all():
        mu, converged, boundary = _maximize(objective, lo, hi, tol, grid_points)
        return objective.result(mu, converged, boundary, snr_target=target)

    best = None
    for start, end in _feasible_intervals(objective, grid, ok, target):
        if end - start <= tol:
            mu, converged, boundary = start, True, None
        else:
            mu, converged, boundary = _maximize(objective, start, end, tol,
                                                grid_points)
            if objective.snr(mu) < target - SNR_SLACK:
                mu = start if objective.snr(start) >= target else end
        value = objective.p1(mu)
        if best is None or value > best[1]:
            best = (mu, value, converged, boundary, start, end)

    mu, _, converged, boundary, start, end = best
    # максимум на границе, созданной ограничением, - штатная ситуация
    active = bool((boundary == "upper" and end < hi) or (
        boundary == "lower" and start > lo))
    if active:
        converged, boundary = True, None
    return objective.result(mu, converged, boundary,
                            constraint_active=active, snr_target=target)
