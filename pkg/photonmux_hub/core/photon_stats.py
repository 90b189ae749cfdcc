"""
Точные распределения числа фотонов идеального источника и их характеристики
"""

import math

import numpy as np
from scipy.special import gammaln, xlogy

from .exceptions import UndefinedValueError
from .models import PhotonDistribution, SourceConfig
from .utils import validate_count, validate_non_negative

DEFAULT_N_MAX = 30


def poisson_pmf(mu: float, n: int) -> float:
    """
    Вероятность Пуассона e^(-mu) mu^n / n!, вычисленная в логарифмах
    Raises:
        DomainError: если mu или n отрицательны
    """
    mu = validate_non_negative("mu", mu)
    n = validate_count("n", n)
    if mu == 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(mu) - mu - math.lgamma(n + 1))


def poisson_vector(mu: float, n_max: int) -> np.ndarray:
    """Вектор вероятностей Пуассона для n = 0..n_max"""
    mu = validate_non_negative("mu", mu)
    n = np.arange(validate_count("n_max", n_max) + 1)
    return np.exp(xlogy(n, mu) - mu - gammaln(n + 1))


def ideal_distribution(cfg: SourceConfig,
                       n_max: int = DEFAULT_N_MAX) -> PhotonDistribution:
    """
    Распределение на выходе идеального источника (поля потерь игнорируются).

    P_0 = P_0(mu_T); P_n = (1 - P_0(mu_T)) P_n(mu) / (1 - P_0(mu)) при n >= 1.
    """
    n_max = validate_count("n_max", n_max, minimum=2)
    if cfg.mu == 0:
        return PhotonDistribution.vacuum(n_max, source=cfg)

    herald = -math.expm1(-cfg.mu_T)
    window = -math.expm1(-cfg.mu)
    probs = poisson_vector(cfg.mu, n_max) * (herald / window)
    probs[0] = math.exp(-cfg.mu_T)
    return PhotonDistribution.from_probs(probs, source=cfg)


def mean_photon_number(dist: PhotonDistribution) -> float:
    return dist.mean


def mandel_q(dist: PhotonDistribution) -> float:
    """
    Параметр Манделя (Var(n) - <n>) / <n>
    Raises:
        UndefinedValueError: для вакуума (<n> = 0)
    """
    mean = dist.mean
    if mean <= 0:
        raise UndefinedValueError("mandel_q", "среднее число фотонов равно нулю")
    return (dist.variance - mean) / mean


def snr(dist: PhotonDistribution) -> float:
    """Отношение P_1 / P_{>=2}; бесконечность, если многофотонная часть равна нулю"""
    multi = dist.p_ge2
    if multi == 0:
        return math.inf
    return dist.p1 / multi
