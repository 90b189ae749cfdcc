"""
Цепочка неидеальных устройств: эффективность канала оповещения,
темновые отсчеты и биномиальные потери в сигнальном канале
"""

import logging
import math
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.stats import binom

from .exceptions import DomainError
from .models import LossChainTrace, PhotonDistribution, SourceConfig
from .photon_stats import DEFAULT_N_MAX, ideal_distribution, poisson_vector
from .utils import validate_count, validate_probability

logger = logging.getLogger("photonmux.core.loss")

NO_HERALD_FLAG = "no_herald"


class HeraldNormalizers(NamedTuple):
    """Знаменатели двух ветвей: аналитические и суммированные до n_max"""

    click_closed: float
    silent_closed: float
    click_summed: float
    silent_summed: float


def _miss_vector(e_h: float, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """(1 - e_h)^n и 1 - (1 - e_h)^n без потери точности при малых e_h"""
    n = np.arange(n_max + 1)
    if e_h == 1.0:
        miss = (n == 0).astype(float)
        return miss, 1.0 - miss
    log_keep = np.log1p(-e_h)
    return np.exp(n * log_keep), -np.expm1(n * log_keep)


def herald_normalizers(mu: float, e_h: float,
                       n_max: int = DEFAULT_N_MAX) -> HeraldNormalizers:
    pn = poisson_vector(mu, n_max)
    miss, hit = _miss_vector(validate_probability("e_h", e_h), n_max)
    return HeraldNormalizers(
        click_closed=-math.expm1(-mu * e_h),
        silent_closed=math.exp(-mu * e_h),
        click_summed=float(pn @ hit),
        silent_summed=float(pn @ miss),
    )


def _branches(cfg: SourceConfig, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Распределения в выбранном окне: при срабатывании детектора (fired)
    и без срабатывания (silent)
    """
    pn = poisson_vector(cfg.mu, n_max)
    miss, hit = _miss_vector(cfg.e_h, n_max)
    fired = pn * hit / -math.expm1(-cfg.mu * cfg.e_h)
    silent = pn * miss / math.exp(-cfg.mu * cfg.e_h)
    return fired, silent


def _herald_probability(cfg: SourceConfig, n_windows: np.ndarray | int):
    """Вероятность хотя бы одного настоящего срабатывания за n_windows окон"""
    return -np.expm1(-np.asarray(n_windows, dtype=float) * cfg.mu * cfg.e_h)


def _mix(cfg: SourceConfig, herald: float, n_max: int,
         flags: tuple[str, ...] = ()) -> PhotonDistribution:
    fired, silent = _branches(cfg, n_max)
    probs = herald * fired + (1.0 - herald) * silent
    return PhotonDistribution.from_probs(probs, source=cfg, flags=flags)


def heralded_distribution(cfg: SourceConfig, n_windows: int,
                          n_max: int = DEFAULT_N_MAX) -> PhotonDistribution:
    """
    Распределение с учетом пропускания канала оповещения e_h
    для интервала синхронизации из n_windows окон.
    """
    n_windows = validate_count("n_windows", n_windows, minimum=1)
    if n_windows > cfg.n_windows:
        raise DomainError("n_windows", n_windows, f"ожидается <= 2^m = {cfg.n_windows}")
    n_max = validate_count("n_max", n_max, minimum=2)

    if cfg.mu == 0:
        return PhotonDistribution.vacuum(n_max, source=cfg)
    if cfg.e_h == 0:
        # детектор никогда не срабатывает: остается только ветвь без оповещения
        probs = poisson_vector(cfg.mu, n_max)
        return PhotonDistribution.from_probs(probs, source=cfg, flags=(NO_HERALD_FLAG,))

    return _mix(cfg, float(_herald_probability(cfg, n_windows)), n_max)


def dark_count_weights(cfg: SourceConfig) -> np.ndarray:
    """
    Веса смеси по интервалам l = 1..2^m: первый темновой отсчет в окне l,
    последний элемент дополнительно включает случай без темновых отсчетов.
    """
    windows = np.arange(1, cfg.n_windows + 1)
    weights = (1.0 - cfg.p_dark) ** (windows - 1) * cfg.p_dark
    weights[-1] += (1.0 - cfg.p_dark) ** cfg.n_windows
    return weights


def with_dark_counts(cfg: SourceConfig,
                     n_max: int = DEFAULT_N_MAX) -> PhotonDistribution:
    """
    Смесь распределений heralded_distribution(cfg, l) с весами первого
    темнового отсчета в окне l.

    Распределения для разных l отличаются только вероятностью настоящего
    оповещения, поэтому смесь сводится к усреднению этой вероятности.
    """
    if cfg.p_dark == 0 or cfg.mu == 0 or cfg.e_h == 0:
        return heralded_distribution(cfg, cfg.n_windows, n_max)
    n_max = validate_count("n_max", n_max, minimum=2)

    weights = dark_count_weights(cfg)
    herald = _herald_probability(cfg, np.arange(1, cfg.n_windows + 1))
    return _mix(cfg, float(weights @ herald), n_max)


@lru_cache(maxsize=128)
def _loss_matrix(transmission: float, n_max: int) -> np.ndarray:
    """B[k, n] = C(n, k) p^k (1 - p)^(n - k)"""
    n = np.arange(n_max + 1)
    matrix = binom.pmf(n[:, None], n[None, :], transmission)
    matrix = np.nan_to_num(matrix, nan=0.0)
    matrix.setflags(write=False)
    return matrix


def apply_signal_loss(dist: PhotonDistribution,
                      transmission: float) -> PhotonDistribution:
    """
    Биномиальные потери: P_k = sum_{n>=k} P_n C(n,k) p^k (1-p)^(n-k)
    Raises:
        DomainError: если пропускание вне [0, 1]
    """
    p = validate_probability("transmission", transmission)
    if p == 1.0:
        return dist
    if p == 0.0:
        return PhotonDistribution.vacuum(dist.n_max, source=dist.source,
                                         flags=dist.flags)
    probs = _loss_matrix(p, dist.n_max) @ dist.probs
    # масса за n_max частично переходит в k <= n_max; оставляем ее как остаток
    probs = np.clip(probs, 0.0, 1.0)
    return PhotonDistribution(probs, max(1.0 - float(probs.sum()), 0.0),
                              dist.source, dist.flags)


def total_signal_transmission(cfg: SourceConfig) -> float:
    """e_s * e_sw^(m+1): каждый фотон проходит m+1 ключей"""
    return cfg.e_s_tot


def output_distribution(cfg: SourceConfig,
                        n_max: int = DEFAULT_N_MAX) -> PhotonDistribution:
    """Итоговое распределение числа фотонов с учетом всех потерь"""
    return apply_signal_loss(with_dark_counts(cfg, n_max),
                             total_signal_transmission(cfg))


def output_trace(cfg: SourceConfig, n_max: int = DEFAULT_N_MAX) -> LossChainTrace:
    heralded = heralded_distribution(cfg, cfg.n_windows, n_max)
    dark = with_dark_counts(cfg, n_max)
    final = apply_signal_loss(dark, total_signal_transmission(cfg))
    logger.debug(f"trace {cfg.short()} p1: heralded={heralded.p1:.6g} "
                 f"dark={dark.p1:.6g} final={final.p1:.6g}")
    return LossChainTrace((
        ("ideal", ideal_distribution(cfg, n_max)),
        ("heralded", heralded),
        ("dark", dark),
        ("final", final),
    ))
