"""
Событийное Монте-Карло моделирование источника - независимый оракул
для аналитических распределений
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..decorators import log_action
from .exceptions import ConfigMismatchError
from .models import McConfig, McHistogram, PhotonDistribution, SourceConfig

logger = logging.getLogger("photonmux.core.mc")

# Логический блок испытаний с собственным потоком случайных чисел
BLOCK_TRIALS = 1 << 16

# Число ячеек (испытание x окно), обрабатываемых за один шаг
CHUNK_CELLS = 1 << 21

# Минимальное ожидаемое число отсчетов в бине для z-оценки
MIN_EXPECTED = 5.0

MAX_ABS_Z = 4.0


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _simulate_rows(cfg: SourceConfig, rows: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Выходное число фотонов для rows испытаний"""
    windows = cfg.n_windows
    pairs = rng.poisson(cfg.mu, size=(rows, windows))
    trigger = rng.binomial(pairs, cfg.e_h) > 0
    if cfg.p_dark > 0:
        trigger |= rng.random((rows, windows)) < cfg.p_dark

    # первое срабатывание выбирает окно; без срабатываний - последнее окно
    fired = trigger.any(axis=1)
    chosen = np.where(fired, trigger.argmax(axis=1), windows - 1)
    routed = pairs[np.arange(rows), chosen]
    return rng.binomial(routed, cfg.e_s_tot)


def _simulate_block(cfg: SourceConfig, seed: int, block: int,
                    trials: int) -> np.ndarray:
    rng = _block_rng(seed, block)
    chunk = max(1, CHUNK_CELLS // cfg.n_windows)
    counts = np.zeros(1, dtype=np.int64)
    done = 0
    while done < trials:
        rows = min(chunk, trials - done)
        k = _simulate_rows(cfg, rows, rng)
        counts = _add_counts(counts, np.bincount(k))
        done += rows
    return counts


def _add_counts(total: np.ndarray, extra: np.ndarray) -> np.ndarray:
    if len(extra) > len(total):
        total = np.pad(total, (0, len(extra) - len(total)))
    total[:len(extra)] += extra
    return total


def _run_shard(cfg: SourceConfig, mc: McConfig, shard: int) -> np.ndarray:
    counts = np.zeros(1, dtype=np.int64)
    n_blocks = math.ceil(mc.trials / BLOCK_TRIALS)
    for block in range(shard, n_blocks, mc.shards):
        trials = min(BLOCK_TRIALS, mc.trials - block * BLOCK_TRIALS)
        counts = _add_counts(counts, _simulate_block(cfg, mc.seed, block, trials))
    return counts


@log_action
def simulate(cfg: SourceConfig, mc: McConfig) -> McHistogram:
    """
    Гистограмма выходного числа фотонов по mc.trials испытаниям.

    Испытания разбиты на блоки по 2^16, каждый блок использует поток
    SeedSequence(seed, spawn_key=(номер блока,)). Шарды берут блоки по кругу,
    поэтому результат зависит только от (cfg, seed, trials).
    """
    counts = np.zeros(1, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=mc.shards) as pool:
        futures = [pool.submit(_run_shard, cfg, mc, shard)
                   for shard in range(mc.shards)]
        for future in futures:
            counts = _add_counts(counts, future.result())
    logger.debug(f"simulate {cfg.short()} trials={mc.trials} bins={len(counts)}")
    return McHistogram(counts, mc.trials, cfg, mc)


@dataclass(frozen=True)
class ComparisonReport:
    tv_distance: float
    tv_threshold: float
    z_scores: tuple[float, ...]
    max_abs_z: float
    passed: bool
    trials: int
    pooled_from: int

    def as_dict(self) -> dict:
        return {
            "tv_distance": self.tv_distance,
            "tv_threshold": self.tv_threshold,
            "max_abs_z": self.max_abs_z,
            "passed": self.passed,
            "trials": self.trials,
            "pooled_from": self.pooled_from,
        }


def _pooled(values: np.ndarray, start: int) -> np.ndarray:
    return np.append(values[:start], values[start:].sum())


def compare(analytic: PhotonDistribution, hist: McHistogram,
            check_config: bool = True) -> ComparisonReport:
    """
    Сравнение аналитического распределения с гистограммой.

    Проходит, если расстояние полной вариации <= 3 sqrt(n_max / trials)
    и все |z| <= 4. Бины с ожидаемым числом отсчетов меньше 5 объединяются
    с последним бином, где ожидается не меньше 5 отсчетов.
    Raises:
        ConfigMismatchError: если распределение построено для другой конфигурации
    """
    if check_config and analytic.source is not None and analytic.source != hist.source:
        raise ConfigMismatchError(
            f"аналитика для [{analytic.source.short()}], "
            f"гистограмма для [{hist.source.short()}]"
        )

    size = max(len(analytic.probs), len(hist.counts))
    probs = np.pad(analytic.probs, (0, size - len(analytic.probs)))
    counts = np.pad(hist.counts, (0, size - len(hist.counts)))
    frequencies = counts / hist.trials

    tv = 0.5 * (float(np.abs(frequencies - probs).sum()) + analytic.tail_mass)
    tv_threshold = 3.0 * math.sqrt(analytic.n_max / hist.trials)

    expected = hist.trials * probs
    large = np.nonzero(expected >= MIN_EXPECTED)[0]
    if len(large) == 0:
        z_scores: tuple[float, ...] = ()
        pooled_from = 0
    else:
        pooled_from = int(large[-1])
        p = _pooled(probs, pooled_from)
        observed = _pooled(counts.astype(float), pooled_from)
        sigma = np.sqrt(hist.trials * p * (1 - p))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(sigma > 0, (observed - hist.trials * p) / sigma,
                         np.where(observed == hist.trials * p, 0.0, math.inf))
        z_scores = tuple(float(v) for v in z)

    max_abs_z = max((abs(v) for v in z_scores), default=0.0)
    passed = tv <= tv_threshold and max_abs_z <= MAX_ABS_Z
    if not passed:
        logger.warning(f"Расхождение аналитики и Монте-Карло: tv={tv:.3e} "
                       f"(порог {tv_threshold:.3e}), max|z|={max_abs_z:.2f}")
    return ComparisonReport(tv, tv_threshold, z_scores, max_abs_z, passed,
                            hist.trials, pooled_from)
