"""
Модели предметной области: параметры источника, распределения числа фотонов,
результаты оптимизации и Монте-Карло
"""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from ..infra.storage import ResultTable
from .exceptions import (
    ConfigValidationError,
    DomainError,
    InconsistentRateError,
    TruncationError,
)
from .utils import NORM_TOLERANCE, TAIL_TOLERANCE

# Максимальное число корректирующих ступеней (2^m окон держим в памяти)
MAX_STAGES = 20

# Порог согласования mu и delta_t0 * r
RATE_RELATIVE_TOLERANCE = 1e-12

# Порядок полей конфигурации в выходных таблицах
SOURCE_COLUMNS = (
    "m", "delta_t0_ns", "mu", "herald_rate_r", "e_h", "e_s", "e_sw_db", "r_dark",
)


def _check_number(name: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
        raise ConfigValidationError(name, value, "ожидается число")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigValidationError(name, value, "ожидается конечное число")
    return value


@dataclass(frozen=True)
class SourceConfig:
    """
    Полный набор физических параметров источника.

    Единицы фиксированы: delta_t0 в наносекундах, скорости в отсчетах в секунду,
    вносимые потери ключа в дБ, mu безразмерно. mu можно задать напрямую или
    через скорость пар herald_rate_r; если заданы оба, они должны совпадать.
    """

    m: int = 0
    delta_t0_ns: float = 2.0
    mu: float | None = None
    herald_rate_r: float | None = None
    e_h: float = 1.0
    e_s: float = 1.0
    e_sw_db: float = 0.0
    r_dark: float = 0.0

    def __post_init__(self):
        if isinstance(self.m, bool) or not isinstance(self.m, (int, np.integer)):
            raise ConfigValidationError("m", self.m, "ожидается целое число")
        if not 0 <= self.m <= MAX_STAGES:
            raise ConfigValidationError("m", self.m,
                                        f"ожидается 0 <= m <= {MAX_STAGES}")
        object.__setattr__(self, "m", int(self.m))

        delta_t0 = _check_number("delta_t0_ns", self.delta_t0_ns)
        if delta_t0 <= 0:
            raise ConfigValidationError("delta_t0_ns", delta_t0, "ожидается > 0")
        object.__setattr__(self, "delta_t0_ns", delta_t0)

        for name in ("e_h", "e_s"):
            value = _check_number(name, getattr(self, name))
            if not 0 <= value <= 1:
                raise ConfigValidationError(name, value, "ожидается значение в [0, 1]")
            object.__setattr__(self, name, value)

        for name in ("e_sw_db", "r_dark"):
            value = _check_number(name, getattr(self, name))
            if value < 0:
                raise ConfigValidationError(name, value, "ожидается >= 0")
            object.__setattr__(self, name, value)

        implied_mu = None
        if self.herald_rate_r is not None:
            rate = _check_number("herald_rate_r", self.herald_rate_r)
            if rate < 0:
                raise ConfigValidationError("herald_rate_r", rate, "ожидается >= 0")
            object.__setattr__(self, "herald_rate_r", rate)
            implied_mu = self.delta_t0_s * rate

        if self.mu is None:
            mu = implied_mu if implied_mu is not None else 0.0
        else:
            mu = _check_number("mu", self.mu)
            if mu < 0:
                raise ConfigValidationError("mu", mu, "ожидается >= 0")
            if implied_mu is not None and not math.isclose(
                    mu, implied_mu, rel_tol=RATE_RELATIVE_TOLERANCE, abs_tol=0.0):
                raise InconsistentRateError(mu, implied_mu)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def from_rate(cls, herald_rate_r: float, delta_t0_ns: float = 2.0,
                  **kwargs: Any) -> "SourceConfig":
        """Конфигурация по скорости пар r и длительности окна"""
        return cls(herald_rate_r=herald_rate_r, delta_t0_ns=delta_t0_ns, **kwargs)

    def replace(self, **changes: Any) -> "SourceConfig":
        """
        Новая конфигурация с измененными полями.
        Явно заданный mu отвязывает конфигурацию от herald_rate_r,
        а смена окна при заданном r пересчитывает mu.
        """
        if "mu" in changes and "herald_rate_r" not in changes:
            changes["herald_rate_r"] = None
        elif self.herald_rate_r is not None and "mu" not in changes and (
                "delta_t0_ns" in changes or "herald_rate_r" in changes):
            changes["mu"] = None
        return dataclasses.replace(self, **changes)

    @property
    def delta_t0_s(self) -> float:
        return self.delta_t0_ns * 1e-9

    @property
    def n_windows(self) -> int:
        return 2 ** self.m

    @property
    def mu_T(self) -> float:
        return self.n_windows * self.mu

    @property
    def period_ns(self) -> float:
        return self.n_windows * self.delta_t0_ns

    @property
    def clock_frequency_hz(self) -> float:
        return 1.0 / (self.period_ns * 1e-9)

    @property
    def e_sw(self) -> float:
        return 10.0 ** (-self.e_sw_db / 10.0)

    @property
    def p_dark(self) -> float:
        return -math.expm1(-self.r_dark * self.delta_t0_s)

    @property
    def e_s_tot(self) -> float:
        return self.e_s * self.e_sw ** (self.m + 1)

    @property
    def is_lossless(self) -> bool:
        return (self.e_h == 1.0 and self.e_s == 1.0 and self.e_sw_db == 0.0
                and self.r_dark == 0.0)

    def echo(self) -> dict[str, Any]:
        """Поля конфигурации в фиксированном порядке (для эха в выходных файлах)"""
        return {name: getattr(self, name) for name in SOURCE_COLUMNS}

    def short(self) -> str:
        return (f"m={self.m} mu={self.mu:.6g} e_h={self.e_h:g} e_s={self.e_s:g} "
                f"il={self.e_sw_db:g}dB r_dark={self.r_dark:g}")


@dataclass(frozen=True, eq=False)
class PhotonDistribution:
    """
    Усеченное распределение числа фотонов в выходном окне.

    probs[n] - вероятность n фотонов, n = 0..n_max; tail_mass - оценка
    вероятности за пределом n_max.
    """

    probs: np.ndarray
    tail_mass: float = 0.0
    source: SourceConfig | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise DomainError("probs", probs.shape, "ожидается непустой вектор")
        if np.any(probs < 0) or np.any(probs > 1) or not np.all(np.isfinite(probs)):
            raise DomainError("probs", probs, "каждая вероятность должна быть в [0, 1]")
        tail = float(self.tail_mass)
        if tail < 0:
            raise DomainError("tail_mass", tail, "ожидается >= 0")
        total = float(probs.sum()) + tail
        if abs(total - 1.0) > NORM_TOLERANCE:
            raise DomainError("probs", total, "распределение не нормировано")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "tail_mass", tail)
        object.__setattr__(self, "flags", tuple(self.flags))

    @classmethod
    def from_probs(cls, probs: np.ndarray, source: SourceConfig | None = None,
                   flags: tuple[str, ...] = ()) -> "PhotonDistribution":
        """
        Построить распределение из вектора вероятностей.
        Остаток 1 - sum(probs) записывается в tail_mass.
        Raises:
            TruncationError: если остаток >= 1e-9
        """
        probs = np.asarray(probs, dtype=float)
        # ошибки округления порядка машинной точности
        probs = np.where((probs < 0) & (probs > -1e-15), 0.0, probs)
        probs = np.where((probs > 1) & (probs < 1 + 1e-15), 1.0, probs)
        tail = 1.0 - float(probs.sum())
        if tail >= TAIL_TOLERANCE:
            raise TruncationError(len(probs) - 1, tail)
        return cls(probs, max(tail, 0.0), source, flags)

    @classmethod
    def vacuum(cls, n_max: int, source: SourceConfig | None = None,
               flags: tuple[str, ...] = ("vacuum",)) -> "PhotonDistribution":
        probs = np.zeros(n_max + 1)
        probs[0] = 1.0
        return cls(probs, 0.0, source, flags)

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    @property
    def p0(self) -> float:
        return float(self.probs[0])

    @property
    def p1(self) -> float:
        return float(self.probs[1]) if self.n_max >= 1 else 0.0

    @property
    def p_ge2(self) -> float:
        return float(self.probs[2:].sum()) + self.tail_mass

    @property
    def mean(self) -> float:
        return float(np.arange(self.n_max + 1) @ self.probs)

    @property
    def variance(self) -> float:
        n = np.arange(self.n_max + 1)
        return float(((n - self.mean) ** 2) @ self.probs)

    def to_result_table(self, kind: str = "dist") -> ResultTable:
        echo = self.source.echo() if self.source else {}
        columns = ("n", "probability", *echo.keys())
        rows = [(n, float(p), *echo.values()) for n, p in enumerate(self.probs)]
        metadata = {
            "tail_mass": self.tail_mass,
            "flags": list(self.flags),
            "source": echo,
        }
        return ResultTable(kind, columns, rows, metadata)


STAGE_LABELS = ("ideal", "heralded", "dark", "final")


@dataclass(frozen=True)
class LossChainTrace:
    """Промежуточные распределения цепочки потерь в фиксированном порядке"""

    stages: tuple[tuple[str, PhotonDistribution], ...]

    def __post_init__(self):
        labels = tuple(label for label, _ in self.stages)
        if labels != STAGE_LABELS:
            raise DomainError("stages", labels, f"ожидается порядок {STAGE_LABELS}")

    def __getitem__(self, label: str) -> PhotonDistribution:
        for name, dist in self.stages:
            if name == label:
                return dist
        raise KeyError(label)

    def __iter__(self) -> Iterator[tuple[str, PhotonDistribution]]:
        return iter(self.stages)

    @property
    def final(self) -> PhotonDistribution:
        return self["final"]


@dataclass(frozen=True)
class OptimizationResult:
    mu_opt: float
    p1_max: float
    snr_at_opt: float
    mandel_q_at_opt: float
    iterations: int
    converged: bool
    boundary: str | None = None
    feasible: bool = True
    constraint_active: bool = False
    snr_target: float | None = None

    @classmethod
    def infeasible(cls, snr_target: float, iterations: int) -> "OptimizationResult":
        return cls(math.nan, math.nan, math.nan, math.nan, iterations,
                   converged=False, feasible=False, snr_target=snr_target)

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


# Верхняя граница числа испытаний
MAX_TRIALS = 10 ** 12


@dataclass(frozen=True)
class McConfig:
    trials: int
    seed: int = 42
    shards: int = 1

    def __post_init__(self):
        for name, minimum in (("trials", 1), ("seed", 0), ("shards", 1)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigValidationError(name, value, "ожидается целое число")
            if value < minimum:
                raise ConfigValidationError(name, value, f"ожидается >= {minimum}")
            object.__setattr__(self, name, int(value))
        if self.trials > MAX_TRIALS:
            raise ConfigValidationError("trials", self.trials,
                                        f"ожидается <= {MAX_TRIALS:.0e}")
        if self.seed >= 2 ** 64:
            raise ConfigValidationError("seed", self.seed, "ожидается < 2^64")


@dataclass(frozen=True, eq=False)
class McHistogram:
    counts: np.ndarray
    trials: int
    source: SourceConfig
    mc: McConfig = field(repr=False, default=None)

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if int(counts.sum()) != self.trials:
            raise DomainError("counts", int(counts.sum()),
                              f"сумма отсчетов не равна числу испытаний {self.trials}")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.trials

    def to_result_table(self) -> ResultTable:
        echo = self.source.echo()
        columns = ("k", "count", "frequency", *echo.keys())
        rows = [
            (k, int(c), float(c) / self.trials, *echo.values())
            for k, c in enumerate(self.counts)
        ]
        metadata = {
            "trials": self.trials,
            "source": echo,
            "mc": dataclasses.asdict(self.mc) if self.mc else None,
        }
        return ResultTable("montecarlo", columns, rows, metadata)
