"""
Параметрические прогоны для графиков: распределения по числу ступеней,
P_1 от накачки и от потерь ключей, максимум P_1 при ограничении на SNR
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np

from .. import __version__
from ..decorators import log_action
from ..infra.storage import ResultTable, stamp
from .exceptions import DomainError, UndefinedValueError
from .loss_model import output_distribution
from .models import SOURCE_COLUMNS, OptimizationResult, SourceConfig
from .optimizer import DEFAULT_MU_RANGE, max_p1_with_snr_floor, optimize_mu
from .photon_stats import DEFAULT_N_MAX, mandel_q, snr
from .utils import log_grid

FIGURE_IDS = ("fig2", "fig3", "fig4", "fig5", "custom")

# Параметры каналов для графиков потерь
FIGURE_E_H = 0.85
FIGURE_E_S = 0.9

DEFAULT_FIG2_STAGES = tuple(range(0, 11))
DEFAULT_STAGES = tuple(range(0, 7))
DEFAULT_IL_VALUES = (0.5, 1.0)
DEFAULT_MU_VALUES = (0.1, 0.2)
DEFAULT_SNR_TARGETS = (5.0, 10.0, 20.0, 50.0, 100.0, 200.0)

SWEEP_AXES = ("mu", "e_sw_db", "e_h", "e_s", "r_dark", "m")

DERIVED_COLUMNS = ("mu_T", "e_s_tot", "clock_freq_hz")
OUTPUT_COLUMNS = ("p0", "p1", "p_ge2", "snr", "mandel_q", "mu_opt",
                  "snr_target", "feasible")
RECORD_COLUMNS = SOURCE_COLUMNS + DERIVED_COLUMNS + OUTPUT_COLUMNS


def default_mu_grid(points: int = 200) -> np.ndarray:
    return log_grid(1e-3, 2.0, points)


def default_il_grid(points: int = 50) -> np.ndarray:
    return np.linspace(0.0, 2.0, points)


@dataclass(frozen=True)
class SweepRecord:
    source: SourceConfig
    p0: float
    p1: float
    p_ge2: float
    snr: float
    mandel_q: float
    mu_opt: float | None = None
    snr_target: float | None = None
    feasible: bool = True

    @classmethod
    def evaluate(cls, cfg: SourceConfig, n_max: int = DEFAULT_N_MAX,
                 **extra: Any) -> "SweepRecord":
        dist = output_distribution(cfg, n_max)
        try:
            q = mandel_q(dist)
        except UndefinedValueError:
            q = math.nan
        return cls(cfg, dist.p0, dist.p1, dist.p_ge2, snr(dist), q, **extra)

    @classmethod
    def from_optimum(cls, cfg: SourceConfig, result: OptimizationResult,
                     n_max: int = DEFAULT_N_MAX) -> "SweepRecord":
        if not result.feasible:
            nan = math.nan
            return cls(cfg, nan, nan, nan, nan, nan, None, result.snr_target, False)
        return cls.evaluate(cfg.replace(mu=result.mu_opt), n_max,
                            mu_opt=result.mu_opt, snr_target=result.snr_target)

    def row(self) -> tuple:
        cfg = self.source
        return (
            *cfg.echo().values(),
            cfg.mu_T, cfg.e_s_tot, cfg.clock_frequency_hz,
            self.p0, self.p1, self.p_ge2, self.snr, self.mandel_q,
            self.mu_opt, self.snr_target, self.feasible,
        )


@dataclass(frozen=True)
class SweepTable:
    figure_id: str
    records: tuple[SweepRecord, ...]
    parameters: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise DomainError("figure_id", self.figure_id,
                              f"ожидается одно из {FIGURE_IDS}")
        if not self.records:
            raise DomainError("records", 0, "таблица не может быть пустой")
        object.__setattr__(self, "records", tuple(self.records))

    @property
    def metadata(self) -> dict[str, Any]:
        canonical = json.dumps(self.parameters, sort_keys=True, default=repr)
        return {
            "figure_id": self.figure_id,
            "tool_version": __version__,
            "timestamp": stamp(),
            "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
            "parameters": self.parameters,
        }

    def to_result_table(self) -> ResultTable:
        return ResultTable(self.figure_id, RECORD_COLUMNS,
                           [r.row() for r in self.records], self.metadata)

    def __len__(self) -> int:
        return len(self.records)


def _figure_config(m: int, e_sw_db: float, r_dark: float, mu: float = 0.0,
                   delta_t0_ns: float = 2.0) -> SourceConfig:
    return SourceConfig(m=m, mu=mu, e_h=FIGURE_E_H, e_s=FIGURE_E_S,
                        e_sw_db=e_sw_db, r_dark=r_dark, delta_t0_ns=delta_t0_ns)


def _floats(values: Iterable[float]) -> list[float]:
    return [float(v) for v in values]


@log_action
def figure2(m_values: Sequence[int] = DEFAULT_FIG2_STAGES,
            n_max: int = DEFAULT_N_MAX,
            mu_range: tuple[float, float] = DEFAULT_MU_RANGE) -> SweepTable:
    """Идеальный источник: P_0, P_1, P_>=2 и Q_M при mu_opt для каждого m"""
    records = []
    for m in m_values:
        cfg = SourceConfig(m=int(m))
        result = optimize_mu(cfg, mu_range=mu_range, n_max=n_max)
        records.append(SweepRecord.from_optimum(cfg, result, n_max))
    parameters = {"m_values": [int(m) for m in m_values], "n_max": n_max,
                  "mu_range": list(mu_range)}
    return SweepTable("fig2", tuple(records), parameters)


@log_action
def figure3(m_values: Sequence[int] = DEFAULT_STAGES,
            mu_grid: Sequence[float] | None = None,
            il_db_values: Sequence[float] = DEFAULT_IL_VALUES,
            r_dark: float = 0.0, n_max: int = DEFAULT_N_MAX) -> SweepTable:
    """P_1(mu) для каждой пары (потери ключа, m)"""
    mu_grid = default_mu_grid() if mu_grid is None else mu_grid
    records = []
    for il in il_db_values:
        for m in m_values:
            base = _figure_config(int(m), float(il), r_dark)
            for mu in mu_grid:
                records.append(SweepRecord.evaluate(base.replace(mu=float(mu)), n_max))
    parameters = {"m_values": [int(m) for m in m_values],
                  "mu_grid": _floats(mu_grid), "il_db_values": _floats(il_db_values),
                  "r_dark": r_dark, "n_max": n_max}
    return SweepTable("fig3", tuple(records), parameters)


@log_action
def figure4(mu_values: Sequence[float] = DEFAULT_MU_VALUES,
            il_grid: Sequence[float] | None = None,
            m_values: Sequence[int] = DEFAULT_STAGES,
            r_dark: float = 0.0, n_max: int = DEFAULT_N_MAX) -> SweepTable:
    """P_1 от вносимых потерь ключа для каждой пары (mu, m)"""
    il_grid = default_il_grid() if il_grid is None else il_grid
    records = []
    for mu in mu_values:
        for m in m_values:
            for il in il_grid:
                cfg = _figure_config(int(m), float(il), r_dark, mu=float(mu))
                records.append(SweepRecord.evaluate(cfg, n_max))
    parameters = {"mu_values": _floats(mu_values), "il_grid": _floats(il_grid),
                  "m_values": [int(m) for m in m_values], "r_dark": r_dark,
                  "n_max": n_max}
    return SweepTable("fig4", tuple(records), parameters)


@log_action
def figure5(snr_grid: Sequence[float] = DEFAULT_SNR_TARGETS,
            m_values: Sequence[int] = DEFAULT_STAGES,
            il_db_values: Sequence[float] = DEFAULT_IL_VALUES,
            r_dark: float = 0.0, n_max: int = DEFAULT_N_MAX,
            mu_range: tuple[float, float] = DEFAULT_MU_RANGE) -> SweepTable:
    """Максимум P_1 при SNR >= цели для каждой тройки (цель, m, потери)"""
    records = []
    for il in il_db_values:
        for m in m_values:
            cfg = _figure_config(int(m), float(il), r_dark)
            for target in snr_grid:
                result = max_p1_with_snr_floor(cfg, float(target), mu_range=mu_range,
                                               n_max=n_max)
                records.append(SweepRecord.from_optimum(cfg, result, n_max))
    parameters = {"snr_grid": _floats(snr_grid), "m_values": [int(m) for m in m_values],
                  "il_db_values": _floats(il_db_values), "r_dark": r_dark,
                  "n_max": n_max, "mu_range": list(mu_range)}
    return SweepTable("fig5", tuple(records), parameters)


@log_action
def custom_sweep(base_cfg: SourceConfig, axis: str, values: Sequence[float],
                 n_max: int = DEFAULT_N_MAX) -> SweepTable:
    """Прогон по одной оси конфигурации"""
    if axis not in SWEEP_AXES:
        raise DomainError("axis", axis, f"ожидается одна из {SWEEP_AXES}")
    records = []
    for value in values:
        value = int(value) if axis == "m" else float(value)
        records.append(SweepRecord.evaluate(base_cfg.replace(**{axis: value}), n_max))
    parameters = {"base": base_cfg.echo(), "axis": axis,
                  "values": [float(v) for v in values], "n_max": n_max}
    return SweepTable("custom", tuple(records), parameters)


def curve_maxima(table: SweepTable) -> dict[tuple[float, int], tuple[float, float]]:
    """Максимум P_1 по каждой кривой таблицы fig3: (потери, m) -> (P_1, mu)"""
    maxima: dict[tuple[float, int], tuple[float, float]] = {}
    for record in table.records:
        key = (record.source.e_sw_db, record.source.m)
        if key not in maxima or record.p1 > maxima[key][0]:
            maxima[key] = (record.p1, record.source.mu)
    return maxima


class ClockReport(NamedTuple):
    period_ns: float
    frequency_hz: float


def clock_report(cfg: SourceConfig) -> ClockReport:
    """Период синхронизирующих часов T = 2^m delta_t0 и частота 1/T"""
    return ClockReport(cfg.period_ns, cfg.clock_frequency_hz)


class StageRecommendation(NamedTuple):
    m: int
    result: OptimizationResult


@log_action
def recommend_stages(cfg_template: SourceConfig, snr_target: float,
                     m_values: Sequence[int] = DEFAULT_STAGES,
                     n_max: int = DEFAULT_N_MAX,
                     mu_range: tuple[float, float] = DEFAULT_MU_RANGE
                     ) -> StageRecommendation | None:
    """
    Число ступеней и накачка с наибольшим P_1 при SNR >= snr_target.
    None, если цель недостижима ни при одном m.
    """
    best = None
    for m in m_values:
        result = max_p1_with_snr_floor(cfg_template.replace(m=int(m)), snr_target,
                                       mu_range=mu_range, n_max=n_max)
        if result.feasible and (best is None or result.p1_max > best.result.p1_max):
            best = StageRecommendation(int(m), result)
    return best


def headline_report(e_sw_db: float = 0.5, mu: float = 0.1, m: int = 4,
                    e_h: float = FIGURE_E_H, e_s: float = FIGURE_E_S,
                    delta_t0_ns: float = 2.0,
                    n_max: int = DEFAULT_N_MAX) -> dict[str, float]:
    """Сравнение m ступеней с источником без мультиплексирования (m = 0)"""
    base = SourceConfig(m=0, mu=mu, e_h=e_h, e_s=e_s, e_sw_db=e_sw_db,
                        delta_t0_ns=delta_t0_ns)
    single = output_distribution(base, n_max)
    muxed_cfg = base.replace(m=m)
    muxed = output_distribution(muxed_cfg, n_max)
    return {
        "p1_m0": single.p1,
        f"p1_m{m}": muxed.p1,
        "p1_ratio": muxed.p1 / single.p1,
        "snr_m0": snr(single),
        f"snr_m{m}": snr(muxed),
        "clock_mhz": clock_report(muxed_cfg).frequency_hz / 1e6,
    }


_GNUPLOT_AXES = {
    "fig2": ("m", "p1", None),
    "fig3": ("mu", "p1", ("e_sw_db", "m")),
    "fig4": ("e_sw_db", "p1", ("mu", "m")),
    "fig5": ("snr_target", "p1", ("e_sw_db", "m")),
}


def gnuplot_script(table: SweepTable, data_path: str) -> str:
    """Команды gnuplot для CSV-файла таблицы (одна линия на кривую)"""
    if table.figure_id == "custom":
        axis = table.parameters["axis"]
        x, y, series = axis, "p1", None
    else:
        x, y, series = _GNUPLOT_AXES[table.figure_id]

    lines = [
        "set datafile separator ','",
        f"set xlabel '{x}'",
        f"set ylabel '{y}'",
        "set key outside",
    ]
    if table.figure_id in ("fig3",):
        lines.append("set logscale x")

    if series is None:
        lines.append(f"plot '{data_path}' using '{x}':'{y}' with linespoints "
                     f"title '{y}'")
        return "\n".join(lines) + "\n"

    keys = []
    for record in table.records:
        key = tuple(getattr(record.source, name) for name in series)
        if key not in keys:
            keys.append(key)

    plots = []
    for key in keys:
        condition = " && ".join(
            f"abs(column('{name}') - {value!r}) < 1e-12"
            for name, value in zip(series, key)
        )
        title = ", ".join(f"{name}={value:g}" for name, value in zip(series, key))
        plots.append(f"'{data_path}' using '{x}':({condition} ? column('{y}') : 1/0) "
                     f"with lines title '{title}'")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"
