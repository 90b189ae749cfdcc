"""
Набор проверок сборки: предельные случаи, нормировка, опорные значения,
оптимизатор против сетки и согласие с Монте-Карло
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core.experiments import clock_report, curve_maxima, figure3, headline_report
from ..core.loss_model import herald_normalizers, output_distribution
from ..core.mc_oracle import compare, simulate
from ..core.models import McConfig, SourceConfig
from ..core.optimizer import optimize_mu
from ..core.photon_stats import ideal_distribution, poisson_vector, snr
from ..decorators import log_action
from ..infra.storage import ResultTable

logger = logging.getLogger("photonmux.cli.validation")

VALIDATION_SEED = 2024
REDUCTION_SAMPLES = 100
OPTIMIZER_SAMPLES = 10
REDUCTION_TOL = 1e-12
DENOMINATOR_TOL = 1e-10
NORM_TOL = 1e-9

# Опорные полосы, снятые с графиков; в отчете видно, выполнены ли они
Q10_BAND = (-0.995, -0.985)
SNR_M4_BAND = (44.0, 8.0)
SNR_1DB_BAND = {0: 10.0, 4: 50.0}

# Сетка конфигураций для сравнения с Монте-Карло
MC_STAGES = (0, 2, 4)
MC_MU_VALUES = (0.05, 0.1, 0.5)
MC_IL_VALUES = (0.5, 1.0)
MC_DARK_RATE = 1e6


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed(self) -> tuple[CheckResult, ...]:
        return tuple(check for check in self.checks if not check.passed)

    def to_result_table(self) -> ResultTable:
        rows = [(c.name, c.passed, c.detail) for c in self.checks]
        return ResultTable("validation", ("check", "passed", "detail"), rows,
                           {"passed": self.passed, "checks": len(self.checks)})


def _random_lossy(rng: np.random.Generator, stages: tuple[int, int]) -> SourceConfig:
    return SourceConfig(
        m=int(rng.integers(stages[0], stages[1] + 1)),
        mu=float(rng.uniform(0.01, 1.5)),
        e_h=float(rng.uniform(0.5, 1.0)),
        e_s=float(rng.uniform(0.7, 1.0)),
        e_sw_db=float(rng.uniform(0.0, 1.0)),
        r_dark=float(rng.choice([0.0, 1e5, 1e6])),
    )


def check_reductions(n_max: int) -> CheckResult:
    """Без потерь цепочка совпадает с идеальным источником, при m = 0 с Пуассоном"""
    rng = np.random.default_rng(VALIDATION_SEED)
    worst_ideal = 0.0
    worst_poisson = 0.0
    for _ in range(REDUCTION_SAMPLES):
        cfg = SourceConfig(m=int(rng.integers(0, 11)), mu=float(rng.uniform(1e-3, 2.0)))
        ideal = ideal_distribution(cfg, n_max)
        diff = output_distribution(cfg, n_max).probs - ideal.probs
        worst_ideal = max(worst_ideal, float(np.abs(diff).max()))

        lossy = _random_lossy(rng, (0, 0))
        expected = poisson_vector(lossy.mu * lossy.e_s_tot, n_max)
        diff = output_distribution(lossy, n_max).probs - expected
        worst_poisson = max(worst_poisson, float(np.abs(diff).max()))

    passed = worst_ideal <= REDUCTION_TOL and worst_poisson <= REDUCTION_TOL
    return CheckResult("reductions", passed,
                       f"ideal={worst_ideal:.2e} poisson={worst_poisson:.2e}")


def check_denominators(n_max: int) -> CheckResult:
    rng = np.random.default_rng(VALIDATION_SEED + 1)
    worst = 0.0
    for _ in range(REDUCTION_SAMPLES):
        norms = herald_normalizers(float(rng.uniform(1e-3, 2.0)),
                                   float(rng.uniform(0.05, 1.0)), n_max)
        worst = max(worst, abs(norms.click_closed - norms.click_summed),
                    abs(norms.silent_closed - norms.silent_summed))
    return CheckResult("denominators", worst <= DENOMINATOR_TOL, f"max={worst:.2e}")


def check_normalization(n_max: int) -> CheckResult:
    rng = np.random.default_rng(VALIDATION_SEED + 2)
    worst = 0.0
    for _ in range(REDUCTION_SAMPLES):
        dist = output_distribution(_random_lossy(rng, (0, 8)), n_max)
        worst = max(worst, abs(float(dist.probs.sum()) + dist.tail_mass - 1.0))
    return CheckResult("normalization", worst <= NORM_TOL, f"max={worst:.2e}")


def check_ideal_stages(n_max: int) -> CheckResult:
    """Q_M при m = 10 близок к -0.99, mu_opt строго убывает по m"""
    results = [optimize_mu(SourceConfig(m=m), n_max=n_max) for m in range(0, 11)]
    mu_opt = [r.mu_opt for r in results[:9]]
    decreasing = all(a > b for a, b in zip(mu_opt, mu_opt[1:]))
    q10 = results[10].mandel_q_at_opt
    passed = decreasing and abs(q10 + 0.99) <= 0.01
    in_band = Q10_BAND[0] <= q10 <= Q10_BAND[1]
    return CheckResult("ideal_stages", passed,
                       f"Q(m=10)={q10:.5f} mu_opt decreasing={decreasing} "
                       f"band{list(Q10_BAND)} met={in_band}")


def check_headline(n_max: int) -> CheckResult:
    report = headline_report(e_sw_db=0.5, mu=0.1, m=4, n_max=n_max)
    passed = (
        abs(report["p1_m0"] - 0.08) <= 0.02
        and abs(report["p1_m4"] - 0.40) <= 0.05
        and 4.0 <= report["p1_ratio"] <= 6.0
        and abs(report["snr_m0"] - 22.0) <= 5.0
        # по формулам модели SNR(m=4) = 34.1
        and abs(report["snr_m4"] - 34.14) <= 0.5
    )
    detail = " ".join(f"{k}={v:.4g}" for k, v in report.items())
    center, width = SNR_M4_BAND
    detail += (f" snr_m4 band {center:g}+-{width:g} "
               f"met={abs(report['snr_m4'] - center) <= width}")
    return CheckResult("headline", passed, detail)


def _pump_for_p1(cfg: SourceConfig, target: float, lo: float, hi: float,
                 n_max: int) -> float:
    """mu на возрастающей ветви P_1(mu), где P_1 = target"""
    for _ in range(200):
        middle = (lo + hi) / 2
        if output_distribution(cfg.replace(mu=middle), n_max).p1 < target:
            lo = middle
        else:
            hi = middle
    return (lo + hi) / 2


def check_one_db_regime(n_max: int) -> CheckResult:
    """P_1 = 0.2 достижимо при m = 0 и m = 4, SNR при m = 4 не меньше 4x"""
    values = {}
    for m in (0, 4):
        cfg = SourceConfig(m=m, e_h=0.85, e_s=0.9, e_sw_db=1.0)
        best = optimize_mu(cfg, n_max=n_max)
        if best.p1_max < 0.2:
            return CheckResult("one_db_regime", False,
                               f"m={m}: max P1={best.p1_max:.4f} < 0.2")
        mu = _pump_for_p1(cfg, 0.2, 1e-4, best.mu_opt, n_max)
        values[m] = snr(output_distribution(cfg.replace(mu=mu), n_max))
    ratio = values[4] / values[0]
    in_band = all(abs(values[m] - SNR_1DB_BAND[m]) <= 0.25 * SNR_1DB_BAND[m]
                  for m in (0, 4))
    return CheckResult("one_db_regime", ratio >= 4.0,
                       f"snr_m0={values[0]:.3f} snr_m4={values[4]:.3f} "
                       f"ratio={ratio:.2f} band 10->50+-25% met={in_band}")


def check_figure3_structure(n_max: int) -> CheckResult:
    maxima = curve_maxima(figure3(n_max=n_max))
    half = [maxima[(0.5, m)][0] for m in range(0, 7)]
    peak = int(np.argmax(half))
    falling = all(a > b for a, b in zip(half[3:], half[4:]))

    one = {m: maxima[(1.0, m)][0] for m in range(0, 7)}
    better = sorted(m for m in range(1, 7) if one[m] > one[0])
    # по формулам модели при 1 дБ m = 0 уступают ступени 1..4
    passed = peak == 3 and falling and better == [1, 2, 3, 4]
    return CheckResult("figure3_structure", passed,
                       f"0.5dB peak m={peak} falling={falling}; 1dB better={better}")


def check_clock() -> CheckResult:
    report = clock_report(SourceConfig(m=4, delta_t0_ns=2.0))
    passed = (math.isclose(report.period_ns, 32.0, rel_tol=1e-12)
              and math.isclose(report.frequency_hz, 31.25e6, rel_tol=1e-12))
    return CheckResult("clock", passed,
                       f"T={report.period_ns:g} ns f={report.frequency_hz:.6g} Hz")


def check_optimizer(n_max: int, mu_range: tuple[float, float] = (1e-4, 2.0),
                    global_points: int = 2000, local_points: int = 10_000,
                    window: float = 1e-3) -> CheckResult:
    """
    optimize_mu против перебора: грубая сетка по всему диапазону
    и плотная сетка в окрестности найденного максимума
    """
    rng = np.random.default_rng(VALIDATION_SEED + 3)
    worst_mu = 0.0
    worst_p1 = 0.0
    lo, hi = mu_range
    for _ in range(OPTIMIZER_SAMPLES):
        cfg = _random_lossy(rng, (1, 6))
        result = optimize_mu(cfg, mu_range=mu_range, n_max=n_max)

        coarse = np.geomspace(lo, hi, global_points)
        coarse_best = max(output_distribution(cfg.replace(mu=float(mu)), n_max).p1
                          for mu in coarse)
        worst_p1 = max(worst_p1, coarse_best - result.p1_max)

        fine = np.linspace(max(lo, result.mu_opt - window),
                           min(hi, result.mu_opt + window), local_points)
        p1 = np.array([output_distribution(cfg.replace(mu=float(mu)), n_max).p1
                       for mu in fine])
        best = int(np.argmax(p1))
        worst_mu = max(worst_mu, abs(float(fine[best]) - result.mu_opt))
        worst_p1 = max(worst_p1, abs(float(p1[best]) - result.p1_max))

    passed = worst_mu <= 1e-5 and worst_p1 <= 1e-8
    return CheckResult("optimizer", passed,
                       f"max |dmu|={worst_mu:.2e} max |dP1|={worst_p1:.2e}")


def montecarlo_grid() -> list[SourceConfig]:
    grid = [
        SourceConfig(m=m, mu=mu, e_h=0.85, e_s=0.9, e_sw_db=il)
        for m in MC_STAGES for mu in MC_MU_VALUES for il in MC_IL_VALUES
    ]
    grid.append(SourceConfig(m=4, mu=0.1, e_h=0.85, e_s=0.9, e_sw_db=0.5,
                             r_dark=MC_DARK_RATE))
    return grid


def check_montecarlo(mc: McConfig, n_max: int) -> CheckResult:
    failures = []
    worst_z = 0.0
    grid = montecarlo_grid()
    for cfg in grid:
        report = compare(output_distribution(cfg, n_max), simulate(cfg, mc))
        worst_z = max(worst_z, report.max_abs_z)
        if not report.passed:
            failures.append(f"[{cfg.short()}] tv={report.tv_distance:.2e}")
    detail = f"{len(grid)} конфигураций, trials={mc.trials}, max|z|={worst_z:.2f}"
    if failures:
        detail += "; расхождения: " + "; ".join(failures)
    return CheckResult("montecarlo", not failures, detail)


@log_action
def run_validation(mc: McConfig, n_max: int = 30,
                   include_montecarlo: bool = True) -> ValidationReport:
    checks: list[Callable[[], CheckResult]] = [
        lambda: check_reductions(n_max),
        lambda: check_denominators(n_max),
        lambda: check_normalization(n_max),
        lambda: check_ideal_stages(n_max),
        lambda: check_headline(n_max),
        lambda: check_one_db_regime(n_max),
        lambda: check_figure3_structure(n_max),
        check_clock,
        lambda: check_optimizer(n_max),
    ]
    if include_montecarlo:
        checks.append(lambda: check_montecarlo(mc, n_max))

    results = []
    for check in checks:
        result = check()
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, f"check {result.name} passed={result.passed} {result.detail}")
        results.append(result)
    return ValidationReport(tuple(results))
