"""
CLI интерфейс приложения
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from prettytable import PrettyTable

from ..core.exceptions import (
    ConfigMismatchError,
    ConfigParseError,
    ConfigValidationError,
    DomainError,
    PhotonMuxError,
    TruncationError,
    UndefinedValueError,
)
from ..core.experiments import (
    custom_sweep,
    figure2,
    figure3,
    figure4,
    figure5,
    gnuplot_script,
    headline_report,
    recommend_stages,
)
from ..core.loss_model import output_distribution, output_trace
from ..core.mc_oracle import compare, simulate
from ..core.models import SOURCE_COLUMNS
from ..core.optimizer import max_p1_with_snr_floor, optimize_mu
from ..core.photon_stats import mandel_q, snr
from ..decorators import log_action
from ..infra.settings import SettingsLoader
from ..infra.storage import ResultsStorage, ResultTable
from ..logging_config import setup_logging
from .config import SUBCOMMANDS, RunConfig, parse_config, parse_flag_overrides
from .validation import run_validation

COMMAND_HELP = {
    "dist": "Распределение числа фотонов на выходе (и по звеньям цепочки)",
    "optimize": "Оптимальная накачка mu_opt "
                "(с --snr-target: максимум P1 при SNR >= цели)",
    "sweep": "Прогон по одной оси: --axis mu --values 0.01,0.1,1",
    "figure": "Таблица данных для графика: --id fig2|fig3|fig4|fig5",
    "montecarlo": "Монте-Карло гистограмма и сравнение с аналитикой",
    "validate": "Полный набор проверок сборки",
    "headline": "P1 и SNR при m = 0 и m = 4, частота синхронизации",
    "recommend": "Число ступеней и накачка для заданного SNR",
}


class ValidationFailed(PhotonMuxError):
    def __init__(self, failed: list[str]):
        self.failed = failed
        super().__init__(f"Не пройдены проверки: {', '.join(failed)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Модель мультиплексированного во времени источника одиночных "
                    "фотонов",
        prog="photonmux",
        epilog="Параметры задаются файлом --config и флагами --key value "
               "(например --e-sw-db 0.5); флаги переопределяют файл",
        allow_abbrev=False,
    )

    subparsers = parser.add_subparsers(
        dest="command",
        help="Доступные команды"
    )

    for command in SUBCOMMANDS:
        sub = subparsers.add_parser(
            command,
            help=COMMAND_HELP[command],
            allow_abbrev=False,
        )
        sub.add_argument(
            "--config",
            help="Файл конфигурации key = value"
        )
    return parser


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if value is None:
        return "-"
    return str(value)


def _pretty(columns: list[str], rows: list[list[Any]]) -> str:
    table = PrettyTable()
    table.field_names = columns
    for row in rows:
        table.add_row([_fmt(v) for v in row])
    return table.get_string()


def _storage() -> ResultsStorage:
    return ResultsStorage(SettingsLoader().get("output_dir", "results"))


def _write(cfg: RunConfig, table: ResultTable, name: str) -> Path:
    storage = _storage()
    path = cfg.output_path or storage.default_path(name, cfg.output_format)
    return storage.write_table(table, path, cfg.output_format)


def handle_dist(cfg: RunConfig) -> str:
    n_max = cfg.option("n_max")
    trace = output_trace(cfg.source, n_max)
    table = trace.final.to_result_table("dist")
    table.metadata["stages"] = {
        label: {"p0": d.p0, "p1": d.p1, "p_ge2": d.p_ge2} for label, d in trace
    }
    path = _write(cfg, table, "dist")

    rows = [[label, d.p0, d.p1, d.p_ge2, snr(d), d.mean] for label, d in trace]
    return (
        f"Источник: {cfg.source.short()}\n"
        + _pretty(["звено", "P0", "P1", "P>=2", "SNR", "<n>"], rows)
        + f"\nРаспределение записано в {path}"
    )


def handle_optimize(cfg: RunConfig) -> str:
    kwargs = dict(mu_range=cfg.mu_range, tol=cfg.option("tol"),
                  n_max=cfg.option("n_max"), grid_points=cfg.option("grid_points"))
    target = cfg.option("snr_target")
    if target is None:
        result = optimize_mu(cfg.source, **kwargs)
    else:
        result = max_p1_with_snr_floor(cfg.source, target, **kwargs)

    record = result.as_dict()
    echo = cfg.source.echo()
    table = ResultTable("optimize", (*echo.keys(), *record.keys()),
                        [(*echo.values(), *record.values())], {"source": echo})
    path = _write(cfg, table, "optimize")

    if not result.feasible:
        return (f"Цель SNR >= {target:g} недостижима в диапазоне mu "
                f"{cfg.mu_range}\nРезультат записан в {path}")
    rows = [[key, value] for key, value in record.items()]
    return _pretty(["величина", "значение"], rows) + f"\nРезультат записан в {path}"


def handle_sweep(cfg: RunConfig) -> str:
    sweep = custom_sweep(cfg.source, cfg.option("axis"), cfg.option("values"),
                         n_max=cfg.option("n_max"))
    path = _write(cfg, sweep.to_result_table(), "custom")
    axis = cfg.option("axis")
    rows = [[getattr(r.source, axis), r.p1, r.snr, r.mandel_q] for r in sweep.records]
    return _pretty([axis, "P1", "SNR", "Q_M"], rows) + f"\nТаблица записана в {path}"


def _figure(cfg: RunConfig):
    figure_id = cfg.option("figure_id")
    n_max = cfg.option("n_max")
    r_dark = cfg.source.r_dark if cfg.option("with_dark") else 0.0
    stages = cfg.option("m_values")
    extra = {"m_values": stages} if stages else {}

    if figure_id == "fig2":
        return figure2(n_max=n_max, mu_range=cfg.mu_range, **extra)
    elif figure_id == "fig3":
        return figure3(r_dark=r_dark, n_max=n_max, **extra)
    elif figure_id == "fig4":
        return figure4(r_dark=r_dark, n_max=n_max, **extra)
    elif figure_id == "fig5":
        return figure5(r_dark=r_dark, n_max=n_max, mu_range=cfg.mu_range, **extra)
    raise ConfigParseError("Ожидается fig2, fig3, fig4 или fig5", key="figure_id")


def handle_figure(cfg: RunConfig) -> str:
    sweep = _figure(cfg)
    path = _write(cfg, sweep.to_result_table(), sweep.figure_id)
    lines = [f"{sweep.figure_id}: {len(sweep)} записей записано в {path}"]
    if cfg.option("gnuplot"):
        script = _storage().write_text(gnuplot_script(sweep, str(path)),
                                       path.with_suffix(".gp"))
        lines.append(f"Скрипт gnuplot: {script}")
    return "\n".join(lines)


def handle_montecarlo(cfg: RunConfig) -> str:
    hist = simulate(cfg.source, cfg.mc)
    report = compare(output_distribution(cfg.source, cfg.option("n_max")), hist)
    table = hist.to_result_table()
    table.metadata["comparison"] = report.as_dict()
    path = _write(cfg, table, "montecarlo")

    rows = [[key, value] for key, value in report.as_dict().items()]
    status = "согласуется" if report.passed else "НЕ согласуется"
    return (_pretty(["величина", "значение"], rows)
            + f"\nМонте-Карло {status} с аналитикой\nГистограмма записана в {path}")


def handle_validate(cfg: RunConfig) -> str:
    report = run_validation(cfg.mc, n_max=cfg.option("n_max"))
    path = _write(cfg, report.to_result_table(), "validation")
    rows = [[c.name, "OK" if c.passed else "FAIL", c.detail] for c in report.checks]
    print(_pretty(["проверка", "результат", "подробности"], rows))
    print(f"Отчет записан в {path}")
    if not report.passed:
        raise ValidationFailed([c.name for c in report.failed])
    return "Все проверки пройдены"


def handle_headline(cfg: RunConfig) -> str:
    source = cfg.source
    report = headline_report(e_sw_db=source.e_sw_db, mu=source.mu, m=source.m,
                             e_h=source.e_h, e_s=source.e_s,
                             delta_t0_ns=source.delta_t0_ns,
                             n_max=cfg.option("n_max"))
    table = ResultTable("headline", tuple(report.keys()),
                        [tuple(report.values())], {"source": source.echo()})
    path = _write(cfg, table, "headline")
    rows = [[key, value] for key, value in report.items()]
    return _pretty(["величина", "значение"], rows) + f"\nРезультат записан в {path}"


def handle_recommend(cfg: RunConfig) -> str:
    target = cfg.option("snr_target")
    kwargs = {"m_values": cfg.option("m_values")} if cfg.option("m_values") else {}
    best = recommend_stages(cfg.source, target, n_max=cfg.option("n_max"),
                            mu_range=cfg.mu_range, **kwargs)
    if best is None:
        raise UndefinedValueError("recommend",
                                  f"цель SNR >= {target:g} недостижима ни при одном m")

    source = cfg.source.replace(m=best.m, mu=best.result.mu_opt)
    echo = source.echo()
    record = best.result.as_dict()
    table = ResultTable("recommend", (*SOURCE_COLUMNS, *record.keys()),
                        [(*echo.values(), *record.values())], {"snr_target": target})
    path = _write(cfg, table, "recommend")
    rows = [["m", best.m], ["mu", best.result.mu_opt], ["P1", best.result.p1_max],
            ["SNR", best.result.snr_at_opt],
            ["Q_M", mandel_q(output_distribution(source, cfg.option("n_max")))]]
    return _pretty(["величина", "значение"], rows) + f"\nРезультат записан в {path}"


@log_action
def run(cfg: RunConfig) -> str:
    return handle_command(cfg)


def handle_command(cfg: RunConfig) -> str:
    if cfg.subcommand == "dist":
        return handle_dist(cfg)
    elif cfg.subcommand == "optimize":
        return handle_optimize(cfg)
    elif cfg.subcommand == "sweep":
        return handle_sweep(cfg)
    elif cfg.subcommand == "figure":
        return handle_figure(cfg)
    elif cfg.subcommand == "montecarlo":
        return handle_montecarlo(cfg)
    elif cfg.subcommand == "validate":
        return handle_validate(cfg)
    elif cfg.subcommand == "headline":
        return handle_headline(cfg)
    elif cfg.subcommand == "recommend":
        return handle_recommend(cfg)
    else:
        return "Неизвестная команда"


def _error_record(error: Exception) -> str:
    record = {"error": type(error).__name__, "message": str(error)}
    for attr in ("key", "line", "field", "name", "failed"):
        value = getattr(error, attr, None)
        if value is not None:
            record[attr] = value
    return json.dumps(record, ensure_ascii=False, default=str)


def _fail(error: Exception, title: str, hint: str | None = None) -> None:
    print(f"{title}: {error}")
    if hint:
        print(hint)
    print(_error_record(error), file=sys.stderr)
    sys.exit(1)


def main(argv: list[str] | None = None):
    setup_logging()
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)

    if not args.command:
        parser.print_help()
        sys.exit(1)

    try:
        cfg = parse_config(args.config, parse_flag_overrides(extra), args.command)
        result = run(cfg)
        if result:
            print(result)
    except ConfigParseError as e:
        _fail(e, "Ошибка конфигурации",
              "Проверьте файл конфигурации и флаги; 'photonmux <команда> --help'.")
    except ConfigValidationError as e:
        _fail(e, "Ошибка параметров источника")
    except TruncationError as e:
        _fail(e, "Ошибка точности", "Увеличьте n_max (--n-max).")
    except ConfigMismatchError as e:
        _fail(e, "Ошибка сравнения")
    except ValidationFailed as e:
        _fail(e, "Проверка не пройдена", "Подробности в логе и в отчете проверки.")
    except (DomainError, UndefinedValueError) as e:
        _fail(e, "Ошибка")
    except PhotonMuxError as e:
        _fail(e, "Ошибка")
    except Exception as e:
        print(f"Неизвестная ошибка: {e}")
        record = json.dumps({"error": "InternalError", "type": type(e).__name__,
                             "message": str(e)}, ensure_ascii=False)
        print(record, file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
