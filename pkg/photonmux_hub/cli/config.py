"""
Разбор конфигурации запуска: файл `key = value` с секциями и флаги --key value
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from ..core.exceptions import ConfigParseError, ConfigValidationError
from ..core.models import McConfig, SourceConfig
from ..infra.settings import SettingsLoader
from ..infra.storage import OUTPUT_FORMATS

logger = logging.getLogger("photonmux.cli.config")

SUBCOMMANDS = (
    "dist", "optimize", "sweep", "figure", "montecarlo", "validate",
    "headline", "recommend",
)
SECTIONS = ("source", "montecarlo", "run")

# Ключ, указанный флагом, а не строкой файла
FLAG_LINE = None

_ALIASES = {
    "r": "herald_rate_r",
    "il_db": "e_sw_db",
    "format": "output_format",
    "output": "output_path",
    "id": "figure_id",
}


def _to_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("true", "1", "yes", "on"):
        return True
    if value in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"ожидается true/false, получено '{text}'")


def _to_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    # запись с порядком, например 1e6
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"ожидается целое число, получено '{text}'")
    return int(value)


def _to_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(item) for item in text.split(",") if item.strip())


def _to_int_list(text: str) -> tuple[int, ...]:
    return tuple(_to_int(item) for item in text.split(",") if item.strip())


# ключ -> (секция, преобразование)
KEYS: dict[str, tuple[str, Callable[[str], Any]]] = {
    "m": ("source", _to_int),
    "delta_t0_ns": ("source", float),
    "mu": ("source", float),
    "herald_rate_r": ("source", float),
    "e_h": ("source", float),
    "e_s": ("source", float),
    "e_sw_db": ("source", float),
    "r_dark": ("source", float),
    "trials": ("montecarlo", _to_int),
    "seed": ("montecarlo", _to_int),
    "shards": ("montecarlo", _to_int),
    "output_path": ("run", str),
    "output_format": ("run", str),
    "figure_id": ("run", str),
    "axis": ("run", str),
    "values": ("run", _to_float_list),
    "m_values": ("run", _to_int_list),
    "snr_target": ("run", float),
    "n_max": ("run", _to_int),
    "mu_min": ("run", float),
    "mu_max": ("run", float),
    "tol": ("run", float),
    "grid_points": ("run", _to_int),
    "with_dark": ("run", _to_bool),
    "gnuplot": ("run", _to_bool),
}

# Обязательные ключи по подкомандам; кортеж означает "хотя бы один из"
REQUIRED: dict[str, tuple[tuple[str, ...], ...]] = {
    "dist": (("m",), ("mu", "herald_rate_r")),
    "optimize": (("m",),),
    "sweep": (("m",), ("axis",), ("values",)),
    "figure": (("figure_id",),),
    "montecarlo": (("m",), ("mu", "herald_rate_r")),
    "validate": (),
    "headline": (),
    "recommend": (("snr_target",),),
}

SOURCE_KEYS = ("m", "delta_t0_ns", "mu", "herald_rate_r", "e_h", "e_s",
               "e_sw_db", "r_dark")

# Рабочая точка сравнения m = 0 и m = 4 по умолчанию
HEADLINE_DEFAULTS = {"m": 4, "mu": 0.1, "e_h": 0.85, "e_s": 0.9, "e_sw_db": 0.5}


@dataclass
class RunConfig:
    subcommand: str
    source: SourceConfig
    mc: McConfig | None = None
    output_path: Path | None = None
    output_format: str = "tabular"
    overrides: list[tuple[str, str]] = field(default_factory=list)
    options: dict[str, Any] = field(default_factory=dict)

    def short(self) -> str:
        return f"{self.subcommand} {self.source.short()}"

    def option(self, key: str, default: Any = None) -> Any:
        return self.options.get(key, default)

    @property
    def mu_range(self) -> tuple[float, float]:
        return self.options["mu_min"], self.options["mu_max"]


def _canonical(key: str) -> str:
    key = key.strip().lower().replace("-", "_")
    return _ALIASES.get(key, key)


def _assign(values: dict[str, Any], lines: dict[str, int | None], key: str,
            raw: str, line: int | None, section: str | None = None) -> None:
    name = _canonical(key)
    if name not in KEYS:
        raise ConfigParseError(f"Неизвестный параметр '{name}'", key=name, line=line)
    expected, convert = KEYS[name]
    if section is not None and section != expected:
        raise ConfigParseError(
            f"Параметр '{name}' относится к секции [{expected}], а не [{section}]",
            key=name, line=line,
        )
    try:
        values[name] = convert(raw.strip())
    except ValueError as e:
        raise ConfigParseError(f"Некорректное значение '{raw.strip()}': {e}",
                               key=name, line=line) from e
    lines[name] = line


def read_config_file(path: str | Path) -> tuple[dict[str, Any], dict[str, int]]:
    """
    Чтение файла `key = value`. Строки после # игнорируются,
    заголовки [source], [montecarlo], [run] необязательны.
    Returns:
        (значения, номера строк)
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigParseError(f"Не удалось прочитать файл конфигурации {path}: {e}")

    values: dict[str, Any] = {}
    lines: dict[str, int | None] = {}
    section = None
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ConfigParseError(f"Неизвестная секция [{section}]", line=number)
            continue
        if "=" not in line:
            raise ConfigParseError(f"Ожидается строка вида key = value: '{line}'",
                                   line=number)
        key, raw = line.split("=", 1)
        if _canonical(key) in values:
            raise ConfigParseError("Параметр задан повторно", key=_canonical(key),
                                   line=number)
        _assign(values, lines, key, raw, number, section)
    return values, lines


def parse_flag_overrides(extra: list[str]) -> list[tuple[str, str]]:
    """['--e-h', '0.85', '--mu=0.1'] -> [('e_h', '0.85'), ('mu', '0.1')]"""
    overrides = []
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--") or len(token) == 2:
            raise ConfigParseError(
                f"Ожидается флаг вида --key value, получено '{token}'")
        name = token[2:]
        if "=" in name:
            name, raw = name.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigParseError("Флаг без значения", key=_canonical(name))
            raw = extra[i + 1]
            i += 2
        overrides.append((_canonical(name), raw))
    return overrides


def _check_required(subcommand: str, values: dict[str, Any]) -> None:
    for group in REQUIRED[subcommand]:
        if not any(key in values for key in group):
            raise ConfigParseError(
                f"Для команды '{subcommand}' не задан обязательный параметр",
                key=" или ".join(group),
            )


def _build_source(values: dict[str, Any], lines: dict[str, int | None]) -> SourceConfig:
    kwargs = {key: values[key] for key in SOURCE_KEYS if key in values}
    try:
        return SourceConfig(**kwargs)
    except ConfigValidationError as e:
        raise ConfigParseError(str(e), key=e.field, line=lines.get(e.field)) from e


def _build_mc(subcommand: str, values: dict[str, Any],
              lines: dict[str, int | None],
              settings: SettingsLoader) -> McConfig | None:
    given = any(key in values for key in ("trials", "seed", "shards"))
    if not given and subcommand not in ("montecarlo", "validate"):
        return None
    try:
        return McConfig(
            trials=values.get("trials", int(settings.get("mc_trials", 1_000_000))),
            seed=values.get("seed", int(settings.get("mc_seed", 42))),
            shards=values.get("shards", int(settings.get("mc_shards", 1))),
        )
    except ConfigValidationError as e:
        raise ConfigParseError(str(e), key=e.field, line=lines.get(e.field)) from e


def _build_options(values: dict[str, Any], lines: dict[str, int | None],
                   settings: SettingsLoader) -> dict[str, Any]:
    options = {
        "n_max": int(settings.get("n_max", 30)),
        "mu_min": float(settings.get("mu_min", 1e-4)),
        "mu_max": float(settings.get("mu_max", 2.0)),
        "tol": float(settings.get("mu_tol", 1e-6)),
        "grid_points": int(settings.get("grid_points", 64)),
        "with_dark": False,
        "gnuplot": False,
    }
    for key, (section, _) in KEYS.items():
        if section == "run" and key in values and key not in (
                "output_path", "output_format"):
            options[key] = values[key]

    if options["n_max"] < 2:
        raise ConfigParseError("Ожидается n_max >= 2", key="n_max",
                               line=lines.get("n_max"))
    if not 0 < options["mu_min"] < options["mu_max"]:
        raise ConfigParseError("Ожидается 0 < mu_min < mu_max", key="mu_min",
                               line=lines.get("mu_min"))
    if options["tol"] <= 0:
        raise ConfigParseError("Ожидается tol > 0", key="tol", line=lines.get("tol"))
    if "snr_target" in options and options["snr_target"] <= 0:
        raise ConfigParseError("Ожидается snr_target > 0", key="snr_target",
                               line=lines.get("snr_target"))
    return options


def parse_config(path: str | Path | None, overrides: list[tuple[str, str]],
                 subcommand: str) -> RunConfig:
    """
    Полностью проверенная конфигурация запуска: файл, затем флаги.
    Raises:
        ConfigParseError: неизвестный или пропущенный ключ, значение вне
            диапазона, несогласованные mu и (r, delta_t0); с именем ключа и строкой
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigParseError(f"Неизвестная команда '{subcommand}'")
    settings = SettingsLoader()

    values: dict[str, Any] = {}
    lines: dict[str, int | None] = {}
    if path is not None:
        values, lines = read_config_file(path)
    for key, raw in overrides:
        _assign(values, lines, key, raw, FLAG_LINE)

    _check_required(subcommand, values)
    if subcommand == "headline":
        for key, value in HEADLINE_DEFAULTS.items():
            if key == "mu" and "herald_rate_r" in values:
                continue
            values.setdefault(key, value)

    output_format = values.get("output_format",
                               settings.get("output_format", "tabular"))
    if output_format not in OUTPUT_FORMATS:
        raise ConfigParseError(f"Ожидается один из форматов {OUTPUT_FORMATS}",
                               key="output_format", line=lines.get("output_format"))

    output_path = values.get("output_path")
    run_config = RunConfig(
        subcommand=subcommand,
        source=_build_source(values, lines),
        mc=_build_mc(subcommand, values, lines, settings),
        output_path=Path(output_path) if output_path else None,
        output_format=output_format,
        overrides=list(overrides),
        options=_build_options(values, lines, settings),
    )
    logger.debug(f"config {subcommand}: {run_config.source.short()} "
                 f"overrides={len(overrides)}")
    return run_config
