"""
Модуль для записи таблиц результатов (CSV и JSON)
"""

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

FORMAT_TABULAR = "tabular"
FORMAT_STRUCTURED = "structured"
OUTPUT_FORMATS = (FORMAT_TABULAR, FORMAT_STRUCTURED)

_SUFFIXES = {FORMAT_TABULAR: ".csv", FORMAT_STRUCTURED: ".json"}


@dataclass
class ResultTable:
    kind: str
    columns: tuple[str, ...]
    rows: list[tuple]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(
                    f"Строка {row} не соответствует колонкам {self.columns}"
                )

    def records(self) -> list[dict[str, Any]]:
        return [dict(zip(self.columns, row)) for row in self.rows]


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_value(value: Any) -> Any:
    # JSON не допускает nan/inf
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    return value


def stamp() -> str | None:
    """Метка времени из SOURCE_DATE_EPOCH; без нее вывод не содержит времени"""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if not epoch:
        return None
    moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    return moment.isoformat().replace("+00:00", "Z")


def render_tabular(table: ResultTable) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_format_cell(v) for v in row])
    return buffer.getvalue()


def render_structured(table: ResultTable) -> str:
    data = {
        "kind": table.kind,
        "metadata": _json_value(table.metadata),
        "columns": list(table.columns),
        "records": [_json_value(r) for r in table.records()],
    }
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


class ResultsStorage:
    def __init__(self, output_dir: str | Path):
        self.output_dir = Path(output_dir)

    def default_path(self, name: str, output_format: str) -> Path:
        return self.output_dir / f"{name}{_SUFFIXES[output_format]}"

    def write_table(self, table: ResultTable, path: str | Path | None = None,
                    output_format: str = FORMAT_TABULAR) -> Path:
        if output_format not in OUTPUT_FORMATS:
            raise ValueError(f"Неизвестный формат вывода: {output_format}")

        target = Path(path) if path else self.default_path(table.kind, output_format)
        if output_format == FORMAT_TABULAR:
            text = render_tabular(table)
        else:
            text = render_structured(table)

        self._atomic_write(target, text)
        return target

    def write_text(self, text: str, path: str | Path) -> Path:
        target = Path(path)
        self._atomic_write(target, text)
        return target

    def _atomic_write(self, filepath: Path, text: str) -> None:
        filepath.parent.mkdir(parents=True, exist_ok=True)
        temp_fd, temp_path = tempfile.mkstemp(
            dir=filepath.parent,
            prefix=f".{filepath.name}.",
            suffix=".tmp"
        )

        try:
            with os.fdopen(temp_fd, 'w', encoding='utf-8', newline='') as f:
                f.write(text)

            os.replace(temp_path, filepath)

        except Exception as e:
            try:
                os.unlink(temp_path)
            except OSError:
                pass
            raise e
