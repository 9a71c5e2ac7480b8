"""
Report Writers
Tabular (CSV), structured (JSON / YAML) and console output of metric rows
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import yaml
from rich.console import Console
from rich.table import Table

REPORT_FORMATS = ('csv', 'json', 'yaml')


def _plain(value: Any) -> Any:
    """Convert numpy scalars and tuples into YAML/JSON friendly values"""
    if hasattr(value, 'item') and not isinstance(value, (list, dict)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def write_csv(path: Path, rows: Sequence[Dict[str, Any]]):
    path.parent.mkdir(parents=True, exist_ok=True)
    columns: List[str] = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)

    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _plain(v) for k, v in row.items()})


def write_json(path: Path, payload: Dict[str, Any]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_plain(payload), f, indent=2, ensure_ascii=False)


def write_yaml(path: Path, payload: Dict[str, Any]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        yaml.safe_dump(_plain(payload), f, sort_keys=False, allow_unicode=True)


def write_report(directory: Path, name: str, rows: Sequence[Dict[str, Any]],
                 meta: Optional[Dict[str, Any]] = None,
                 formats: Iterable[str] = REPORT_FORMATS) -> List[Path]:
    """Write ``rows`` plus run metadata as ``name.csv`` / ``name.json`` / ``name.yaml``"""
    written = []
    payload = {'meta': meta or {}, 'rows': list(rows)}
    for fmt in formats:
        if fmt not in REPORT_FORMATS:
            raise ValueError(f"Unknown report format {fmt!r}")
        path = Path(directory) / f"{name}.{fmt}"
        if fmt == 'csv':
            write_csv(path, rows)
        elif fmt == 'json':
            write_json(path, payload)
        else:
            write_yaml(path, payload)
        written.append(path)
    return written


def print_table(title: str, rows: Sequence[Dict[str, Any]], columns: Sequence[str],
                console: Optional[Console] = None):
    """Render selected columns as a rich table"""
    console = console or Console()
    table = Table(title=title)
    for column in columns:
        table.add_column(column, justify='right' if column != 'scheme' else 'left')
    for row in rows:
        table.add_row(*(_format_cell(row.get(c)) for c in columns))
    console.print(table)


def _format_cell(value: Any) -> str:
    if value is None:
        return '-'
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)
