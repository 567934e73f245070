"""
Writes a RunReport to disk as CSV tables and one JSON document.

Layout of one run: <out>/<kind>-<seed>/<table>.csv for every table (main
table first) and <out>/<kind>-<seed>/report.json. Floats are written with
repr(), the shortest decimal that round-trips, so the CSV and JSON carry
bit-identical numbers and a rerun with the same seed gives identical bytes.
"""

import csv
import io
import json
import logging
import os
import re
from pathlib import Path
from typing import Any, Iterable, TextIO

import numpy as np

from src.domain.models.report import RunReport, Table

logger = logging.getLogger(__name__)

REPORT_FILENAME = "report.json"


# --- Rendering ---

def render_value(value: Any) -> str:
    """One CSV cell: repr for floats, lowercase booleans, empty for None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return value.as_posix()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def table_filename(name: str) -> str:
    """A filesystem-safe file name for a table, e.g. wave[p=1.0] -> wave_p=1.0.csv."""
    slug = re.sub(r"[^A-Za-z0-9=.,_-]+", "_", name).strip("_")
    return f"{slug or 'table'}.csv"


def write_table(stream: TextIO, columns: Iterable[str], rows: Iterable[dict]) -> None:
    """Writes a header and the rows in the given column order."""
    columns = list(columns)
    writer = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({column: render_value(row[column]) for column in columns})


def table_to_csv(table: Table) -> str:
    buffer = io.StringIO()
    write_table(buffer, table.columns, table.rows)
    return buffer.getvalue()


def report_document(report: RunReport) -> dict:
    """The JSON document of a report: its dict form plus every table."""
    document = report.to_dict()
    document["tables"] = [
        {
            "name": table.name,
            "file": table_filename(table.name),
            "columns": list(table.columns),
            "rows": [[_plain(row[column]) for column in table.columns] for row in table.rows],
        }
        for table in report.tables
    ]
    return document


def _plain(value: Any) -> Any:
    if isinstance(value, (np.floating, float)):
        return float(value)
    return value


def report_to_json(report: RunReport) -> str:
    # NaN and infinities are written as the JavaScript literals json accepts back.
    return json.dumps(report_document(report), indent=2, default=_json_default, allow_nan=True) + "\n"


# --- Files ---

class ReportWriter:
    """
    Emits reports under an output directory.
    """

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)

    def run_dir(self, report: RunReport) -> Path:
        return self.out_dir / f"{report.kind}-{report.master_seed}"

    def write(self, report: RunReport) -> list[str]:
        """
        Writes every table as CSV and the JSON document.

        Args:
            report: The finished report.

        Returns:
            The written paths, tables first and the JSON document last.

        Raises:
            OSError: If a file cannot be written; the message names the path.
        """
        target = self.run_dir(report)
        paths: list[str] = []
        self._mkdir(target)
        for table in report.tables:
            path = target / table_filename(table.name)
            self._write_text(path, table_to_csv(table))
            paths.append(path.as_posix())
        json_path = target / REPORT_FILENAME
        self._write_text(json_path, report_to_json(report))
        paths.append(json_path.as_posix())
        logger.info("Wrote %d files to %s", len(paths), target)
        return paths

    @staticmethod
    def _mkdir(path: Path) -> None:
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(exc.errno, f"Cannot create output directory: {exc.strerror}", str(path)) from exc

    @staticmethod
    def _write_text(path: Path, text: str) -> None:
        """Writes via a sibling .tmp file and an atomic replace."""
        tmp = path.with_name(path.name + ".tmp")
        try:
            with open(tmp, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(tmp, path)
        except OSError as exc:
            raise OSError(exc.errno, f"Cannot write output file: {exc.strerror}", str(path)) from exc

