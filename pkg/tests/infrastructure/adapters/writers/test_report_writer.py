"""
Tests for the CSV and JSON report writer.
"""
import json
import math
from pathlib import Path

import numpy as np
import pytest

from src.domain.models.report import CheckResult, RunReport, Table
from src.domain.models.statistics import summarize
from src.infrastructure.adapters.writers.report_writer import (
    REPORT_FILENAME,
    ReportWriter,
    render_value,
    report_document,
    table_filename,
    table_to_csv,
)


@pytest.fixture
def report() -> RunReport:
    """Provides a small report with a main and an auxiliary table."""
    report = RunReport(
        run_id="12345678-1234-5678-1234-567812345678",
        kind="wave",
        master_seed=11,
        config={"replicates": 2},
    )
    report.add_table(Table("wave_deltas", ("run_id", "p", "delta", "observed"), [
        {"run_id": 0, "p": 1.0, "delta": 0.1 + 0.2, "observed": True},
        {"run_id": 1, "p": 1.0, "delta": np.float64(1e-300), "observed": False},
    ]))
    report.add_table(Table("wave[p=1.0]", ("x", "residual_at_matched_speed"), [
        {"x": -2.0, "residual_at_matched_speed": math.nan},
    ]))
    report.summaries["delta"] = summarize([0.3, 1e-300])
    report.add_check(CheckResult.relative("delta_mean", 0.15, 0.15, 0.05))
    return report


@pytest.mark.parametrize(
    "value, expected",
    [
        (None, ""),
        (True, "true"),
        (np.bool_(False), "false"),
        (np.int64(3), "3"),
        (0.1 + 0.2, "0.30000000000000004"),
        (np.float64(2.5), "2.5"),
        ("critical", "critical"),
    ],
)
def test_render_value(value, expected: str):
    """
    Test Case: CSV cells use the shortest round-tripping float text and lowercase booleans.
    """
    assert render_value(value) == expected


def test_table_filename_is_filesystem_safe():
    """
    Test Case: Parameter cells in table names become safe file names.
    """
    assert table_filename("wave[p=1.0]") == "wave_p=1.0.csv"
    assert table_filename("lines") == "lines.csv"


def test_table_to_csv(report: RunReport):
    """
    Test Case: A header in column order followed by one line per row.
    """
    text = table_to_csv(report.main_table)

    assert text.splitlines() == [
        "run_id,p,delta,observed",
        "0,1.0,0.30000000000000004,true",
        "1,1.0,1e-300,false",
    ]


def test_write_layout(report: RunReport, tmp_path: Path):
    """
    Test Case: Tables then report.json are written under <out>/<kind>-<seed>/.
    """
    paths = ReportWriter(tmp_path).write(report)
    run_dir = tmp_path / "wave-11"

    assert paths == [
        (run_dir / "wave_deltas.csv").as_posix(),
        (run_dir / "wave_p=1.0.csv").as_posix(),
        (run_dir / REPORT_FILENAME).as_posix(),
    ]
    assert not list(run_dir.glob("*.tmp"))


def test_rewrite_gives_identical_csv_bytes(report: RunReport, tmp_path: Path):
    """
    Test Case: Writing the same report twice gives byte-identical CSV files.
    """
    writer = ReportWriter(tmp_path)
    first = (tmp_path / "wave-11" / "wave_deltas.csv")
    writer.write(report)
    before = first.read_bytes()
    writer.write(report)

    assert first.read_bytes() == before


def test_json_numbers_match_csv(report: RunReport, tmp_path: Path):
    """
    Test Case: The JSON document carries the same float values as the CSV cells.
    """
    ReportWriter(tmp_path).write(report)
    document = json.loads((tmp_path / "wave-11" / REPORT_FILENAME).read_text())
    deltas = document["tables"][0]

    assert document["passed"] is True
    assert deltas["file"] == "wave_deltas.csv"
    assert [row[2] for row in deltas["rows"]] == [0.30000000000000004, 1e-300]
    assert math.isnan(document["tables"][1]["rows"][0][1])
    assert document["summaries"]["delta"]["n"] == 2


def test_report_document_lists_every_table(report: RunReport):
    """
    Test Case: The document lists tables in report order with their columns.
    """
    document = report_document(report)
    assert [table["name"] for table in document["tables"]] == ["wave_deltas", "wave[p=1.0]"]
    assert document["tables"][1]["columns"] == ["x", "residual_at_matched_speed"]


def test_unwritable_directory_names_the_path(report: RunReport, tmp_path: Path):
    """
    Test Case: An output path blocked by a file raises OSError naming the path.
    """
    blocker = tmp_path / "blocked"
    blocker.write_text("not a directory")

    with pytest.raises(OSError) as info:
        ReportWriter(blocker).write(report)
    assert info.value.filename == str(blocker / "wave-11")
