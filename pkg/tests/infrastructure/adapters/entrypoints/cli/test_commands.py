"""
Tests for the command handlers, run against a temporary output directory.
"""
import argparse
import csv
import io
import json
import math
import uuid
from pathlib import Path

import pytest

from src.domain.models.errors import RunNotFoundError
from src.domain.models.report import CheckResult, RunReport, Table
from src.infrastructure.adapters.entrypoints.cli.commands import (
    EXIT_FAILED_CHECKS,
    EXIT_PASSED,
    exponents_command,
    history_command,
    run_command,
)


def write_config(directory: Path, document: dict) -> Path:
    path = directory / f"{document['kind']}.json"
    path.write_text(json.dumps(document))
    return path


@pytest.fixture
def ladder_config(tmp_path: Path) -> Path:
    """Provides a deterministic ladder config that passes every check."""
    return write_config(tmp_path, {
        "kind": "ladder",
        "measure": {"kind": "uniform_binary"},
        "master_seed": 5,
        "p_values": [0.5, 1.0, "p_bar"],
    })


def run_args(config: Path, out: Path, seed: int | None = None) -> argparse.Namespace:
    return argparse.Namespace(config=str(config), out=str(out), seed=seed, workers=1)


def test_run_command_writes_report_and_record(ladder_config: Path, tmp_path: Path):
    """
    Test Case: A passing run prints PASS, writes its files and stores a record.
    """
    out = tmp_path / "runs"
    stream = io.StringIO()

    code = run_command(run_args(ladder_config, out), stream)

    assert code == EXIT_PASSED
    assert stream.getvalue().startswith("PASS ladder seed=5 ")
    assert (out / "ladder-5" / "ladder.csv").exists()
    assert (out / "ladder-5" / "report.json").exists()
    assert (out / "fragwave.db").exists()


def test_run_command_seed_override(ladder_config: Path, tmp_path: Path):
    """
    Test Case: --seed replaces the config seed in the output directory name.
    """
    code = run_command(run_args(ladder_config, tmp_path / "runs", seed=42), io.StringIO())

    assert code == EXIT_PASSED
    assert (tmp_path / "runs" / "ladder-42" / "report.json").exists()


def test_run_command_abort_fails_with_two(tmp_path: Path):
    """
    Test Case: A run aborted by the fragment cap is reported as failed with exit code 2.
    """
    config = write_config(tmp_path, {
        "kind": "simulate",
        "measure": {"kind": "uniform_binary"},
        "master_seed": 1,
        "t_values": [30.0],
        "max_fragments": 1,
    })
    stream = io.StringIO()

    code = run_command(run_args(config, tmp_path / "runs"), stream)
    document = json.loads((tmp_path / "runs" / "simulate-1" / "report.json").read_text())

    assert code == EXIT_FAILED_CHECKS
    assert stream.getvalue().startswith("FAIL simulate seed=1 ")
    assert "error SIMULATION_CAP_EXCEEDED" in stream.getvalue()
    assert document["error"]["code"] == "SIMULATION_CAP_EXCEEDED"


def test_run_command_lists_failed_checks(ladder_config: Path, tmp_path: Path, mocker):
    """
    Test Case: Every failed check is printed with its value, target and tolerance.
    """
    report = RunReport(run_id="12345678-1234-5678-1234-567812345678", kind="ladder", master_seed=5, config={})
    report.add_table(Table("ladder", ("p",), [{"p": 1.0}]))
    report.add_check(CheckResult.absolute("eta_uniform_p1", 1.5, 1.0, 1e-9))
    service = mocker.MagicMock()
    service.run.return_value = report
    mocker.patch(
        "src.infrastructure.adapters.entrypoints.cli.commands.get_experiment_service",
        return_value=service,
    )
    stream = io.StringIO()

    code = run_command(run_args(ladder_config, tmp_path / "runs"), stream)

    assert code == EXIT_FAILED_CHECKS
    assert "failed eta_uniform_p1: value=1.5 target=1.0" in stream.getvalue()
    service.persist.assert_called_once()


def test_exponents_command_prints_two_blocks():
    """
    Test Case: The exponent table is followed by a blank line and the constants.
    """
    stream = io.StringIO()
    args = argparse.Namespace(measure="uniform_binary", p_grid="0:2:0.5", quadrature_nodes=64)

    assert exponents_command(args, stream) == EXIT_PASSED

    table, constants = stream.getvalue().split("\n\n")
    rows = list(csv.DictReader(io.StringIO(table)))
    summary = next(csv.DictReader(io.StringIO(constants)))
    assert [float(row["p"]) for row in rows] == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert float(rows[2]["phi"]) == pytest.approx(1.0 / 3.0)
    assert float(summary["p_bar"]) == pytest.approx(math.sqrt(2.0))
    assert float(summary["c_p_bar"]) == pytest.approx(3.0 - 2.0 * math.sqrt(2.0))


def test_history_command_lists_runs(ladder_config: Path, tmp_path: Path):
    """
    Test Case: Stored runs are listed as CSV with their verdict and output directory.
    """
    out = tmp_path / "runs"
    run_command(run_args(ladder_config, out), io.StringIO())
    stream = io.StringIO()

    code = history_command(argparse.Namespace(out=str(out), kind=None, limit=20, offset=0, id=None), stream)
    rows = list(csv.DictReader(io.StringIO(stream.getvalue())))

    assert code == EXIT_PASSED
    assert len(rows) == 1
    assert rows[0]["kind"] == "ladder"
    assert rows[0]["passed"] == "true"
    assert rows[0]["output_dir"] == (out / "ladder-5").as_posix()


def test_history_command_shows_one_run_by_id(ladder_config: Path, tmp_path: Path):
    """
    Test Case: `history --id` prints only that run; an unknown id is a domain error.
    """
    out = tmp_path / "runs"
    run_command(run_args(ladder_config, out), io.StringIO())
    run_command(run_args(ladder_config, out, seed=6), io.StringIO())
    listing = io.StringIO()
    history_command(argparse.Namespace(out=str(out), kind=None, limit=20, offset=0, id=None), listing)
    oldest = list(csv.DictReader(io.StringIO(listing.getvalue())))[-1]
    stream = io.StringIO()

    code = history_command(
        argparse.Namespace(out=str(out), kind=None, limit=20, offset=0, id=uuid.UUID(oldest["run_id"])), stream,
    )
    rows = list(csv.DictReader(io.StringIO(stream.getvalue())))

    assert code == EXIT_PASSED
    assert rows == [oldest]
    with pytest.raises(RunNotFoundError):
        history_command(argparse.Namespace(out=str(out), kind=None, limit=20, offset=0, id=uuid.uuid4()), io.StringIO())
