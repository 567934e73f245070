"""
Defines the command handlers of the `fragwave` command line.

Each handler receives the parsed argparse namespace, works through the
application service and returns the process exit code. Exceptions are left
to the centralized handlers in main.
"""

import argparse
import logging
import sys
from typing import TextIO

from src.application.services.experiment_request import ExperimentRequest
from src.application.services.spectral_experiments import constants_row, exponent_row
from src.domain.models.report import RunReport
from src.infrastructure.adapters.entrypoints.cli.dependencies import (
    get_db_session,
    get_experiment_service,
    get_run_repository,
)
from src.infrastructure.adapters.entrypoints.cli.schemas import (
    HISTORY_COLUMNS,
    ExperimentConfig,
    GridSpec,
    MeasureSpec,
    RunRecordView,
)
from src.infrastructure.adapters.writers.report_writer import ReportWriter, write_table
from src.infrastructure.config.settings import resolve_out_dir, resolve_workers

logger = logging.getLogger(__name__)

EXIT_PASSED = 0
EXIT_FAILED_CHECKS = 2

EXPONENT_CLI_COLUMNS = ("p", "phi", "phi_prime", "c_p")
CONSTANT_CLI_COLUMNS = ("p_lower", "p_bar", "c_p_bar")


def _print_verdict(report: RunReport, run_dir: str, stream: TextIO) -> None:
    failed = [check for check in report.checks if not check.passed]
    verdict = "PASS" if report.passed else "FAIL"
    print(
        f"{verdict} {report.kind} seed={report.master_seed} "
        f"checks={len(report.checks) - len(failed)}/{len(report.checks)} out={run_dir}",
        file=stream,
    )
    for check in failed:
        print(f"  failed {check.name}: value={check.value!r} target={check.target!r} "
              f"tolerance={check.tolerance!r} ({check.tolerance_kind.value})", file=stream)
    if report.error:
        print(f"  error {report.error['code']}: {report.error['message']}", file=stream)


# --- Commands ---

def run_command(args: argparse.Namespace, stream: TextIO | None = None) -> int:
    """
    `fragwave run`: validates the config, runs it, writes the report and
    stores the run record.

    Returns:
        0 when every check passed, 2 otherwise.
    """
    stream = stream or sys.stdout
    config = ExperimentConfig.from_file(args.config).with_seed(args.seed)
    workers = resolve_workers(args.workers, config.workers)
    out_dir = resolve_out_dir(args.out, config.output_path)
    request = config.to_request()
    logger.info("Running %s on %d workers into %s", config.kind, workers, out_dir)

    with get_db_session(out_dir) as db:
        service = get_experiment_service(get_run_repository(db), workers)
        report = service.run(request)
        writer = ReportWriter(out_dir)
        paths = writer.write(report)
        service.persist(report, paths)

    _print_verdict(report, writer.run_dir(report).as_posix(), stream)
    return EXIT_PASSED if report.passed else EXIT_FAILED_CHECKS


def exponents_command(args: argparse.Namespace, stream: TextIO | None = None) -> int:
    """
    `fragwave exponents`: prints Φ, Φ′ and c_p over a p-grid, then the
    constants p̲, p̄ and c_p̄, as two CSV blocks.
    """
    stream = stream or sys.stdout
    measure = MeasureSpec.parse_cli(args.measure).build()
    grid = GridSpec.parse_cli(args.p_grid)
    request = ExperimentRequest(
        kind="exponents",
        measure=measure,
        master_seed=0,
        grid=(grid.start, grid.stop, grid.step),
        quadrature_nodes=args.quadrature_nodes,
    )
    profile = request.profile()
    write_table(stream, EXPONENT_CLI_COLUMNS, [exponent_row(profile, p) for p in request.grid_points()])
    stream.write("\n")
    write_table(stream, CONSTANT_CLI_COLUMNS, [constants_row(profile)])
    return EXIT_PASSED


def history_command(args: argparse.Namespace, stream: TextIO | None = None) -> int:
    """`fragwave history`: lists stored runs, newest first, as CSV; `--id` shows a single run."""
    stream = stream or sys.stdout
    out_dir = resolve_out_dir(args.out, None)
    with get_db_session(out_dir) as db:
        service = get_experiment_service(get_run_repository(db))
        if args.id is not None:
            records = [service.get_run(args.id)]
        else:
            records = service.history(limit=args.limit, offset=args.offset, kind=args.kind)
        rows = [RunRecordView.model_validate(record).to_row() for record in records]
    write_table(stream, HISTORY_COLUMNS, rows)
    return EXIT_PASSED
