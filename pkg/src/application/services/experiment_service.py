"""
Implements the application service for experiment use cases.

This module contains the ExperimentService class, which dispatches an
ExperimentRequest to the handler of its kind, collects the RunReport and
stores the run through the repository port. It knows nothing about files,
JSON or the command line.
"""

import logging
import time
from typing import Callable, List
from uuid import UUID, uuid4

from src.application.services import (
    line_experiments,
    population_experiments,
    spectral_experiments,
    wave_experiments,
)
from src.application.services.experiment_request import ExperimentRequest
from src.application.services.replicate_runner import ReplicateRunner
from src.domain.models.errors import FragwaveError, RunNotFoundError, SimulationCapExceeded
from src.domain.models.report import RunReport
from src.domain.models.run_record import RunRecord
from src.domain.ports.run_repository import IRunRepository

logger = logging.getLogger(__name__)

Handler = Callable[[ExperimentRequest, RunReport, ReplicateRunner], None]

HANDLERS: dict[str, Handler] = {
    "exponents": spectral_experiments.run_exponents,
    "simulate": population_experiments.run_simulate,
    "martingale": population_experiments.run_martingale,
    "line": line_experiments.run_line,
    "lln": line_experiments.run_lln,
    "wave": wave_experiments.run_wave,
    "residual": wave_experiments.run_residual,
    "speed": population_experiments.run_speed,
    "many_to_one": population_experiments.run_many_to_one,
    "passage": line_experiments.run_passage,
    "ladder": spectral_experiments.run_ladder,
}


class ExperimentService:
    """
    Provides the experiment use cases.

    The service runs one request at a time; replicate parallelism is the
    runner's concern.
    """

    def __init__(self, run_repository: IRunRepository, runner: ReplicateRunner | None = None):
        """
        Initializes the ExperimentService with its dependencies.

        Args:
            run_repository: An object that conforms to the IRunRepository interface.
            runner: The replicate runner; a serial one when omitted.
        """
        self.run_repo = run_repository
        self.runner = runner or ReplicateRunner()

    def run(self, request: ExperimentRequest) -> RunReport:
        """
        Runs one experiment and returns its report.

        A resource abort (fragment cap) does not raise: it is carried into
        report.error together with its partial diagnostics, and the report
        counts as failed.

        Args:
            request: The validated experiment request.

        Returns:
            The RunReport with tables, summaries and checks.

        Raises:
            FragwaveError: On any other domain rule violation.
        """
        handler = HANDLERS.get(request.kind)
        if handler is None:
            raise FragwaveError(f"Unknown experiment kind {request.kind!r}.")

        report = RunReport(
            run_id=str(uuid4()),
            kind=request.kind,
            master_seed=request.master_seed,
            config=request.config,
        )
        logger.info("Running %s with seed %d and %d replicates", request.kind, request.master_seed, request.replicates)
        started = time.perf_counter()
        try:
            handler(request, report, self.runner)
        except SimulationCapExceeded as exc:
            logger.error("Run %s aborted: %s", report.run_id, exc.message)
            report.error = {"code": "SIMULATION_CAP_EXCEEDED", "message": exc.message, "details": exc.diagnostics}
        report.timing["wall_seconds"] = time.perf_counter() - started
        report.timing["workers"] = self.runner.workers

        failed = [check.name for check in report.checks if not check.passed]
        if failed:
            logger.warning("Run %s failed %d of %d checks: %s", report.run_id, len(failed), len(report.checks), failed)
        return report

    def persist(self, report: RunReport, output_paths: List[str]) -> RunRecord:
        """
        Stores the record of a finished run.

        Args:
            report: The finished report.
            output_paths: The files written for the report.

        Returns:
            The stored RunRecord.
        """
        record = RunRecord.from_report(report, output_paths)
        self.run_repo.save(record)
        return record

    def history(self, limit: int, offset: int, kind: str | None = None) -> List[RunRecord]:
        """
        Lists stored runs, newest first.

        Args:
            limit: The maximum number of records to return.
            offset: The number of records to skip.
            kind: An optional experiment kind to filter by.

        Returns:
            A list of RunRecord domain objects.
        """
        return self.run_repo.find(limit=limit, offset=offset, kind=kind)

    def get_run(self, run_id: UUID) -> RunRecord:
        """
        Retrieves one stored run.

        Raises:
            RunNotFoundError: If no run has this id.
        """
        record = self.run_repo.get(run_id)
        if record is None:
            raise RunNotFoundError(run_id)
        return record
