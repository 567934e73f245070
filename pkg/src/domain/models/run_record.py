"""
Defines the RunRecord entity: the persisted trace of one experiment run.

The record keeps what is needed to find and reproduce a run later (kind,
seed, config echo) together with its verdict and the files it produced.
"""

from datetime import datetime, timezone
from typing import Any
from uuid import UUID, uuid4

from src.domain.models.report import RunReport


class RunRecord:
    """
    Represents one stored experiment run.
    """
    def __init__(
        self,
        kind: str,
        master_seed: int,
        config: dict[str, Any],
        checks: list[dict[str, Any]],
        passed: bool,
        output_paths: list[str],
        created_at: datetime | None = None,
        run_id: UUID | None = None,
    ):
        if not kind or not kind.strip():
            raise ValueError("A run record needs an experiment kind.")
        if master_seed < 0:
            raise ValueError("The master seed must be nonnegative.")

        self.run_id: UUID = run_id or uuid4()
        self.kind: str = kind
        self.master_seed: int = master_seed
        self.config: dict[str, Any] = config
        self.checks: list[dict[str, Any]] = checks
        self.passed: bool = passed
        self.output_paths: list[str] = output_paths
        self.created_at: datetime = created_at or datetime.now(timezone.utc)

    @classmethod
    def from_report(cls, report: RunReport, output_paths: list[str]) -> "RunRecord":
        """Builds the record of a finished report."""
        return cls(
            kind=report.kind,
            master_seed=report.master_seed,
            config=report.config,
            checks=[check.to_dict() for check in report.checks],
            passed=report.passed,
            output_paths=output_paths,
            run_id=UUID(report.run_id),
        )

    @property
    def failed_checks(self) -> list[str]:
        return [check["name"] for check in self.checks if not check["passed"]]
