"""
Concrete implementation of the IRunRepository port using SQLAlchemy.

This module provides the adapter that stores experiment run records in the
SQLite database of an output directory.
"""

import logging
from typing import List
from uuid import UUID

from sqlalchemy.orm import Session

from src.domain.models.run_record import RunRecord
from src.domain.ports.run_repository import IRunRepository
from src.infrastructure.adapters.repositories.models.run_orm import RunORM

logger = logging.getLogger(__name__)


class SQLiteRunRepository(IRunRepository):
    """
    A repository for persisting RunRecord domain objects.

    This class handles the mapping between the domain record and the ORM
    model.
    """

    def __init__(self, db_session: Session):
        """
        Initializes the repository with a database session.

        Args:
            db_session: An active SQLAlchemy Session for database operations.
        """
        self.db_session = db_session

    def save(self, record: RunRecord) -> None:
        """
        Saves a RunRecord to the database.

        Args:
            record: The RunRecord domain object to persist.
        """
        run_orm = RunORM(
            run_id=record.run_id,
            kind=record.kind,
            master_seed=str(record.master_seed),
            config=record.config,
            checks=record.checks,
            passed=record.passed,
            n_checks=len(record.checks),
            output_paths=record.output_paths,
            created_at=record.created_at,
        )
        self.db_session.add(run_orm)
        self.db_session.commit()
        self.db_session.refresh(run_orm)
        logger.info("Stored run %s (%s)", record.run_id, record.kind)

    def find(self, limit: int, offset: int, kind: str | None = None) -> List[RunRecord]:
        """
        Lists runs newest first with optional kind filtering and pagination.

        Args:
            limit: The maximum number of results to return.
            offset: The number of results to skip.
            kind: Optional experiment kind to filter by.

        Returns:
            A list of RunRecord domain objects.
        """
        query = self.db_session.query(RunORM)
        if kind:
            query = query.filter(RunORM.kind == kind)
        results_orm = query.order_by(RunORM.created_at.desc()).offset(offset).limit(limit).all()
        return [self._to_domain(orm) for orm in results_orm]

    def get(self, run_id: UUID) -> RunRecord | None:
        orm = self.db_session.get(RunORM, run_id)
        return self._to_domain(orm) if orm is not None else None

    @staticmethod
    def _to_domain(orm: RunORM) -> RunRecord:
        return RunRecord(
            run_id=orm.run_id,
            kind=orm.kind,
            master_seed=int(orm.master_seed),
            config=orm.config,
            checks=orm.checks,
            passed=orm.passed,
            output_paths=orm.output_paths,
            created_at=orm.created_at,
        )
