"""
Defines the dependency providers of the command line.

A command builds its service through these functions, so tests can replace
any link of the chain (session, repository, runner) with a mock.
"""

from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

from sqlalchemy.orm import Session

from src.application.services.experiment_service import ExperimentService
from src.application.services.replicate_runner import ReplicateRunner
from src.domain.ports.run_repository import IRunRepository
from src.infrastructure.adapters.repositories.sqlite_run_repository import SQLiteRunRepository
from src.infrastructure.config.database import build_engine, build_session_factory, create_db_and_tables


# --- Dependency Providers ---

@contextmanager
def get_db_session(out_dir: Path) -> Iterator[Session]:
    """A session on <out_dir>/fragwave.db, closed on exit."""
    engine = build_engine(out_dir)
    create_db_and_tables(engine)
    db = build_session_factory(engine)()
    try:
        yield db
    finally:
        db.close()
        engine.dispose()


def get_run_repository(db: Session) -> IRunRepository:
    return SQLiteRunRepository(db)


def get_runner(workers: int) -> ReplicateRunner:
    return ReplicateRunner(workers=workers)


def get_experiment_service(repo: IRunRepository, workers: int = 1) -> ExperimentService:
    return ExperimentService(repo, get_runner(workers))
