"""
Unit tests for the command-line dependency providers.
"""
from pathlib import Path
from unittest.mock import MagicMock

from src.application.services.experiment_service import ExperimentService
from src.domain.ports.run_repository import IRunRepository
from src.infrastructure.adapters.entrypoints.cli.dependencies import (
    get_db_session,
    get_experiment_service,
    get_run_repository,
    get_runner,
)
from src.infrastructure.adapters.repositories.sqlite_run_repository import SQLiteRunRepository
from src.infrastructure.config.database import DATABASE_FILENAME


# --- Tests for get_db_session ---

def test_get_db_session_creates_database(tmp_path: Path):
    """
    Test Case: get_db_session creates <out>/fragwave.db with its tables and yields a session.
    """
    out = tmp_path / "runs"

    with get_db_session(out) as db:
        assert get_run_repository(db).find(limit=5, offset=0) == []

    assert (out / DATABASE_FILENAME).exists()


def test_get_db_session_closes_on_error(tmp_path: Path, mocker):
    """
    Test Case: The session is closed even when the command fails inside the block.
    """
    mock_session = MagicMock()
    mocker.patch(
        "src.infrastructure.adapters.entrypoints.cli.dependencies.build_session_factory",
        return_value=MagicMock(return_value=mock_session),
    )

    try:
        with get_db_session(tmp_path):
            raise RuntimeError("command failed")
    except RuntimeError:
        pass

    mock_session.close.assert_called_once()


# --- Tests for the service chain ---

def test_get_run_repository():
    """
    Test Case: get_run_repository wraps the session in the SQLite adapter.
    """
    db = MagicMock()
    repo = get_run_repository(db)

    assert isinstance(repo, SQLiteRunRepository)
    assert repo.db_session is db


def test_get_experiment_service_uses_worker_count():
    """
    Test Case: The service gets the repository and a runner with the requested workers.
    """
    repo = MagicMock(spec=IRunRepository)
    service = get_experiment_service(repo, workers=3)

    assert isinstance(service, ExperimentService)
    assert service.run_repo is repo
    assert service.runner.workers == 3
    assert get_runner(2).workers == 2
