"""
Configures the run database using SQLAlchemy.

Every output directory holds its own SQLite file, so the engine and the
session factory are built per directory instead of at import time.
"""

from pathlib import Path

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import declarative_base, sessionmaker

DATABASE_FILENAME = "fragwave.db"

# Declarative Base
Base = declarative_base()


def database_url(out_dir: Path) -> str:
    """The SQLite URL of the run database inside an output directory."""
    return f"sqlite:///{(Path(out_dir) / DATABASE_FILENAME).as_posix()}"


def build_engine(out_dir: Path) -> Engine:
    """
    Creates the engine for an output directory, creating the directory if needed.

    Args:
        out_dir: The directory that holds the run database.

    Returns:
        A SQLAlchemy Engine bound to <out_dir>/fragwave.db.
    """
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    return create_engine(database_url(out_dir), connect_args={"check_same_thread": False})


def build_session_factory(engine: Engine) -> sessionmaker:
    """Session factory bound to an engine."""
    return sessionmaker(autocommit=False, autoflush=False, bind=engine)


def create_db_and_tables(engine: Engine) -> None:
    """
    Creates all tables of the ORM models that are missing.

    Importing the ORM module registers its tables on Base.
    """
    from src.infrastructure.adapters.repositories.models import run_orm  # noqa: F401

    Base.metadata.create_all(bind=engine)
