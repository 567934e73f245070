"""
Defines the SQLAlchemy ORM model for a RunRecord.
"""

import uuid

from sqlalchemy import JSON, Boolean, Column, DateTime, Integer, String, Uuid

from src.infrastructure.config.database import Base


class RunORM(Base):
    """SQLAlchemy model representing the 'runs' table."""
    __tablename__ = "runs"

    run_id = Column(Uuid(as_uuid=True), primary_key=True, default=uuid.uuid4)
    kind = Column(String, nullable=False, index=True)
    # 64-bit seeds exceed SQLite's signed integer range; stored as text.
    master_seed = Column(String, nullable=False)
    config = Column(JSON, nullable=False, default=dict)
    checks = Column(JSON, nullable=False, default=list)
    passed = Column(Boolean, nullable=False)
    n_checks = Column(Integer, nullable=False, default=0)
    output_paths = Column(JSON, nullable=False, default=list)
    created_at = Column(DateTime(timezone=True), nullable=False, index=True)
