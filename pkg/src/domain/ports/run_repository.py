"""
Defines the persistence port for experiment runs.

Any storage adapter for RunRecord entities implements this contract, so the
experiment service never depends on the database technology.
"""

from abc import ABC, abstractmethod
from typing import List
from uuid import UUID

from src.domain.models.run_record import RunRecord


class IRunRepository(ABC):
    """
    An abstract interface for a run repository.
    """

    @abstractmethod
    def save(self, record: RunRecord) -> None:
        """
        Persists a RunRecord.

        Args:
            record: The RunRecord to be saved.

        Raises:
            Exception: Implementation-specific errors during data persistence.
        """
        raise NotImplementedError

    @abstractmethod
    def find(self, limit: int, offset: int, kind: str | None = None) -> List[RunRecord]:
        """
        Lists stored runs, newest first, with pagination and an optional kind filter.

        Args:
            limit: The maximum number of records to return.
            offset: The number of records to skip.
            kind: Only return runs of this experiment kind.

        Returns:
            A list of RunRecord objects.
        """
        raise NotImplementedError

    @abstractmethod
    def get(self, run_id: UUID) -> RunRecord | None:
        """
        Retrieves one run by id.

        Args:
            run_id: The identifier of the run.

        Returns:
            The RunRecord, or None when no such run exists.
        """
        raise NotImplementedError
