"""
Runs independent replicates, optionally in worker processes.

Replicate i always draws from its own stream (master seed, i), and results
come back in index order whatever the completion order, so the worker count
never changes the output.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


def _run_chunk(task: Callable[[int], T], indices: Sequence[int]) -> list[T]:
    return [task(i) for i in indices]


class ReplicateRunner:
    """
    Maps a picklable task over replicate indices.

    The task must be a module-level function (or a functools.partial of one)
    when more than one worker is used.
    """

    def __init__(self, workers: int = 1, chunk_size: int | None = None):
        if workers < 1:
            raise ValueError("workers must be at least 1.")
        self.workers = workers
        self.chunk_size = chunk_size

    def map(self, task: Callable[[int], T], n: int, start: int = 0) -> list[T]:
        """
        Evaluates task(i) for i in [start, start + n), in index order.

        Args:
            task: The replicate task.
            n: Number of replicates.
            start: First replicate index.

        Returns:
            The results ordered by replicate index.
        """
        indices = range(start, start + n)
        if self.workers == 1 or n < 2:
            return _run_chunk(task, indices)

        size = self.chunk_size or max(1, -(-n // (4 * self.workers)))
        chunks = [indices[i:i + size] for i in range(0, n, size)]
        logger.debug("Scheduling %d replicates in %d chunks on %d workers", n, len(chunks), self.workers)
        with ProcessPoolExecutor(max_workers=self.workers) as pool:
            # Executor.map yields in submission order.
            results = list(pool.map(_run_chunk, [task] * len(chunks), chunks))
        return [item for chunk in results for item in chunk]
