"""
Unit tests for the ReplicateRunner.

Replicate results must come back in index order and must not depend on the
number of worker processes.
"""
from functools import partial

import pytest

from src.application.services.replicate_runner import ReplicateRunner
from src.application.services.replicate_tasks import simulate_task
from src.domain.models.dislocation import UniformBinary
from src.domain.models.fragmentation import SimulationControls


@pytest.fixture
def task():
    """Provides a picklable per-replicate simulation task."""
    return partial(
        simulate_task,
        measure=UniformBinary(),
        seed=21,
        horizon=2.0,
        controls=SimulationControls(),
        times=(1.0, 2.0),
    )


def test_serial_map_keeps_index_order():
    """
    Test Case: Results are listed by replicate index starting at start.
    """
    runner = ReplicateRunner()
    assert runner.map(partial(pow, 2), 5, start=3) == [8, 16, 32, 64, 128]


def test_invalid_worker_count():
    """
    Test Case: Fewer than one worker raises ValueError.
    """
    with pytest.raises(ValueError):
        ReplicateRunner(workers=0)


def test_worker_count_does_not_change_results(task):
    """
    Test Case: Two worker processes give exactly the serial results.
    """
    serial = ReplicateRunner(workers=1).map(task, 9)
    parallel = ReplicateRunner(workers=2, chunk_size=2).map(task, 9)

    assert [run.rows for run in parallel] == [run.rows for run in serial]
    assert [run.n_alive for run in parallel] == [run.n_alive for run in serial]
