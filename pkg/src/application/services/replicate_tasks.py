"""
Picklable per-replicate tasks.

Each task takes the replicate index first so it can be bound with
functools.partial and handed to the ReplicateRunner. Tasks return plain data
(dataclasses and arrays); anything holding closures, such as waves or test
functionals, is rebuilt in the parent process.
"""

import math
from dataclasses import dataclass

import numpy as np

from src.domain.models.dislocation import DislocationMeasure, SpectralProfile
from src.domain.models.fragmentation import (
    SimulationControls,
    Snapshot,
    conservation_error,
    per_run_speeds,
    simulate,
    snapshot_at,
    trajectory_rows,
)
from src.domain.models.martingales import (
    DeltaSample,
    MartingaleSample,
    delta_sample,
    martingale_sample,
    truncated_derivative_W,
)
from src.domain.models.random_streams import StreamPurpose, rng_for
from src.domain.models.spine import PassageBatch, first_passage_batch
from src.domain.models.stopping_lines import FrozenLineState, sweep_lines


@dataclass(frozen=True)
class MartingaleRun:
    """The samples of one run, p-major, plus (p, t, x, value) truncated sums for extra x."""
    samples: list[MartingaleSample]
    truncated: list[tuple[float, float, float, float]]


@dataclass(frozen=True)
class TrajectorySummary:
    rows: list[dict]
    n_alive: list[int]
    size_biased: list[float]
    conservation: float
    n_events: int


def simulate_task(
    replicate: int,
    measure: DislocationMeasure,
    seed: int,
    horizon: float,
    controls: SimulationControls,
    times: tuple[float, ...],
) -> TrajectorySummary:
    trajectory = simulate(measure, horizon, seed, controls, replicate)
    snapshots = [snapshot_at(trajectory, t) for t in times]
    return TrajectorySummary(
        rows=trajectory_rows(trajectory, replicate, times),
        n_alive=[snap.size for snap in snapshots],
        size_biased=[math.fsum(np.exp(-snap.x) * snap.x) for snap in snapshots],
        conservation=max(conservation_error(snap) for snap in snapshots),
        n_events=trajectory.n_events,
    )


def snapshot_task(
    replicate: int,
    measure: DislocationMeasure,
    seed: int,
    horizon: float,
    controls: SimulationControls,
    times: tuple[float, ...],
) -> list[Snapshot]:
    trajectory = simulate(measure, horizon, seed, controls, replicate)
    return [snapshot_at(trajectory, t) for t in times]


def martingale_task(
    replicate: int,
    measure: DislocationMeasure,
    profile: SpectralProfile,
    seed: int,
    horizon: float,
    controls: SimulationControls,
    p_values: tuple[float, ...],
    times: tuple[float, ...],
    x_trunc: float | None,
    x_values: tuple[float, ...] = (),
) -> MartingaleRun:
    """Samples for every (p, t) cell of one run; truncated sums for every x at critical p."""
    trajectory = simulate(measure, horizon, seed, controls, replicate)
    samples = [martingale_sample(trajectory, profile, p, t, x_trunc) for p in p_values for t in times]
    truncated = []
    if trajectory.has_lineage:
        truncated = [
            (p, t, x, truncated_derivative_W(trajectory, profile, p, x, t))
            for p in p_values if profile.is_critical(p)
            for t in times
            for x in x_values
        ]
    return MartingaleRun(samples, truncated)


def line_task(
    replicate: int,
    measure: DislocationMeasure,
    profile: SpectralProfile,
    seed: int,
    p: float,
    levels: tuple[float, ...],
    controls: SimulationControls,
) -> list[FrozenLineState]:
    return sweep_lines(measure, profile, p, levels, seed, replicate, controls)


def delta_task(
    replicate: int,
    measure: DislocationMeasure,
    profile: SpectralProfile,
    seed: int,
    p: float,
    horizon: float,
    controls: SimulationControls,
    x_trunc: float,
) -> DeltaSample:
    trajectory = simulate(measure, horizon, seed, controls, replicate)
    return delta_sample(trajectory, profile, p, x_trunc)


def speed_task(
    replicate: int,
    measure: DislocationMeasure,
    seed: int,
    window: tuple[float, float],
    controls: SimulationControls,
    log_coefficient: float = 0.0,
) -> float:
    trajectory = simulate(measure, window[1], seed, controls, replicate)
    return float(per_run_speeds([trajectory], window, log_coefficient=log_coefficient)[0])


def passage_task(
    block: int,
    profile: SpectralProfile,
    seed: int,
    p: float,
    z: float,
    total: int,
    block_size: int,
    first_block: int,
    time_cap: float,
) -> PassageBatch:
    """
    One block of passages of a (p, z) cell.

    Blocks are numbered across the whole grid so every block has its own
    stream; first_block is the number of the cell's first block.
    """
    local = block - first_block
    n = min(block_size, total - local * block_size)
    return first_passage_batch(profile, p, z, n, rng_for(seed, block, StreamPurpose.PASSAGE), time_cap)
