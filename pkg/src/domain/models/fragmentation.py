"""
Event-driven exact simulation of a finite-activity conservative fragmentation.

The process starts from one fragment of unit mass (x = −log mass = 0). Every
fragment carries an independent exponential clock of rate γ; when it rings
the fragment is replaced by children whose relative sizes are drawn from
γ⁻¹ν. Pending rings sit in a priority queue keyed by (time, fragment id).

The trajectory keeps one row per fragment ever created plus a compact event
log; the alive population at any time is reconstructed from birth and death
times instead of being stored.
"""

import heapq
import logging
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from src.domain.models.dislocation import DislocationMeasure, SpectralProfile
from src.domain.models.errors import (
    EmptyWindowError,
    SimulationCapExceeded,
    TrajectoryRangeError,
)
from src.domain.models.random_streams import StreamPurpose, rng_for

logger = logging.getLogger(__name__)

CONSERVATION_CHECK_TOLERANCE = 1e-9


# --- Simulation Controls ---

@dataclass(frozen=True)
class SimulationControls:
    """
    Resource controls of one simulation.

    Attributes:
        max_fragments: Cap on the alive population; exceeding it aborts the run.
        size_floor: Fragments lighter than this are retired to dropped_mass
                    and never split again. 0 disables retirement.
        lineage_drift: When set to c, every fragment records the minimum over
                       its strict ancestors a of xₐ − c·(death time of a).
    """
    max_fragments: int = 1_000_000
    size_floor: float = 1e-12
    lineage_drift: float | None = None

    def __post_init__(self):
        if self.max_fragments < 1:
            raise ValueError("max_fragments must be positive.")
        if not self.size_floor >= 0.0:
            raise ValueError("size_floor must be nonnegative.")


# --- Trajectory Types ---

class Fragment(NamedTuple):
    id: int
    parent_id: int | None
    x: float
    birth_time: float


class SplitEvent(NamedTuple):
    time: float
    parent_id: int
    child_ids: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Snapshot:
    """The alive population at one time, sorted by x ascending (ties by id)."""
    time: float
    ids: np.ndarray
    x: np.ndarray
    birth: np.ndarray
    dropped_mass: float
    lineage_min: np.ndarray | None = None

    @property
    def size(self) -> int:
        return int(self.ids.size)

    def entries(self) -> list[tuple[float, float, int]]:
        """The population as (x, birth_time, id) triples."""
        return [(float(x), float(b), int(i)) for x, b, i in zip(self.x, self.birth, self.ids)]

    def total_mass(self) -> float:
        return math.fsum(np.exp(-self.x))


class FragTrajectory:
    """
    One simulated fragmentation up to its horizon.

    Fragment rows are indexed by id; children of one split have consecutive
    ids, so the event log only stores the first child id and the count.
    """

    def __init__(
        self,
        measure: DislocationMeasure,
        seed: int,
        replicate: int,
        horizon: float,
        controls: SimulationControls,
        x: np.ndarray,
        birth: np.ndarray,
        death: np.ndarray,
        parent: np.ndarray,
        retired: np.ndarray,
        event_times: np.ndarray,
        event_parents: np.ndarray,
        event_first_child: np.ndarray,
        event_child_count: np.ndarray,
        lineage_min: np.ndarray | None = None,
    ):
        self.measure = measure
        self.seed = seed
        self.replicate = replicate
        self.horizon = horizon
        self.controls = controls
        self.x = x
        self.birth = birth
        self.death = death
        self.parent = parent
        self.retired = retired
        self.event_times = event_times
        self.event_parents = event_parents
        self.event_first_child = event_first_child
        self.event_child_count = event_child_count
        self.lineage_min = lineage_min

    @property
    def n_fragments(self) -> int:
        return int(self.x.size)

    @property
    def n_events(self) -> int:
        return int(self.event_times.size)

    @property
    def has_lineage(self) -> bool:
        return self.lineage_min is not None

    @property
    def dropped_mass(self) -> float:
        """Mass retired below the size floor by the horizon."""
        return math.fsum(np.exp(-self.x[self.retired]))

    def fragment(self, fragment_id: int) -> Fragment:
        parent = int(self.parent[fragment_id])
        return Fragment(
            id=fragment_id,
            parent_id=None if parent < 0 else parent,
            x=float(self.x[fragment_id]),
            birth_time=float(self.birth[fragment_id]),
        )

    def events(self) -> Iterator[SplitEvent]:
        for time, parent, first, count in zip(
            self.event_times, self.event_parents, self.event_first_child, self.event_child_count
        ):
            yield SplitEvent(float(time), int(parent), tuple(range(int(first), int(first + count))))

    def final_population(self) -> Snapshot:
        return snapshot_at(self, self.horizon)


# --- Simulation ---

def simulate(
    measure: DislocationMeasure,
    horizon: float,
    seed: int,
    controls: SimulationControls | None = None,
    replicate: int = 0,
) -> FragTrajectory:
    """
    Simulates the fragmentation on [0, horizon].

    Args:
        measure: The dislocation measure ν.
        horizon: The final time T ≥ 0.
        seed: The master seed.
        controls: Resource controls (defaults apply when omitted).
        replicate: Replicate index selecting the random stream.

    Returns:
        The completed FragTrajectory.

    Raises:
        TrajectoryRangeError: If the horizon is negative or not finite.
        SimulationCapExceeded: If the alive population exceeds max_fragments.
    """
    if not (math.isfinite(horizon) and horizon >= 0.0):
        raise TrajectoryRangeError(f"horizon must be finite and nonnegative, got {horizon!r}.")
    controls = controls or SimulationControls()
    rng = rng_for(seed, replicate, StreamPurpose.TREE)
    scale = 1.0 / measure.total_mass
    floor = controls.size_floor
    neg_log_floor = -math.log(floor) if floor > 0.0 else math.inf
    drift = controls.lineage_drift
    track = drift is not None

    xs = [0.0]
    births = [0.0]
    deaths = [math.inf]
    parents = [-1]
    retired = [False]
    lineage = [math.inf]
    ev_times: list[float] = []
    ev_parents: list[int] = []
    ev_first: list[int] = []
    ev_count: list[int] = []

    queue = [(rng.exponential(scale), 0)]
    alive = 1

    while queue and queue[0][0] <= horizon:
        time, fid = heapq.heappop(queue)
        parent_x = xs[fid]
        deaths[fid] = time
        child_lineage = min(lineage[fid], parent_x - drift * time) if track else math.inf
        ratios = measure.sample_ratios(rng)

        first = len(xs)
        for s in ratios:
            cid = len(xs)
            cx = parent_x - math.log(s)
            xs.append(cx)
            births.append(time)
            deaths.append(math.inf)
            parents.append(fid)
            lineage.append(child_lineage)
            if cx > neg_log_floor:
                retired.append(True)
            else:
                retired.append(False)
                heapq.heappush(queue, (time + rng.exponential(scale), cid))
                alive += 1
        alive -= 1

        ev_times.append(time)
        ev_parents.append(fid)
        ev_first.append(first)
        ev_count.append(len(ratios))

        if alive > controls.max_fragments:
            diagnostics = {
                "time": time,
                "alive": alive,
                "events": len(ev_times),
                "fragments": len(xs),
                "dropped_mass": math.fsum(math.exp(-x) for x, r in zip(xs, retired) if r),
            }
            logger.warning("Simulation aborted at t=%r: %d alive fragments", time, alive)
            raise SimulationCapExceeded(
                f"Alive population exceeded max_fragments={controls.max_fragments} at t={time!r}.",
                diagnostics,
            )

    logger.debug(
        "Simulated seed=%d replicate=%d to T=%r: %d events, %d alive",
        seed, replicate, horizon, len(ev_times), alive,
    )
    return FragTrajectory(
        measure=measure,
        seed=seed,
        replicate=replicate,
        horizon=float(horizon),
        controls=controls,
        x=np.asarray(xs),
        birth=np.asarray(births),
        death=np.asarray(deaths),
        parent=np.asarray(parents, dtype=np.int64),
        retired=np.asarray(retired, dtype=bool),
        event_times=np.asarray(ev_times),
        event_parents=np.asarray(ev_parents, dtype=np.int64),
        event_first_child=np.asarray(ev_first, dtype=np.int64),
        event_child_count=np.asarray(ev_count, dtype=np.int64),
        lineage_min=np.asarray(lineage) if track else None,
    )


# --- Reconstruction ---

def _check_time(trajectory: FragTrajectory, t: float) -> None:
    if not 0.0 <= t <= trajectory.horizon:
        raise TrajectoryRangeError(f"t={t!r} is outside [0, {trajectory.horizon!r}].")


def snapshot_at(trajectory: FragTrajectory, t: float) -> Snapshot:
    """
    Reconstructs the alive population at time t (after any split at exactly t).

    Raises:
        TrajectoryRangeError: If t is outside [0, horizon].
    """
    _check_time(trajectory, t)
    born = trajectory.birth <= t
    mask = born & (trajectory.death > t) & ~trajectory.retired
    ids = np.flatnonzero(mask)
    x = trajectory.x[ids]
    order = np.lexsort((ids, x))
    ids = ids[order]
    dropped = math.fsum(np.exp(-trajectory.x[born & trajectory.retired]))
    return Snapshot(
        time=float(t),
        ids=ids,
        x=trajectory.x[ids],
        birth=trajectory.birth[ids],
        dropped_mass=dropped,
        lineage_min=trajectory.lineage_min[ids] if trajectory.has_lineage else None,
    )


def min_neg_log_size_path(trajectory: FragTrajectory, times: Sequence[float]) -> np.ndarray:
    """
    min x over the alive population at each of the ascending times.

    One pass over the event log with a lazy-deletion heap. A time at which
    every fragment has been retired yields +inf.
    """
    grid = np.asarray(times, dtype=float)
    if grid.size and (np.any(np.diff(grid) < 0.0) or grid[0] < 0.0 or grid[-1] > trajectory.horizon):
        raise TrajectoryRangeError("times must be ascending and inside [0, horizon].")
    dead = np.zeros(trajectory.n_fragments, dtype=bool)
    heap = [(0.0, 0)]
    out = np.empty(grid.size)
    k = 0
    for j, t in enumerate(grid):
        while k < trajectory.n_events and trajectory.event_times[k] <= t:
            dead[trajectory.event_parents[k]] = True
            first = int(trajectory.event_first_child[k])
            for cid in range(first, first + int(trajectory.event_child_count[k])):
                if not trajectory.retired[cid]:
                    heapq.heappush(heap, (float(trajectory.x[cid]), cid))
            k += 1
        while heap and dead[heap[0][1]]:
            heapq.heappop(heap)
        out[j] = heap[0][0] if heap else math.inf
    return out


def log_correction(profile: SpectralProfile) -> float:
    """3/(2(p̄+1)), the coefficient of log t in min x(t) − c_p̄·t."""
    return 1.5 / (profile.p_bar + 1.0)


def per_run_speeds(
    trajectories: Sequence[FragTrajectory],
    window: tuple[float, float],
    n_points: int = 50,
    log_coefficient: float = 0.0,
) -> np.ndarray:
    """
    Least-squares slope of min x(t) − log_coefficient·log t against t on the
    window, one per trajectory.
    """
    t0, t1 = window
    if not t1 > t0 >= 0.0:
        raise EmptyWindowError(f"The window must satisfy t1 > t0 >= 0, got {window!r}.")
    if log_coefficient != 0.0 and t0 <= 0.0:
        raise EmptyWindowError(f"A log t correction needs t0 > 0, got {window!r}.")
    if not trajectories:
        raise EmptyWindowError("No trajectories to fit.")
    short = [tr.horizon for tr in trajectories if tr.horizon < t1]
    if short:
        raise EmptyWindowError(f"Window {window!r} reaches past a trajectory horizon {min(short)!r}.")
    times = np.linspace(t0, t1, n_points)
    slopes = []
    for trajectory in trajectories:
        path = min_neg_log_size_path(trajectory, times)
        if log_coefficient != 0.0:
            path = path - log_coefficient * np.log(times)
        finite = np.isfinite(path)
        if finite.sum() < 2:
            raise EmptyWindowError(f"Trajectory replicate={trajectory.replicate} has no population in the window.")
        slopes.append(np.polyfit(times[finite], path[finite], 1)[0])
    return np.asarray(slopes)


def largest_fragment_speed(
    trajectories: Sequence[FragTrajectory],
    window: tuple[float, float],
    n_points: int = 50,
    log_coefficient: float = 0.0,
) -> float:
    """
    Speed of the largest fragment: the mean of the per-run regression slopes.

    min x(t) grows like c_p̄·t + log_correction(profile)·log t, so on short
    windows pass that coefficient to fit the linear part only.

    Raises:
        EmptyWindowError: If the window is empty or reaches past a horizon.
    """
    return float(np.mean(per_run_speeds(trajectories, window, n_points, log_coefficient)))


# --- Diagnostics and Export ---

def conservation_error(snapshot: Snapshot) -> float:
    """|Σ e^(−x) + dropped_mass − 1| on one snapshot."""
    return abs(snapshot.total_mass() + snapshot.dropped_mass - 1.0)


def truncation_bias(trajectory: FragTrajectory, profile: SpectralProfile, p: float, t: float) -> float:
    """
    Expected contribution to W(t, p) removed by the size floor.

    Each fragment retired at time b with mass m would have contributed
    m^(p+1)·e^(Φ(p)·b) in mean at any later time.
    """
    _check_time(trajectory, t)
    mask = trajectory.retired & (trajectory.birth <= t)
    if not mask.any():
        return 0.0
    phi = profile.phi(p)
    return math.fsum(np.exp(-(p + 1.0) * trajectory.x[mask] + phi * trajectory.birth[mask]))


TRAJECTORY_COLUMNS = ("run_id", "seed", "t", "n_alive", "min_x", "sum_mass", "dropped_mass")


def trajectory_rows(trajectory: FragTrajectory, run_id: int, times: Sequence[float]) -> list[dict]:
    """Summary rows of one trajectory at the given times."""
    rows = []
    for t in times:
        snap = snapshot_at(trajectory, t)
        rows.append({
            "run_id": run_id,
            "seed": trajectory.seed,
            "t": float(t),
            "n_alive": snap.size,
            "min_x": float(snap.x[0]) if snap.size else math.inf,
            "sum_mass": snap.total_mass(),
            "dropped_mass": snap.dropped_mass,
        })
    return rows
