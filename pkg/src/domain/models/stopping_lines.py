"""
First-passage stopping lines swept through the fragmentation tree.

The line ℓ^(p,z) freezes each lineage the first time its position x(t)
passes z + c_p·t (open level for p > 0, closed for p ≤ 0, as for the
tagged fragment). The sweep only extends a lineage until it freezes, one
generation at a time, so the work is proportional to the frozen population
rather than to the whole tree at a fixed horizon.

Several nested levels z₁ < z₂ < ... are swept on a single tree: a fragment
frozen at zₖ keeps splitting until it has crossed every level, and each
frozen fragment remembers its frozen ancestor on the level below.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from src.domain.models.dislocation import DislocationMeasure, SpectralProfile
from src.domain.models.errors import DomainRangeError, SimulationCapExceeded
from src.domain.models.fragmentation import SimulationControls
from src.domain.models.functionals import TestFunctional
from src.domain.models.random_streams import StreamPurpose, rng_for

logger = logging.getLogger(__name__)


class FrozenFragment(NamedTuple):
    id: int
    x: float
    freeze_time: float
    distance: float
    weight: float


@dataclass(frozen=True, eq=False)
class FrozenLineState:
    """
    The fragments frozen on one line, in order of discovery.

    parent_index points into the frozen fragments of the next lower level of
    the same sweep (None on the lowest level).
    """
    p: float
    z: float
    speed: float
    phi_p: float
    ids: np.ndarray
    x: np.ndarray
    freeze_time: np.ndarray
    parent_index: np.ndarray | None
    simulated: int

    @property
    def fragment_count(self) -> int:
        return int(self.ids.size)

    @property
    def max_freeze_time(self) -> float:
        return float(self.freeze_time.max()) if self.ids.size else 0.0

    @property
    def distances(self) -> np.ndarray:
        return self.x - self.speed * self.freeze_time - self.z

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.phi_p * self.freeze_time - (self.p + 1.0) * self.x)

    def fragments(self) -> list[FrozenFragment]:
        return [
            FrozenFragment(int(i), float(x), float(t), float(d), float(y))
            for i, x, t, d, y in zip(self.ids, self.x, self.freeze_time, self.distances, self.weights)
        ]

    def conservation_error(self) -> float:
        return abs(math.fsum(np.exp(-self.x)) - 1.0)


# --- Sweeping ---

class _LevelBuffer:
    """Accumulates the frozen fragments of one level across generations."""

    def __init__(self):
        self.count = 0
        self.ids: list[np.ndarray] = []
        self.x: list[np.ndarray] = []
        self.times: list[np.ndarray] = []
        self.parents: list[np.ndarray] = []

    def add(self, ids, x, times, parents) -> np.ndarray:
        index = self.count + np.arange(ids.size)
        self.count += ids.size
        self.ids.append(ids)
        self.x.append(x)
        self.times.append(times)
        self.parents.append(parents)
        return index

    @staticmethod
    def _join(chunks, dtype=float) -> np.ndarray:
        return np.concatenate(chunks) if chunks else np.empty(0, dtype=dtype)


def sweep_lines(
    measure: DislocationMeasure,
    profile: SpectralProfile,
    p: float,
    zs: Sequence[float],
    seed: int,
    replicate: int = 0,
    controls: SimulationControls | None = None,
) -> list[FrozenLineState]:
    """
    Sweeps the nested lines ℓ^(p,z) for ascending levels zs on one tree.

    Args:
        measure: The dislocation measure.
        profile: Its spectral profile.
        p: The tilt, in (p̲, p̄].
        zs: Ascending nonnegative levels.
        seed: The master seed.
        replicate: Replicate index selecting the random stream.
        controls: max_fragments bounds the frozen fragments of all levels
                  plus the current generation.

    Returns:
        One FrozenLineState per level.

    Raises:
        DomainRangeError: If p or the levels are out of range.
        SimulationCapExceeded: If frozen plus frontier fragments exceed max_fragments.
    """
    if not (profile.p_lower < p <= profile.p_bar + 1e-12) or p == -1.0:
        raise DomainRangeError("p", p, f"must lie in (p_lower={profile.p_lower!r}, p_bar={profile.p_bar!r}], p != -1")
    levels = np.asarray(zs, dtype=float)
    if levels.size == 0 or levels[0] < 0.0 or np.any(np.diff(levels) <= 0.0):
        raise DomainRangeError("z", list(zs), "levels must be nonnegative and strictly ascending")

    controls = controls or SimulationControls()
    rng = rng_for(seed, replicate, StreamPurpose.SWEEP)
    c = profile.wave_speed(p)
    phi_p = profile.phi(p)
    side = "right" if p <= 0.0 else "left"
    n_levels = levels.size
    scale = 1.0 / measure.total_mass
    buffers = [_LevelBuffer() for _ in range(n_levels)]

    def check_cap(frontier: int) -> None:
        held = frontier + sum(b.count for b in buffers)
        if held <= controls.max_fragments:
            return
        diagnostics = {
            "generation": generation,
            "frontier": frontier,
            "frozen": [b.count for b in buffers],
            "simulated": next_id,
        }
        logger.warning("Sweep aborted in generation %d holding %d fragments", generation, held)
        raise SimulationCapExceeded(
            f"Sweep held more than max_fragments={controls.max_fragments} frozen and frontier fragments.",
            diagnostics,
        )

    def freeze(old, new, ids, x, anchor, times_for):
        for k in range(n_levels):
            mask = (old <= k) & (k < new)
            if not mask.any():
                continue
            parents = anchor[mask, k - 1] if k > 0 else np.full(int(mask.sum()), -1)
            anchor[mask, k] = buffers[k].add(ids[mask], x[mask], times_for(k, mask), parents)

    ids = np.array([0])
    x = np.array([0.0])
    birth = np.array([0.0])
    level = np.array([0])
    anchor = np.full((1, n_levels), -1)
    next_id = 1
    generation = 0

    while ids.size:
        # Crossings at birth.
        crossed = np.maximum(level, np.searchsorted(levels, x - c * birth, side=side))
        freeze(level, crossed, ids, x, anchor, lambda k, mask: birth[mask])
        keep = crossed < n_levels
        ids, x, birth, level, anchor = ids[keep], x[keep], birth[keep], crossed[keep], anchor[keep]
        if not ids.size:
            break

        life = rng.exponential(scale, ids.size)
        if c < 0.0:
            # Creeping: the position relative to the line rises during the lifetime.
            start = x - c * birth
            crossed = np.maximum(level, np.searchsorted(levels, x - c * (birth + life), side="right"))
            freeze(level, crossed, ids, x, anchor, lambda k, mask: birth[mask] + (levels[k] - start[mask]) / (-c))
            keep = crossed < n_levels
            ids, x, birth, level, anchor, life = (
                ids[keep], x[keep], birth[keep], crossed[keep], anchor[keep], life[keep]
            )
            if not ids.size:
                break

        splits = measure.sample_split_matrix(rng, ids.size)
        rows, cols = np.nonzero(splits > 0.0)
        check_cap(int(rows.size))
        x = x[rows] - np.log(splits[rows, cols])
        birth = birth[rows] + life[rows]
        level = level[rows]
        anchor = anchor[rows]
        ids = next_id + np.arange(rows.size)
        next_id += rows.size
        generation += 1

    check_cap(0)
    logger.debug("Swept p=%r levels=%r in %d generations, %d fragments", p, levels.tolist(), generation, next_id)
    states = []
    for k, buffer in enumerate(buffers):
        states.append(FrozenLineState(
            p=p,
            z=float(levels[k]),
            speed=c,
            phi_p=phi_p,
            ids=_LevelBuffer._join(buffer.ids, dtype=np.int64),
            x=_LevelBuffer._join(buffer.x),
            freeze_time=_LevelBuffer._join(buffer.times),
            parent_index=_LevelBuffer._join(buffer.parents, dtype=np.int64) if k > 0 else None,
            simulated=next_id,
        ))
    return states


def sweep_line(
    measure: DislocationMeasure,
    profile: SpectralProfile,
    p: float,
    z: float,
    seed: int,
    replicate: int = 0,
    controls: SimulationControls | None = None,
) -> FrozenLineState:
    """Sweeps the single line ℓ^(p,z)."""
    return sweep_lines(measure, profile, p, [z], seed, replicate, controls)[0]


# --- Line Functionals ---

def line_W(state: FrozenLineState) -> float:
    """W(ℓ^z, p) = Σᵢ yᵢ."""
    return math.fsum(state.weights)


def coming_generation(
    measure: DislocationMeasure,
    profile: SpectralProfile,
    p: float,
    seed: int,
    replicate: int = 0,
    controls: SimulationControls | None = None,
) -> np.ndarray:
    """The distances dᵢ of the line at z = 0: one realization of the CMJ offspring process."""
    if not p > 0.0:
        raise DomainRangeError("p", p, "the coming generation needs p > 0")
    return sweep_line(measure, profile, p, 0.0, seed, replicate, controls).distances


def malthusian_sum(distances: np.ndarray, p: float) -> float:
    """Σᵢ e^(−(p+1)dᵢ), which has mean one at the Malthusian parameter p + 1."""
    return math.fsum(np.exp(-(p + 1.0) * distances))


@dataclass(frozen=True)
class LLNResult:
    numerator: float
    ratio: float


def lln_from_state(state: FrozenLineState, f: TestFunctional, profile: SpectralProfile) -> LLNResult:
    """Σᵢ yᵢ f(dᵢ) and its ratio to Σᵢ yᵢ on one frozen line."""
    f.check_envelope(profile, state.p)
    weights = state.weights
    numerator = math.fsum(weights * f(state.distances))
    total = math.fsum(weights)
    return LLNResult(numerator=numerator, ratio=numerator / total if numerator != 0.0 else 0.0)


def lln_ratio(
    measure: DislocationMeasure,
    profile: SpectralProfile,
    p: float,
    z: float,
    f: TestFunctional,
    seed: int,
    replicate: int = 0,
    controls: SimulationControls | None = None,
) -> LLNResult:
    """
    Sweeps ℓ^(p,z) once and evaluates the weighted functional of the distances.

    Raises:
        EnvelopeNotAdmissible: If f grows too fast for the profile at p.
    """
    f.check_envelope(profile, p)
    return lln_from_state(sweep_line(measure, profile, p, z, seed, replicate, controls), f, profile)


def nested_consistency(states: Sequence[FrozenLineState]) -> bool:
    """
    Whether each frozen fragment descends from one fragment frozen on the level below.

    The ancestor must be lighter-or-equal in x and frozen no later.
    """
    for lower, upper in zip(states[:-1], states[1:]):
        parents = upper.parent_index
        if parents is None or np.any(parents < 0) or np.any(parents >= lower.fragment_count):
            return False
        if np.any(lower.freeze_time[parents] > upper.freeze_time):
            return False
        if np.any(lower.x[parents] > upper.x):
            return False
    return True


FROZEN_COLUMNS = ("sweep_id", "p", "z", "i", "x", "freeze_time", "d", "y")


def frozen_rows(state: FrozenLineState, sweep_id: int) -> list[dict]:
    """CSV rows of one frozen line, in discovery order."""
    return [
        {
            "sweep_id": sweep_id,
            "p": state.p,
            "z": state.z,
            "i": i,
            "x": fragment.x,
            "freeze_time": fragment.freeze_time,
            "d": fragment.distance,
            "y": fragment.weight,
        }
        for i, fragment in enumerate(state.fragments())
    ]
