"""
Additive, derivative and multiplicative martingales on simulated populations,
and the estimation of their limits Δ_p.

For a population {xᵢ} at time t, the additive weight of fragment i is
e^(Φ(p)t − (p+1)xᵢ). The derivative martingale at the critical tilt p̄
weighs it by the signed distance xᵢ − c_p̄·t to the critical line; the
truncated version keeps only lineages that stayed above the shifted line.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from src.domain.models.dislocation import DislocationMeasure, SpectralProfile
from src.domain.models.errors import (
    DomainRangeError,
    LineageDataMissing,
    WaveClassViolation,
)
from src.domain.models.fragmentation import (
    FragTrajectory,
    SimulationControls,
    Snapshot,
    simulate,
    snapshot_at,
    truncation_bias,
)
from src.domain.models.statistics import Summary, summarize

logger = logging.getLogger(__name__)

DEFAULT_X_TRUNC = 8.0
LINEAGE_DRIFT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class MartingaleSample:
    """Martingale values of one run at one time; dW fields are None when not applicable."""
    p: float
    t: float
    W: float
    dW: float | None
    dW_trunc: float | None
    truncation_bias_bound: float
    n_alive: int
    dropped_mass: float


@dataclass(frozen=True)
class DeltaSample:
    """One estimate of the martingale limit Δ_p with its horizon diagnostic."""
    p: float
    horizon: float
    value: float
    diagnostic: float
    early: float = math.nan


def _weights(snapshot: Snapshot, profile: SpectralProfile, p: float) -> np.ndarray:
    return np.exp(profile.phi(p) * snapshot.time - (p + 1.0) * snapshot.x)


def _require_critical(profile: SpectralProfile, p: float) -> None:
    if not profile.is_critical(p):
        raise DomainRangeError("p", p, f"the derivative martingale needs p = p_bar={profile.p_bar!r}")


def additive_W(snapshot: Snapshot, profile: SpectralProfile, p: float) -> float:
    """W(t, p) = e^(Φ(p)t)·Σᵢ e^(−(p+1)xᵢ)."""
    return math.fsum(_weights(snapshot, profile, p))


def derivative_W(snapshot: Snapshot, profile: SpectralProfile, p: float) -> float:
    """
    ∂W(t, p̄) = Σᵢ (xᵢ − tΦ′(p̄))·e^(Φ(p̄)t − (p̄+1)xᵢ), which is −∂W(t, p)/∂p at p̄.

    Raises:
        DomainRangeError: If p is not the critical tilt of the profile.
    """
    _require_critical(profile, p)
    distance = snapshot.x - snapshot.time * profile.phi_prime(p)
    return math.fsum(distance * _weights(snapshot, profile, p))


def truncated_derivative_W(trajectory: FragTrajectory, profile: SpectralProfile, p: float, x: float, t: float) -> float:
    """
    ∂W(t, p̄, x): the derivative sum shifted by x and restricted to I(t, x).

    I(t, x) holds the fragments whose whole lineage stayed strictly above
    the line s ↦ c_p̄·s − x. Positions only jump up, so it is enough to check
    each ancestor at its death time and the fragment itself at t.

    Raises:
        DomainRangeError: If x ≤ 0 or p is not critical.
        LineageDataMissing: If the trajectory did not track lineage minima for c_p̄.
    """
    if not x > 0.0:
        raise DomainRangeError("x", x, "must be positive")
    _require_critical(profile, p)
    c = profile.critical_speed
    drift = trajectory.controls.lineage_drift
    if not trajectory.has_lineage or abs(drift - c) > LINEAGE_DRIFT_TOLERANCE:
        raise LineageDataMissing(
            f"Truncated derivative needs lineage minima tracked with drift c_p_bar={c!r}; "
            f"trajectory has lineage_drift={drift!r}."
        )
    snap = snapshot_at(trajectory, t)
    shifted = x + snap.x - c * t
    keep = (x + snap.lineage_min > 0.0) & (shifted > 0.0)
    if not keep.any():
        return 0.0
    weights = _weights(snap, profile, p)
    return math.fsum(shifted[keep] * weights[keep])


def product_M(snapshot: Snapshot, wave: Callable[[np.ndarray], np.ndarray], profile: SpectralProfile, p: float, x: float) -> float:
    """
    M(t, p, x) = Πᵢ ψ(x + xᵢ − c_p·t).

    Raises:
        WaveClassViolation: If ψ leaves (0, 1] on the population.
    """
    values = np.asarray(wave(x + snapshot.x - profile.wave_speed(p) * snapshot.time), dtype=float)
    if np.any(values <= 0.0) or np.any(values > 1.0):
        raise WaveClassViolation("The wave must map into (0, 1].")
    return math.exp(math.fsum(np.log(values)))


def martingale_sample(
    trajectory: FragTrajectory,
    profile: SpectralProfile,
    p: float,
    t: float,
    x_trunc: float | None = None,
) -> MartingaleSample:
    """
    Collects the martingales of one run at one time.

    dW is filled at the critical tilt; dW_trunc additionally needs x_trunc and
    a trajectory with lineage minima.
    """
    snap = snapshot_at(trajectory, t)
    critical = profile.is_critical(p)
    d_w = derivative_W(snap, profile, p) if critical else None
    d_trunc = None
    if critical and x_trunc is not None and trajectory.has_lineage:
        d_trunc = truncated_derivative_W(trajectory, profile, p, x_trunc, t)
    return MartingaleSample(
        p=p,
        t=t,
        W=additive_W(snap, profile, p),
        dW=d_w,
        dW_trunc=d_trunc,
        truncation_bias_bound=truncation_bias(trajectory, profile, p, t),
        n_alive=snap.size,
        dropped_mass=snap.dropped_mass,
    )


# --- Limits ---

def delta_sample(trajectory: FragTrajectory, profile: SpectralProfile, p: float, x_trunc: float = DEFAULT_X_TRUNC) -> DeltaSample:
    """
    Δ_p from one run at its horizon T.

    Below p̄ the value is W(T, p); at p̄ it is ∂W(T, p̄, x_trunc). The
    diagnostic is the change of that martingale between T/2 and T.
    """
    horizon = trajectory.horizon
    if profile.is_critical(p):
        late = truncated_derivative_W(trajectory, profile, p, x_trunc, horizon)
        early = truncated_derivative_W(trajectory, profile, p, x_trunc, horizon / 2.0)
    else:
        late = additive_W(snapshot_at(trajectory, horizon), profile, p)
        early = additive_W(snapshot_at(trajectory, horizon / 2.0), profile, p)
    return DeltaSample(p=p, horizon=horizon, value=late, diagnostic=abs(late - early), early=early)


def check_delta_tilt(profile: SpectralProfile, p: float) -> None:
    if not (profile.p_lower < p <= profile.p_bar + 1e-12):
        raise DomainRangeError("p", p, f"must lie in (p_lower={profile.p_lower!r}, p_bar={profile.p_bar!r}]")


def delta_controls(profile: SpectralProfile, p: float, controls: SimulationControls | None = None) -> SimulationControls:
    """The controls a Δ run needs: lineage tracking at c_p̄ for the critical tilt."""
    controls = controls or SimulationControls()
    if not profile.is_critical(p):
        return controls
    return SimulationControls(
        max_fragments=controls.max_fragments,
        size_floor=controls.size_floor,
        lineage_drift=profile.critical_speed,
    )


def estimate_delta(
    measure: DislocationMeasure,
    profile: SpectralProfile,
    p: float,
    horizon: float,
    n_reps: int,
    seed: int,
    x_trunc: float = DEFAULT_X_TRUNC,
    controls: SimulationControls | None = None,
) -> list[DeltaSample]:
    """
    Estimates Δ_p on n_reps independent runs, replicate i using stream (seed, i).

    Raises:
        DomainRangeError: If p is outside (p̲, p̄].
    """
    check_delta_tilt(profile, p)
    run_controls = delta_controls(profile, p, controls)
    samples = [
        delta_sample(simulate(measure, horizon, seed, run_controls, replicate), profile, p, x_trunc)
        for replicate in range(n_reps)
    ]
    logger.info("Estimated %d delta samples at p=%r, T=%r", n_reps, p, horizon)
    return samples


def summarize_deltas(samples: Sequence[DeltaSample]) -> Summary:
    """Mean, SE, median and 5% trimmed mean of the Δ values."""
    return summarize([s.value for s in samples])
