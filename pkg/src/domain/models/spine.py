"""
The tagged fragment and the renewal functionals built on it.

Under the tilted law ℙ^(p) the tagged fragment ξ_t = −log|Π₁(t)| is a
compound Poisson subordinator with jump law m^(p). Its position relative to
the line of slope c_p is Y_t = ξ_t − c_p·t. First passages of Y over a level
are simulated pathwise; the potential measure is never built.

Crossing convention: for p > 0 the level is open, τ_z = inf{t : Y_t > z},
and Y (drifting down between jumps) only crosses by a jump. For p ≤ 0 the
level is closed, τ_z = inf{t : Y_t ≥ z}: Y creeps upward when c_p < 0, and
at z = 0 the passage happens at τ = 0.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy import integrate

from src.domain.models.dislocation import DislocationMeasure, SpectralProfile
from src.domain.models.errors import (
    DomainRangeError,
    EnvelopeNotAdmissible,
    LatticeMeasureError,
    LatticeWarning,
)
from src.domain.models.fragmentation import SimulationControls, simulate, snapshot_at
from src.domain.models.functionals import TestFunctional
from src.domain.models.random_streams import StreamPurpose, rng_for
from src.domain.models.statistics import Summary, difference_z_score, loglog_slope, ratio_estimate, summarize

logger = logging.getLogger(__name__)

DEFAULT_TIME_CAP = 1e4


# --- Tagged Paths ---

@dataclass(frozen=True, eq=False)
class SpinePath:
    """One path of ξ on [0, horizon] under ℙ^(p)."""
    p: float
    drift: float
    horizon: float
    jump_times: np.ndarray
    jump_sizes: np.ndarray

    def xi_at(self, t: float) -> float:
        k = np.searchsorted(self.jump_times, t, side="right")
        return float(np.sum(self.jump_sizes[:k]))

    def y_at(self, t: float) -> float:
        return self.xi_at(t) - self.drift * t


def _drift(profile: SpectralProfile, p: float) -> float:
    return math.nan if p == -1.0 else profile.wave_speed(p)


def simulate_tagged(
    profile: SpectralProfile,
    p: float,
    horizon: float,
    seed: int,
    replicate: int = 0,
) -> SpinePath:
    """
    Simulates the tagged fragment under ℙ^(p) up to the horizon.

    Raises:
        DomainRangeError: If p ≤ p̲ or the horizon is negative.
    """
    if not horizon >= 0.0:
        raise DomainRangeError("horizon", horizon, "must be nonnegative")
    law = profile.jump_law(p)
    rng = rng_for(seed, replicate, StreamPurpose.SPINE)
    n = int(rng.poisson(law.total_rate * horizon))
    times = np.sort(rng.uniform(0.0, horizon, n))
    sizes = law.sample(rng, n)
    return SpinePath(p=p, drift=_drift(profile, p), horizon=horizon, jump_times=times, jump_sizes=sizes)


def sample_tagged_values(
    profile: SpectralProfile,
    p: float,
    t: float,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """n independent draws of ξ_t under ℙ^(p)."""
    if not t >= 0.0:
        raise DomainRangeError("t", t, "must be nonnegative")
    law = profile.jump_law(p)
    counts = rng.poisson(law.total_rate * t, n)
    sizes = law.sample(rng, int(counts.sum()))
    owners = np.repeat(np.arange(n), counts)
    return np.bincount(owners, weights=sizes, minlength=n)


# --- First Passage ---

@dataclass(frozen=True)
class FirstPassage:
    level: float
    tau: float
    overshoot: float
    observed: bool = True


@dataclass(frozen=True, eq=False)
class PassageBatch:
    """Independent first passages of Y over one level; unobserved rows are NaN."""
    p: float
    level: float
    tau: np.ndarray
    overshoot: np.ndarray
    observed: np.ndarray

    def __len__(self) -> int:
        return int(self.tau.size)

    def passages(self) -> Iterator[FirstPassage]:
        for tau, over, seen in zip(self.tau, self.overshoot, self.observed):
            yield FirstPassage(self.level, float(tau), float(over), bool(seen))

    def observed_overshoots(self) -> np.ndarray:
        return self.overshoot[self.observed]


def first_passage_batch(
    profile: SpectralProfile,
    p: float,
    z: float,
    n: int,
    rng: np.random.Generator,
    time_cap: float = DEFAULT_TIME_CAP,
) -> PassageBatch:
    """
    Simulates n first passages of Y over z, vectorized over the still-running paths.

    Paths that have not crossed by time_cap are flagged as not observed.
    """
    if not z >= 0.0:
        raise DomainRangeError("z", z, "must be nonnegative")
    law = profile.jump_law(p)
    c = profile.wave_speed(p)
    closed = p <= 0.0

    tau = np.full(n, math.nan)
    over = np.full(n, math.nan)
    observed = np.zeros(n, dtype=bool)

    active = np.arange(n)
    y = np.zeros(n)
    clock = np.zeros(n)
    if closed and z <= 0.0:
        tau[:] = 0.0
        over[:] = 0.0
        observed[:] = True
        return PassageBatch(p, z, tau, over, observed)

    while active.size:
        wait = rng.exponential(1.0 / law.total_rate, active.size)
        if c < 0.0:
            creep = (z - y) / (-c)
            crept = creep <= wait
            if crept.any():
                idx = active[crept]
                tau[idx] = clock[crept] + creep[crept]
                over[idx] = 0.0
                observed[idx] = tau[idx] <= time_cap
                keep = ~crept
                active, y, clock, wait = active[keep], y[keep], clock[keep], wait[keep]
                if not active.size:
                    break
        jumps = law.sample(rng, active.size)
        clock = clock + wait
        y = y - c * wait + jumps
        crossed = (y >= z) if closed else (y > z)
        capped = ~crossed & (clock > time_cap)

        done = active[crossed]
        tau[done] = clock[crossed]
        over[done] = y[crossed] - z
        observed[done] = clock[crossed] <= time_cap
        if capped.any():
            logger.debug("%d passages over z=%r not observed before t=%r", int(capped.sum()), z, time_cap)
        keep = ~crossed & ~capped
        active, y, clock = active[keep], y[keep], clock[keep]

    # Crossings after the cap count as not observed.
    tau[~observed] = math.nan
    over[~observed] = math.nan
    return PassageBatch(p, z, tau, over, observed)


def first_passage(
    profile: SpectralProfile,
    p: float,
    z: float,
    seed: int,
    replicate: int = 0,
    time_cap: float = DEFAULT_TIME_CAP,
) -> FirstPassage:
    """One passage of Y over z; a capped path is returned with observed=False."""
    rng = rng_for(seed, replicate, StreamPurpose.PASSAGE)
    return next(first_passage_batch(profile, p, z, 1, rng, time_cap).passages())


# --- Renewal Functionals ---

@dataclass(frozen=True)
class RenewalEstimate:
    """A Q functional with its error: quadrature bound or Monte Carlo SE."""
    value: float
    error: float
    method: str
    n_samples: int = 0


def q_small(
    profile: SpectralProfile,
    p: float,
    f: TestFunctional,
    force: bool = False,
) -> RenewalEstimate:
    """
    Q^(p)(f) = ∫ F(y) m^(p)(dy) / (Φ′(p) − c_p) for p ∈ (p̲, 0], with F(y) = ∫₀^y f.

    Args:
        profile: The spectral profile.
        p: The tilt.
        f: The test functional.
        force: Evaluate on lattice jump laws anyway (with a LatticeWarning).

    Raises:
        DomainRangeError: If p is outside (p̲, 0] or p = −1.
        EnvelopeNotAdmissible: If f grows too fast for the profile at p.
        LatticeMeasureError: If the jump law is lattice and force is False.
    """
    if not (profile.p_lower < p <= 0.0):
        raise DomainRangeError("p", p, f"must lie in (p_lower={profile.p_lower!r}, 0]")
    f.check_envelope(profile, p)
    if profile.is_lattice(p):
        if not force:
            raise LatticeMeasureError(
                f"The jump law at p={p!r} is lattice; the renewal limit does not apply."
            )
        warnings.warn(f"q_small evaluated on a lattice jump law at p={p!r}.", LatticeWarning, stacklevel=2)

    denominator = profile.phi_prime(p) - profile.wave_speed(p)
    if not denominator > 0.0:
        raise DomainRangeError("p", p, "the tilted drift Φ′(p) − c_p must be positive")
    numerator, error = profile.jump_law(p).integrate(f.integral, with_error=True)
    return RenewalEstimate(numerator / denominator, error / denominator, "quadrature")


def q_large(
    profile: SpectralProfile,
    p: float,
    f: TestFunctional,
    n_samples: int,
    seed: int,
    replicate: int = 0,
    time_cap: float = DEFAULT_TIME_CAP,
) -> RenewalEstimate:
    """
    Q^(p)(f) = E[F(O)]/E[O] with O the overshoot of Y over 0, for p ∈ (0, p̄].

    Returns the ratio with its delta-method standard error.
    """
    if not 0.0 < p <= profile.p_bar + 1e-12:
        raise DomainRangeError("p", p, f"must lie in (0, p_bar={profile.p_bar!r}]")
    f.check_envelope(profile, p)
    rng = rng_for(seed, replicate, StreamPurpose.PASSAGE)
    overshoots = first_passage_batch(profile, p, 0.0, n_samples, rng, time_cap).observed_overshoots()
    value, se = ratio_estimate(f.integral(overshoots), overshoots)
    return RenewalEstimate(value, se, "monte_carlo", int(overshoots.size))



def q_large_error_slope(
    profile: SpectralProfile,
    p: float,
    f: TestFunctional,
    n_samples: int,
    seed: int,
    first_replicate: int,
    doublings: int = 3,
    time_cap: float = DEFAULT_TIME_CAP,
) -> tuple[list[int], list[float], float]:
    """
    Standard errors of q_large at n, n/2, ... on fresh streams and the slope
    of log(error) against log(n), which is −1/2 for a consistent estimator.

    Returns:
        The sample sizes, their standard errors and the fitted slope.
    """
    sizes = [max(n_samples >> k, 2) for k in range(doublings, -1, -1)]
    errors = [
        q_large(profile, p, f, size, seed, first_replicate + k, time_cap).error
        for k, size in enumerate(sizes)
    ]
    return sizes, errors, loglog_slope(sizes, errors)


# --- Ladder Heights ---

@dataclass(frozen=True)
class LadderCheck:
    p: float
    eta: float
    eps: float
    lhs: float
    rhs: float
    lhs_error: float

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)


def _quad_pieces(fn: Callable[[float], float], breaks: list[float], upper: float) -> tuple[float, float]:
    total, error = 0.0, 0.0
    edges = [0.0] + [b for b in breaks if 0.0 < b < upper] + [upper]
    for a, b in zip(edges[:-1], edges[1:]):
        value, err = integrate.quad(fn, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)
        total += value
        error += err
    return total, error


def ladder_height_check(profile: SpectralProfile, p: float, eps: float) -> LadderCheck:
    """
    Compares ∫ e^(εx) m_H(dx) by quadrature with [Φ(p+η) − Φ(p−ε)]/(η+ε).

    The ladder-height density is m̄(x) − η∫_x^∞ e^(−η(y−x)) m̄(y) dy with m̄
    the tail of m^(p) and η = eta_root(p).

    Raises:
        EnvelopeNotAdmissible: If ε < 0 or p − ε ≤ p̲.
    """
    if not (eps >= 0.0 and p - eps > profile.p_lower):
        raise EnvelopeNotAdmissible(
            f"eps={eps!r} needs eps >= 0 and p - eps > p_lower={profile.p_lower!r}."
        )
    eta = profile.eta_root(p)
    if eta + eps <= 0.0:
        raise EnvelopeNotAdmissible("eta + eps must be positive.")
    law = profile.jump_law(p)
    breaks = sorted(float(s) for s in law.sizes) if law.is_atomic else []
    upper = breaks[-1] if law.is_atomic else math.inf

    def inner(x: float) -> float:
        if eta == 0.0:
            return 0.0
        later = [b for b in breaks if b > x]
        value, _ = _quad_pieces(lambda u: math.exp(-eta * u) * law.tail(x + u), [b - x for b in later], upper - x)
        return value

    def inner_ratio(x: float) -> float:
        # ∫_x^∞ e^(−η(y−x)) m̄(y) dy / m̄(x), kept finite for large x
        if eta == 0.0:
            return 0.0
        base = law.log_tail(x)
        value, _ = integrate.quad(
            lambda u: math.exp(-eta * u + law.log_tail(x + u) - base), 0.0, math.inf, epsabs=1e-13, epsrel=1e-11
        )
        return value

    def density(x: float) -> float:
        if law.is_atomic:
            return math.exp(eps * x) * (law.tail(x) - eta * inner(x))
        log_scale = eps * x + law.log_tail(x)
        if log_scale < -745.0:
            return 0.0
        return math.exp(log_scale) * (1.0 - eta * inner_ratio(x))

    lhs, lhs_error = _quad_pieces(density, breaks, upper)
    rhs = (profile.phi(p + eta) - profile.phi(p - eps)) / (eta + eps)
    return LadderCheck(p=p, eta=eta, eps=eps, lhs=lhs, rhs=rhs, lhs_error=lhs_error)


# --- Monte Carlo Identities ---

@dataclass(frozen=True)
class ManyToOne:
    p: float
    t: float
    tree: Summary
    spine: Summary

    @property
    def z_score(self) -> float:
        return difference_z_score(self.tree, self.spine)


def tree_side_value(x: np.ndarray, phi_p: float, p: float, t: float, g: Callable) -> float:
    """e^(Φ(p)t)·Σᵢ e^(−(p+1)xᵢ) g(xᵢ) over one alive population."""
    weights = np.exp(phi_p * t - (p + 1.0) * x)
    return float(np.sum(weights * g(x)))


def many_to_one_check(
    measure: DislocationMeasure,
    profile: SpectralProfile,
    p: float,
    t: float,
    g: Callable[[np.ndarray], np.ndarray],
    n_runs: int,
    seed: int,
    controls: SimulationControls | None = None,
) -> ManyToOne:
    """Tree average of the tilted sum of g against E^(p)[g(ξ_t)] on the spine."""
    phi_p = profile.phi(p)
    tree = []
    for replicate in range(n_runs):
        snap = snapshot_at(simulate(measure, t, seed, controls, replicate), t)
        tree.append(tree_side_value(snap.x, phi_p, p, t, g))
    spine_values = g(sample_tagged_values(profile, p, t, n_runs, rng_for(seed, 0, StreamPurpose.SPINE)))
    return ManyToOne(p=p, t=t, tree=summarize(tree), spine=summarize(spine_values))


@dataclass(frozen=True)
class LaplaceCheck:
    p: float
    q: float
    t: float
    empirical: Summary
    target: float


def laplace_check(
    profile: SpectralProfile,
    p: float,
    q: float,
    t: float,
    n: int,
    seed: int,
    replicate: int = 0,
) -> LaplaceCheck:
    """E^(p)[e^(−qξ_t)] by simulation against e^(−t(Φ(p+q) − Φ(p)))."""
    values = sample_tagged_values(profile, p, t, n, rng_for(seed, replicate, StreamPurpose.SPINE))
    target = math.exp(-t * (profile.phi(p + q) - profile.phi(p)))
    return LaplaceCheck(p=p, q=q, t=t, empirical=summarize(np.exp(-q * values)), target=target)
