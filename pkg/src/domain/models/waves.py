"""
Travelling waves of the fragmentation FKPP equation.

A candidate wave is built from samples of a martingale limit Δ as the
empirical Laplace functional ψ̂(x) = mean exp(−e^(−(p+1)x)·Δ). The module
tabulates it, derives L_p(x) = e^((p+1)x)(1 − ψ(x)), evaluates the operator

    𝒜ψ(x) = −c·ψ′(x) + ∫ {Πᵢ ψ(x − log sᵢ) − ψ(x)} ν(ds)

and classifies wave speeds against the critical speed c_p̄.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from src.domain.models.dislocation import SpectralProfile
from src.domain.models.errors import (
    DomainRangeError,
    InsufficientSamplesError,
    WaveClassViolation,
)

logger = logging.getLogger(__name__)

MIN_DELTA_SAMPLES = 1000
PART_CUTOFF = 1e-14
EVALUATION_CHUNK = 256
RELIABLE_NOISE = 0.1


# --- Wave Functions ---

class WaveFunction:
    """
    A candidate wave ψ_p tabulated on an ascending grid.

    When built from Δ samples the wave evaluates the empirical Laplace
    functional exactly at any x; otherwise it interpolates the table
    linearly, extrapolating left by keeping L_p constant and right with the
    tail 1 − k·e^(−(p+1)x).
    """

    def __init__(
        self,
        p: float,
        grid: np.ndarray,
        values: np.ndarray,
        se: np.ndarray | None = None,
        samples: np.ndarray | None = None,
        evaluator: Callable[[np.ndarray], np.ndarray] | None = None,
    ):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.size < 5 or grid.shape != values.shape:
            raise DomainRangeError("grid", float(grid.size), "need a 1-D grid of at least 5 points matching the values")
        if np.any(np.diff(grid) <= 0.0):
            raise DomainRangeError("grid", float(grid[0]), "grid must be strictly ascending")
        if np.any(values <= 0.0) or np.any(values > 1.0):
            raise WaveClassViolation("Wave values must lie in (0, 1].")
        if np.any(np.diff(values) < 0.0):
            raise WaveClassViolation("Wave values must be nondecreasing on the grid.")
        self.p = float(p)
        self.grid = grid
        self.values = values
        self.se = np.zeros_like(values) if se is None else np.asarray(se, dtype=float)
        self.samples = samples
        self._evaluator = evaluator

    @property
    def rate(self) -> float:
        return self.p + 1.0

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @classmethod
    def constant(cls, p: float, grid: np.ndarray) -> "WaveFunction":
        """The trivial wave ψ ≡ 1."""
        grid = np.asarray(grid, dtype=float)
        return cls(p, grid, np.ones_like(grid), evaluator=np.ones_like)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._evaluator is not None:
            return self._evaluator(x)
        return np.maximum(1.0 - self.tail(x), np.finfo(float).tiny)

    def tail(self, x) -> np.ndarray:
        """1 − ψ(x), computed without cancellation when samples are available."""
        x = np.asarray(x, dtype=float)
        if self.samples is not None:
            return _laplace_mean(x, self.samples, self.rate, complement=True)
        if self._evaluator is not None:
            return 1.0 - self._evaluator(x)
        inside = np.interp(x, self.grid, 1.0 - self.values)
        left_l = math.exp(self.rate * self.grid[0]) * (1.0 - self.values[0])
        right_l = math.exp(self.rate * self.grid[-1]) * (1.0 - self.values[-1])
        left = np.minimum(left_l * np.exp(-self.rate * x), 1.0)
        right = right_l * np.exp(-self.rate * x)
        return np.where(x < self.grid[0], left, np.where(x > self.grid[-1], right, inside))

    def covers_transition(self, low: float = 0.05, high: float = 0.999) -> bool:
        """Whether ψ(x₀) ≤ low and ψ(x_n) ≥ high, the grid proxy for class 𝒯₁."""
        return bool(self.values[0] <= low and self.values[-1] >= high)


def _laplace_mean(x: np.ndarray, samples: np.ndarray, rate: float, complement: bool = False) -> np.ndarray:
    """mean over Δ of exp(−e^(−rate·x)Δ), or of its complement, for every x."""
    flat = np.atleast_1d(x).ravel()
    out = np.empty(flat.size)
    for start in range(0, flat.size, EVALUATION_CHUNK):
        chunk = flat[start:start + EVALUATION_CHUNK]
        exponent = -np.exp(-rate * chunk)[:, None] * samples[None, :]
        terms = -np.expm1(exponent) if complement else np.exp(exponent)
        out[start:start + EVALUATION_CHUNK] = terms.mean(axis=1)
    return out.reshape(np.shape(x))


def default_grid(p: float) -> np.ndarray:
    """x ∈ [−4/(p+1), 12/(p+1)] with step 0.1/(p+1)."""
    rate = p + 1.0
    if not rate > 0.0:
        raise DomainRangeError("p", p, "the default grid needs p > -1")
    return np.linspace(-4.0 / rate, 12.0 / rate, 161)


def estimate_wave(
    delta_samples: Sequence[float] | np.ndarray,
    p: float,
    grid: np.ndarray | None = None,
    min_samples: int = MIN_DELTA_SAMPLES,
) -> WaveFunction:
    """
    Builds ψ̂ from Δ samples with pointwise standard errors.

    Raises:
        InsufficientSamplesError: On fewer than min_samples values, or a
                                  negative or non-finite Δ.
    """
    samples = np.asarray(delta_samples, dtype=float)
    if samples.size < min_samples:
        raise InsufficientSamplesError(f"Need at least {min_samples} delta samples, got {samples.size}.")
    if not np.all(np.isfinite(samples)) or np.any(samples < 0.0):
        raise InsufficientSamplesError("Delta samples must be finite and nonnegative.")
    grid = default_grid(p) if grid is None else np.asarray(grid, dtype=float)
    rate = p + 1.0

    values = _laplace_mean(grid, samples, rate)
    variance = np.zeros(grid.size)
    if samples.size > 1:
        for start in range(0, grid.size, EVALUATION_CHUNK):
            chunk = grid[start:start + EVALUATION_CHUNK]
            terms = np.exp(-np.exp(-rate * chunk)[:, None] * samples[None, :])
            variance[start:start + EVALUATION_CHUNK] = np.var(terms, axis=1, ddof=1)
    se = np.sqrt(variance / samples.size)
    logger.debug("Estimated wave at p=%r from %d samples on %d grid points", p, samples.size, grid.size)
    return WaveFunction(
        p, grid, values, se=se, samples=samples,
        evaluator=lambda x: _laplace_mean(x, samples, rate),
    )


def gumbel_wave(p: float, grid: np.ndarray | None = None) -> WaveFunction:
    """ψ(x) = exp(−e^(−(p+1)x)), the wave of Δ ≡ 1."""
    grid = default_grid(p) if grid is None else np.asarray(grid, dtype=float)
    rate = p + 1.0

    def evaluate(x: np.ndarray) -> np.ndarray:
        return np.exp(-np.exp(-rate * x))

    return WaveFunction(p, grid, evaluate(grid), evaluator=evaluate)


def translate(wave: WaveFunction, shift: float) -> WaveFunction:
    """x ↦ ψ(x − shift) on the same grid; for sampled waves Δ is scaled by e^((p+1)·shift)."""
    if wave.samples is not None:
        return estimate_wave(wave.samples * math.exp(wave.rate * shift), wave.p, wave.grid, min_samples=1)
    values = np.clip(wave(wave.grid - shift), np.finfo(float).tiny, 1.0)
    return WaveFunction(wave.p, wave.grid, values, se=np.interp(wave.grid - shift, wave.grid, wave.se))


# --- L Transform ---

@dataclass(frozen=True, eq=False)
class LTransform:
    """L_p(x) = e^((p+1)x)(1 − ψ(x)) on the grid, with the tail constant k_p."""
    grid: np.ndarray
    values: np.ndarray
    se: np.ndarray
    k: float
    critical: bool
    tail_stability: float | None = None


def l_transform(wave: WaveFunction, critical: bool = False) -> LTransform:
    """
    Tabulates L_p and estimates k_p.

    Sub-critical waves take k_p = L_p at the last grid point whose relative
    noise is below 10%. Critical waves take k_p̄ = L(x)/x there, and report
    the relative change of L(x)/x across the last quarter of the reliable
    points as tail_stability.

    Raises:
        WaveClassViolation: If L decreases by more than 2·(SE_j + SE_j+1)
                            between neighbouring grid points.
    """
    scale = np.exp(wave.rate * wave.grid)
    values = scale * wave.tail(wave.grid)
    se = scale * wave.se
    drop = values[:-1] - values[1:]
    slack = 2.0 * (se[:-1] + se[1:])
    bad = np.flatnonzero(drop > slack + 1e-12 * np.abs(values[:-1]))
    if bad.size:
        j = int(bad[0])
        raise WaveClassViolation(
            f"L_p decreases beyond noise between x={wave.grid[j]!r} and x={wave.grid[j + 1]!r}."
        )

    noise = np.divide(se, values, out=np.full_like(values, np.inf), where=values > 0.0)
    reliable = np.flatnonzero(noise < RELIABLE_NOISE) if np.any(se > 0.0) else np.arange(values.size)
    last = int(reliable[-1]) if reliable.size else values.size - 1
    if not critical:
        return LTransform(wave.grid, values, se, float(values[last]), critical=False)

    positive = reliable[wave.grid[reliable] > 0.0]
    if positive.size < 4:
        return LTransform(wave.grid, values, se, math.nan, critical=True)
    ratio = values[positive] / wave.grid[positive]
    quarter = ratio[-max(positive.size // 4, 2):]
    stability = float(abs(quarter[-1] - quarter[0]) / abs(quarter[-1])) if quarter[-1] != 0.0 else math.inf
    return LTransform(wave.grid, values, se, float(ratio[-1]), critical=True, tail_stability=stability)


# --- Travelling-Wave Operator ---

@dataclass(frozen=True)
class ResidualPoint:
    x: float
    value: float
    se: float
    truncation_bound: float


def _check_interior(wave: WaveFunction, x: float) -> None:
    h = wave.step
    if not (wave.grid[0] + 2 * h - 1e-12 <= x <= wave.grid[-1] - 2 * h + 1e-12):
        raise DomainRangeError("x", x, "must be at least two grid steps from the grid edges")


def _split_terms(wave: WaveFunction, x: float, splits: np.ndarray):
    """Values ψ(x − log sᵢ) on every split row, 1 for dropped or padded parts."""
    kept = splits >= PART_CUTOFF
    points = x - np.log(np.where(kept, splits, 1.0))
    values = np.where(kept, wave(points), 1.0)
    return kept, points, values


def fkpp_residual(wave: WaveFunction, profile: SpectralProfile, p: float, x: float, c: float) -> float:
    """
    𝒜ψ(x) with ψ′ from a central difference of one grid step.

    Raises:
        DomainRangeError: If x is within two grid steps of an edge, or p is
                          not the tilt of the wave.
    """
    if abs(p - wave.p) > 1e-12:
        raise DomainRangeError("p", p, f"the wave was built for p={wave.p!r}")
    return residual_point(wave, profile, x, c).value


def residual_point(wave: WaveFunction, profile: SpectralProfile, x: float, c: float, with_se: bool = True) -> ResidualPoint:
    """
    𝒜ψ(x) with its delta-method standard error and the bound on dropped parts.

    The standard error linearizes the operator in ψ̂ and takes the sample
    standard deviation of each Δ's influence; it is 0 for waves without
    samples.
    """
    _check_interior(wave, x)
    h = wave.step
    psi_x = float(wave(np.array([x]))[0])
    around = wave(np.array([x - h, x + h]))
    derivative = float(around[1] - around[0]) / (2.0 * h)

    def product_term(splits: np.ndarray) -> np.ndarray:
        _, _, values = _split_terms(wave, x, splits)
        return np.prod(values, axis=1) - psi_x

    def dropped(splits: np.ndarray) -> np.ndarray:
        kept = splits >= PART_CUTOFF
        points = x - np.log(np.where(kept, 1.0, np.maximum(splits, np.finfo(float).tiny)))
        return np.sum(np.where(kept | (splits <= 0.0), 0.0, wave.tail(points)), axis=1)

    value = -c * derivative + profile.integrate_splits(product_term)
    bound = profile.integrate_splits(dropped)
    se = _residual_se(wave, profile, x, c) if with_se else 0.0
    return ResidualPoint(x=float(x), value=float(value), se=se, truncation_bound=float(bound))


def _residual_se(wave: WaveFunction, profile: SpectralProfile, x: float, c: float) -> float:
    samples = wave.samples
    if samples is None:
        return 0.0
    rate = wave.rate
    h = wave.step

    def phi_j(points: np.ndarray) -> np.ndarray:
        # (..., n) per-sample contributions exp(−e^(−rate·y)Δⱼ).
        return np.exp(-np.exp(-rate * points)[..., None] * samples)

    def centred(points: np.ndarray) -> np.ndarray:
        return phi_j(points) - wave(points)[..., None]

    ends = centred(np.array([x - h, x + h]))
    influence = -c * (ends[1] - ends[0]) / (2.0 * h) - profile.gamma * centred(np.array([x]))[0]

    def linear_term(splits: np.ndarray) -> np.ndarray:
        kept, points, values = _split_terms(wave, x, splits)
        total = np.zeros((splits.shape[0], samples.size))
        for i in range(splits.shape[1]):
            others = np.prod(np.delete(values, i, axis=1), axis=1)
            contribution = centred(points[:, i]) * others[:, None]
            total += np.where(kept[:, i][:, None], contribution, 0.0)
        return total

    influence = influence + profile.integrate_splits(linear_term)
    return float(np.std(influence, ddof=1) / math.sqrt(samples.size))


def central_half(wave: WaveFunction) -> np.ndarray:
    """Grid points of the central half of the grid (excluding two steps at each edge)."""
    n = wave.grid.size
    points = wave.grid[n // 4: n - n // 4]
    h = wave.step
    return points[(points >= wave.grid[0] + 2 * h) & (points <= wave.grid[-1] - 2 * h)]


def residual_profile(
    wave: WaveFunction,
    profile: SpectralProfile,
    c: float,
    xs: Sequence[float] | None = None,
    with_se: bool = True,
) -> list[ResidualPoint]:
    """Residual points over xs (default: the central half of the grid)."""
    points = central_half(wave) if xs is None else xs
    return [residual_point(wave, profile, float(x), c, with_se) for x in points]


def residual_ratio(wave: WaveFunction, profile: SpectralProfile, matched: float, wrong: float, xs: Sequence[float] | None = None) -> float:
    """max |𝒜ψ| at the wrong speed over max |𝒜ψ| at the matched speed."""
    right = max(abs(r.value) for r in residual_profile(wave, profile, matched, xs, with_se=False))
    off = max(abs(r.value) for r in residual_profile(wave, profile, wrong, xs, with_se=False))
    return math.inf if right == 0.0 else off / right


# --- Speed Classification ---

@dataclass(frozen=True)
class SpeedClass:
    label: str
    c: float
    critical_speed: float
    p: float | None
    lower_edge: float | None


def classify_speed(profile: SpectralProfile, c: float, tol: float = 1e-9) -> SpeedClass:
    """
    Compares c with the critical speed c_p̄.

    Sub-critical speeds also report the p with c_p = c, solved on
    (max(p̲, −1), p̄). lower_edge is −∞ when p̲ ≤ −1 and None otherwise.
    """
    critical = profile.critical_speed
    lower_edge = -math.inf if profile.p_lower <= -1.0 else None
    if abs(c - critical) <= tol:
        return SpeedClass("critical", c, critical, profile.p_bar, lower_edge)
    if c > critical:
        return SpeedClass("super-critical", c, critical, None, lower_edge)

    lo = max(profile.p_lower, -1.0) + 1e-9
    hi = profile.p_bar

    def gap(p: float) -> float:
        return profile.wave_speed(p) - c

    if gap(lo) > 0.0:
        return SpeedClass("sub-critical", c, critical, None, lower_edge)
    root = optimize.brentq(gap, lo, hi, xtol=1e-13)
    return SpeedClass("sub-critical", c, critical, float(root), lower_edge)


WAVE_COLUMNS = ("x", "psi", "se", "L", "residual_at_matched_speed")


def wave_rows(wave: WaveFunction, residuals: dict[float, float] | None = None) -> list[dict]:
    """
    CSV rows of a wave; residuals maps grid points to 𝒜ψ at the matched speed.

    L is tabulated as is, without the monotonicity check of l_transform, so a
    wave that fails class 𝒯₂ can still be exported and inspected.
    """
    l_values = np.exp(wave.rate * wave.grid) * wave.tail(wave.grid)
    residuals = residuals or {}
    return [
        {
            "x": float(x),
            "psi": float(psi),
            "se": float(se),
            "L": float(l_value),
            "residual_at_matched_speed": residuals.get(float(x), math.nan),
        }
        for x, psi, se, l_value in zip(wave.grid, wave.values, wave.se, l_values)
    ]
