"""
Monte Carlo summaries shared by every experiment.

Means come with standard errors; heavy-tailed samples (critical martingale
limits) also get a median and a 5% trimmed mean.
"""

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from src.domain.models.errors import InsufficientSamplesError

TRIM_FRACTION = 0.05


@dataclass(frozen=True)
class Summary:
    n: int
    mean: float
    se: float
    median: float
    trimmed_mean: float

    def z_score(self, target: float) -> float:
        """(mean − target)/se; 0 when both the gap and the SE vanish."""
        gap = self.mean - target
        if self.se == 0.0:
            return 0.0 if gap == 0.0 else math.copysign(math.inf, gap)
        return gap / self.se

    def within(self, target: float, n_se: float = 4.0) -> bool:
        return abs(self.z_score(target)) <= n_se

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(values: Sequence[float] | np.ndarray) -> Summary:
    """
    Summarizes a Monte Carlo sample.

    Raises:
        InsufficientSamplesError: If the sample is empty or holds non-finite values.
    """
    sample = np.asarray(values, dtype=float)
    if sample.size == 0:
        raise InsufficientSamplesError("Cannot summarize an empty sample.")
    if not np.all(np.isfinite(sample)):
        raise InsufficientSamplesError("Sample contains non-finite values.")
    n = sample.size
    se = float(sample.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Summary(
        n=n,
        mean=float(sample.mean()),
        se=se,
        median=float(np.median(sample)),
        trimmed_mean=float(stats.trim_mean(sample, TRIM_FRACTION)),
    )


def difference_z_score(a: Summary, b: Summary) -> float:
    """z-score of mean(a) − mean(b) for two independent samples."""
    se = math.hypot(a.se, b.se)
    gap = a.mean - b.mean
    if se == 0.0:
        return 0.0 if gap == 0.0 else math.copysign(math.inf, gap)
    return gap / se


def ratio_estimate(numerators: np.ndarray, denominators: np.ndarray) -> tuple[float, float]:
    """
    E[N]/E[D] with its delta-method standard error.

    Raises:
        InsufficientSamplesError: On empty input or a zero denominator mean.
    """
    num = np.asarray(numerators, dtype=float)
    den = np.asarray(denominators, dtype=float)
    if num.size < 2 or num.shape != den.shape:
        raise InsufficientSamplesError("A ratio estimate needs at least two paired samples.")
    mean_den = den.mean()
    if mean_den == 0.0:
        raise InsufficientSamplesError("The denominator sample has zero mean.")
    ratio = num.mean() / mean_den
    # Linearization: the residuals N − ratio·D carry the first-order error.
    residual = num - ratio * den
    se = residual.std(ddof=1) / (math.sqrt(num.size) * abs(mean_den))
    return float(ratio), float(se)


def weighted_ks_distance(
    sample: np.ndarray,
    weights: np.ndarray,
    reference: Callable[[np.ndarray], np.ndarray] | np.ndarray,
) -> float:
    """
    Kolmogorov–Smirnov distance between a weighted sample and a reference.

    Args:
        sample: The observations.
        weights: Nonnegative weights, normalized internally.
        reference: A CDF (callable) or an unweighted reference sample.

    Returns:
        sup |F_weighted − F_reference| over the pooled jump points.
    """
    x = np.asarray(sample, dtype=float)
    w = np.asarray(weights, dtype=float)
    if x.size == 0 or x.shape != w.shape or np.any(w < 0.0) or w.sum() <= 0.0:
        raise InsufficientSamplesError("A weighted sample needs matching, nonnegative, nonzero weights.")
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order] / w.sum()
    cdf = np.cumsum(w)

    if callable(reference):
        ref_at = reference(x)
        # Both one-sided gaps at each jump of the weighted step function.
        before = np.concatenate([[0.0], cdf[:-1]])
        return float(max(np.max(np.abs(cdf - ref_at)), np.max(np.abs(before - ref_at))))

    ref = np.sort(np.asarray(reference, dtype=float))
    if ref.size == 0:
        raise InsufficientSamplesError("The reference sample is empty.")
    points = np.concatenate([x, ref])
    weighted = cdf[np.searchsorted(x, points, side="right") - 1]
    weighted = np.where(np.searchsorted(x, points, side="right") == 0, 0.0, weighted)
    empirical = np.searchsorted(ref, points, side="right") / ref.size
    return float(np.max(np.abs(weighted - empirical)))


def loglog_slope(sizes: Sequence[int], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(size)."""
    return float(np.polyfit(np.log(np.asarray(sizes, dtype=float)), np.log(np.asarray(errors, dtype=float)), 1)[0])
