"""
Test functionals f: (0, ∞) → ℝ used by the laws of large numbers.

A functional carries its vectorized values, its antiderivative
F(w) = ∫₀^w f(u) du (the renewal formulas only ever need F) and a declared
growth envelope |f(x)| ≤ C·e^(εx). Envelopes are declared, never inferred.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from src.domain.models.errors import EnvelopeNotAdmissible, FragwaveError

# The identity grows slower than any exponential; this is the rate it declares.
IDENTITY_ENVELOPE = 1e-3

FUNCTIONAL_KINDS = ("zero", "identity", "indicator", "exp_eps", "bounded_custom_grid")


@dataclass(frozen=True, eq=False)
class TestFunctional:
    """
    A named test function with its antiderivative and growth envelope.

    Attributes:
        name: The config name of the functional.
        values: Vectorized f.
        antiderivative: Vectorized F(w) = ∫₀^w f.
        envelope_eps: ε of the envelope C·e^(εx); 0 for bounded functionals.
        params: The parameters the functional was built from (config echo).
    """
    __test__ = False

    name: str
    values: Callable[[np.ndarray], np.ndarray]
    antiderivative: Callable[[np.ndarray], np.ndarray]
    envelope_eps: float = 0.0
    params: dict = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        return self.values(np.asarray(x, dtype=float))

    def integral(self, w) -> np.ndarray:
        return self.antiderivative(np.asarray(w, dtype=float))

    @property
    def is_bounded(self) -> bool:
        return self.envelope_eps == 0.0

    def check_envelope(self, profile, p: float) -> None:
        """
        Requires |Φ(p − ε)| < ∞, i.e. p − ε > p̲.

        Raises:
            EnvelopeNotAdmissible: If the envelope reaches below p̲.
        """
        if not p - self.envelope_eps > profile.p_lower:
            raise EnvelopeNotAdmissible(
                f"Functional {self.name!r} with envelope ε={self.envelope_eps!r} needs "
                f"p - ε > p_lower={profile.p_lower!r}, got p={p!r}."
            )

    def to_spec(self) -> dict:
        return {"name": self.name, **self.params}


def zero() -> TestFunctional:
    return TestFunctional("zero", np.zeros_like, np.zeros_like)


def identity() -> TestFunctional:
    return TestFunctional(
        "identity",
        lambda x: x.copy(),
        lambda w: 0.5 * w * w,
        envelope_eps=IDENTITY_ENVELOPE,
    )


def indicator(lower: float = 0.0, upper: float = math.inf) -> TestFunctional:
    """The indicator of (lower, upper], with 0 ≤ lower < upper."""
    if not 0.0 <= lower < upper:
        raise ValueError(f"Indicator bounds must satisfy 0 <= lower < upper, got ({lower}, {upper}).")

    def values(x: np.ndarray) -> np.ndarray:
        return ((x > lower) & (x <= upper)).astype(float)

    def antiderivative(w: np.ndarray) -> np.ndarray:
        return np.clip(w, lower, upper) - lower

    params = {"lower": lower} if math.isinf(upper) else {"lower": lower, "upper": upper}
    return TestFunctional("indicator", values, antiderivative, params=params)


def exp_eps(eps: float) -> TestFunctional:
    """f(x) = e^(εx) − 1, which vanishes at 0 and has envelope rate ε."""
    if not eps > 0.0:
        raise ValueError(f"exp_eps needs eps > 0, got {eps!r}.")
    return TestFunctional(
        "exp_eps",
        lambda x: np.expm1(eps * x),
        lambda w: np.expm1(eps * w) / eps - w,
        envelope_eps=float(eps),
        params={"eps": eps},
    )


def bounded_custom_grid(xs: Sequence[float], ys: Sequence[float]) -> TestFunctional:
    """
    A tabulated bounded functional: linear between nodes, constant past the last.

    The grid must start at x = 0 with value 0.
    """
    grid = np.asarray(xs, dtype=float)
    vals = np.asarray(ys, dtype=float)
    if grid.ndim != 1 or grid.shape != vals.shape or grid.size < 2:
        raise ValueError("A custom grid needs matching 1-D arrays with at least two nodes.")
    if grid[0] != 0.0 or vals[0] != 0.0:
        raise ValueError("A custom grid must start at x=0 with f(0)=0.")
    if np.any(np.diff(grid) <= 0.0) or not np.all(np.isfinite(vals)):
        raise ValueError("Custom grid nodes must be strictly increasing and values finite.")

    slopes = np.diff(vals) / np.diff(grid)
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(grid))])

    def values(x: np.ndarray) -> np.ndarray:
        return np.interp(x, grid, vals, left=0.0, right=vals[-1])

    def antiderivative(w: np.ndarray) -> np.ndarray:
        w = np.maximum(w, 0.0)
        j = np.clip(np.searchsorted(grid, w, side="right") - 1, 0, grid.size - 2)
        inside = w <= grid[-1]
        h = w - grid[j]
        partial = cumulative[j] + vals[j] * h + 0.5 * slopes[j] * h * h
        beyond = cumulative[-1] + vals[-1] * (w - grid[-1])
        return np.where(inside, partial, beyond)

    return TestFunctional(
        "bounded_custom_grid",
        values,
        antiderivative,
        params={"xs": grid.tolist(), "ys": vals.tolist()},
    )


def functional_from_spec(spec: dict) -> TestFunctional:
    """
    Builds a functional from its config representation.

    Args:
        spec: {"name": ...} plus the parameters of that functional
              ("lower"/"upper", "eps", or "xs"/"ys").

    Raises:
        FragwaveError: If the name is unknown.
    """
    name = spec.get("name")
    if name == "zero":
        return zero()
    if name == "identity":
        return identity()
    if name == "indicator":
        return indicator(spec.get("lower", 0.0), spec.get("upper", math.inf))
    if name == "exp_eps":
        return exp_eps(spec["eps"])
    if name == "bounded_custom_grid":
        return bounded_custom_grid(spec["xs"], spec["ys"])
    raise FragwaveError(f"Unknown test functional {name!r}; expected one of {FUNCTIONAL_KINDS}.")
