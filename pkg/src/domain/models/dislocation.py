"""
Defines dislocation measures and the deterministic spectral quantities
derived from them.

A dislocation measure ν is the rate at which a fragment splits into relative
sizes s₁ ≥ s₂ ≥ ... summing to one. Two families are supported: finitely
many discrete atoms, and the uniform binary law (s₁ uniform on (1/2, 1),
s₂ = 1 − s₁, total mass 1). Everything else in the package (simulation,
martingales, waves) reads ν through a SpectralProfile.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from src.domain.models.errors import (
    DomainRangeError,
    InvalidMeasureError,
    RootNotBracketedError,
)

logger = logging.getLogger(__name__)

CONSERVATION_TOLERANCE = 1e-12
DEFAULT_QUADRATURE_NODES = 64
P_BAR_WINDOW = (1e-6, 50.0)
ROOT_TOLERANCE = 1e-12


# --- Dislocation Measures ---

@dataclass(frozen=True)
class Atom:
    """One atom of a discrete dislocation measure: a rate and a split."""
    weight: float
    ratios: tuple[float, ...]


class DislocationMeasure:
    """
    Common interface of the finite, conservative dislocation measures.

    Subclasses know how to integrate functions of the split against ν and how
    to draw a split from the normalized law γ⁻¹ν.
    """

    kind: str = ""

    @property
    def total_mass(self) -> float:
        """γ = ν(∇₁), the rate of the exponential clocks."""
        raise NotImplementedError

    @property
    def p_lower(self) -> float:
        """p̲, the infimum of p for which Σ_{i≥2} sᵢ^(p+1) is ν-integrable."""
        raise NotImplementedError

    @property
    def mean_part_count(self) -> float:
        """Average number of parts of a split under γ⁻¹ν."""
        raise NotImplementedError

    def sample_ratios(self, rng: np.random.Generator) -> np.ndarray:
        """Draws one split (descending ratios) from γ⁻¹ν."""
        raise NotImplementedError

    def sample_split_matrix(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draws n splits at once as rows of an (n, max parts) array padded with zeros."""
        raise NotImplementedError

    def to_spec(self) -> dict:
        """Renders the measure in the config-file format."""
        raise NotImplementedError


class DiscreteAtoms(DislocationMeasure):
    """A finite sum of weighted Dirac masses on conservative splits."""

    kind = "discrete_atoms"

    def __init__(self, atoms: Sequence[tuple[float, Sequence[float]]]):
        if not atoms:
            raise InvalidMeasureError("A discrete measure needs at least one atom.")

        cleaned: list[Atom] = []
        for weight, ratios in atoms:
            weight = float(weight)
            if not math.isfinite(weight) or weight <= 0:
                raise InvalidMeasureError(f"Atom weights must be positive and finite, got {weight!r}.")
            values = sorted((float(r) for r in ratios), reverse=True)
            if len(values) < 2:
                raise InvalidMeasureError("Every split must have at least two parts.")
            if any(not (0.0 < r <= 1.0) for r in values):
                raise InvalidMeasureError(f"Ratios must lie in (0, 1], got {values!r}.")
            total = math.fsum(values)
            if abs(total - 1.0) > CONSERVATION_TOLERANCE:
                raise InvalidMeasureError(
                    f"Ratios must sum to 1 (conservative measure), got sum {total!r}."
                )
            cleaned.append(Atom(weight, tuple(r / total for r in values)))

        self.atoms: tuple[Atom, ...] = tuple(cleaned)
        self._weights = np.array([a.weight for a in self.atoms])
        self._gamma = math.fsum(a.weight for a in self.atoms)
        width = max(len(a.ratios) for a in self.atoms)
        self._split_matrix = np.array([a.ratios + (0.0,) * (width - len(a.ratios)) for a in self.atoms])

        integrability = math.fsum(a.weight * (1.0 - a.ratios[0]) for a in self.atoms)
        if not math.isfinite(integrability):
            raise InvalidMeasureError("∫(1 − s₁)ν(ds) must be finite.")

    @property
    def total_mass(self) -> float:
        return self._gamma

    @property
    def p_lower(self) -> float:
        return -math.inf

    @property
    def mean_part_count(self) -> float:
        return math.fsum(a.weight * len(a.ratios) for a in self.atoms) / self._gamma

    def sample_ratios(self, rng: np.random.Generator) -> np.ndarray:
        if len(self.atoms) == 1:
            return np.asarray(self.atoms[0].ratios)
        index = rng.choice(len(self.atoms), p=self._weights / self._gamma)
        return np.asarray(self.atoms[index].ratios)

    def sample_split_matrix(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if len(self.atoms) == 1:
            return np.repeat(self._split_matrix, n, axis=0)
        index = rng.choice(len(self.atoms), size=n, p=self._weights / self._gamma)
        return self._split_matrix[index]

    def to_spec(self) -> dict:
        return {"kind": self.kind, "atoms": [[a.weight, list(a.ratios)] for a in self.atoms]}

    def __repr__(self) -> str:
        return f"DiscreteAtoms({[(a.weight, a.ratios) for a in self.atoms]!r})"


class UniformBinary(DislocationMeasure):
    """Binary splits with s₁ uniform on (1/2, 1) and total mass one."""

    kind = "uniform_binary"

    @property
    def total_mass(self) -> float:
        return 1.0

    @property
    def p_lower(self) -> float:
        # s₂ is uniform on (0, 1/2): ∫ s₂^(p+1) ds₂ diverges for p ≤ −2.
        return -2.0

    @property
    def mean_part_count(self) -> float:
        return 2.0

    def sample_ratios(self, rng: np.random.Generator) -> np.ndarray:
        s1 = rng.uniform(0.5, 1.0)
        return np.array([s1, 1.0 - s1])

    def sample_split_matrix(self, rng: np.random.Generator, n: int) -> np.ndarray:
        s1 = rng.uniform(0.5, 1.0, n)
        return np.column_stack([s1, 1.0 - s1])

    def to_spec(self) -> dict:
        return {"kind": self.kind}

    def __repr__(self) -> str:
        return "UniformBinary()"


def measure_from_spec(spec: dict) -> DislocationMeasure:
    """
    Builds a measure from its config-file representation.

    Args:
        spec: Either {"kind": "uniform_binary"} or
              {"kind": "discrete_atoms", "atoms": [[weight, [s1, s2, ...]], ...]}.

    Returns:
        The corresponding DislocationMeasure.

    Raises:
        InvalidMeasureError: If the kind is unknown or the atoms are invalid.
    """
    kind = spec.get("kind")
    if kind == UniformBinary.kind:
        return UniformBinary()
    if kind == DiscreteAtoms.kind:
        return DiscreteAtoms([(w, r) for w, r in spec.get("atoms", [])])
    raise InvalidMeasureError(f"Unknown measure kind {kind!r}.")


# --- Jump Laws ---

@dataclass(frozen=True, eq=False)
class JumpLaw:
    """
    The Lévy measure m^(p)(dx) = e^(−px) m(dx) of the tagged fragment under ℙ^(p).

    Either a finite set of atoms (sizes, rates) or the exponential density
    coefficient·e^(−decay·x) on (0, ∞).
    """
    p: float
    total_rate: float
    sizes: np.ndarray | None = None
    rates: np.ndarray | None = None
    coefficient: float | None = None
    decay: float | None = None
    laguerre_nodes: int = DEFAULT_QUADRATURE_NODES

    @property
    def is_atomic(self) -> bool:
        return self.sizes is not None

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draws jump sizes from the normalized law m^(p)/total_rate."""
        if self.is_atomic:
            if len(self.sizes) == 1:
                return np.full(size, self.sizes[0])
            return rng.choice(self.sizes, size=size, p=self.rates / self.total_rate)
        # Inverse CDF of the exponential density.
        return -np.log1p(-rng.random(size)) / self.decay

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray], with_error: bool = False):
        """
        Computes ∫ fn(x) m^(p)(dx).

        Atoms are summed exactly. The density is integrated by Gauss–Laguerre
        quadrature in the scaled variable decay·x; the error estimate is the
        difference with the half-order rule.
        """
        if self.is_atomic:
            value = float(np.sum(self.rates * fn(self.sizes)))
            return (value, 0.0) if with_error else value

        def rule(n: int) -> float:
            nodes, weights = np.polynomial.laguerre.laggauss(n)
            return self.coefficient / self.decay * float(np.sum(weights * fn(nodes / self.decay)))

        value = rule(self.laguerre_nodes)
        if not with_error:
            return value
        return value, abs(value - rule(max(self.laguerre_nodes // 2, 2)))

    def laplace_exponent(self, q: float) -> float:
        """∫(1 − e^(−qx)) m^(p)(dx), which equals Φ(p+q) − Φ(p)."""
        return self.integrate(lambda x: -np.expm1(-q * x))

    def mean(self) -> float:
        """∫ x m^(p)(dx), which equals Φ′(p)."""
        return self.integrate(lambda x: x)

    def tail(self, x: float) -> float:
        """m^(p)((x, ∞))."""
        if self.is_atomic:
            return float(np.sum(self.rates[self.sizes > x]))
        return self.coefficient / self.decay * math.exp(-self.decay * max(x, 0.0))

    def log_tail(self, x: float) -> float:
        """log m^(p)((x, ∞)) for the density law; −∞ once the tail is empty."""
        if self.is_atomic:
            tail = self.tail(x)
            return math.log(tail) if tail > 0.0 else -math.inf
        return math.log(self.coefficient / self.decay) - self.decay * max(x, 0.0)


# --- Spectral Profile ---

class SpectralProfile:
    """
    Cached spectral quantities of one dislocation measure.

    Holds Φ, Φ′, p̲, p̄, the wave speeds c_p and the jump laws m^(p). Values
    are immutable once computed, so a profile can be shared read-only.
    """

    def __init__(self, measure: DislocationMeasure, quadrature_nodes: int = DEFAULT_QUADRATURE_NODES):
        if quadrature_nodes < 2:
            raise ValueError("quadrature_nodes must be at least 2.")
        self.measure = measure
        self.quadrature_nodes = int(quadrature_nodes)
        self._legendre = np.polynomial.legendre.leggauss(self.quadrature_nodes)
        self._laguerre = np.polynomial.laguerre.laggauss(self.quadrature_nodes)

    @property
    def p_lower(self) -> float:
        return self.measure.p_lower

    @property
    def gamma(self) -> float:
        return self.measure.total_mass

    def _check_domain(self, q: float, name: str = "q") -> None:
        if not q > self.p_lower:
            raise DomainRangeError(name, q, f"must exceed p_lower={self.p_lower!r}")

    # --- Integrals against ν ---

    def part_moment(self, q: float, log_power: int = 0) -> float:
        """
        ∫ Σᵢ sᵢ^(q+1) (−log sᵢ)^k ν(ds) for k = log_power.

        For UniformBinary both parts together have density 2 on (0, 1), so the
        integral is 2∫₀^∞ e^(−(q+2)v) v^k dv, evaluated by Gauss–Laguerre in
        the scaled variable (exact for these integrands, even for q < −1).
        """
        self._check_domain(q)
        measure = self.measure
        if isinstance(measure, DiscreteAtoms):
            total = 0.0
            for atom in measure.atoms:
                s = np.asarray(atom.ratios)
                total += atom.weight * float(np.sum(s ** (q + 1) * (-np.log(s)) ** log_power))
            return total
        rate = q + 2.0
        nodes, weights = self._laguerre
        v = nodes / rate
        return 2.0 / rate * float(np.sum(weights * v ** log_power))

    def integrate_splits(self, fn: Callable[[np.ndarray], np.ndarray]) -> float | np.ndarray:
        """
        ∫ fn(s) ν(ds) for a function of a whole split.

        fn receives a 2-D array whose rows are splits and returns one value
        (or one vector of values) per row. For DiscreteAtoms each atom is
        passed as a single row and the sum is exact. For UniformBinary the
        rows are (s₁, 1 − s₁) at the Gauss–Legendre nodes of (1/2, 1).
        """
        measure = self.measure
        if isinstance(measure, DiscreteAtoms):
            total = sum(
                atom.weight * np.asarray(fn(np.asarray(atom.ratios)[None, :]), dtype=float)[0]
                for atom in measure.atoms
            )
        else:
            nodes, weights = self._legendre
            s1 = 0.75 + 0.25 * nodes
            splits = np.column_stack([s1, 1.0 - s1])
            # density 2 on an interval of length 1/2: the affine map contributes 1/4.
            total = np.tensordot(0.5 * weights, np.asarray(fn(splits), dtype=float), axes=(0, 0))
        return float(total) if np.ndim(total) == 0 else np.asarray(total)

    # --- Spectral Functions ---

    def phi(self, q: float) -> float:
        """Φ(q) = ∫(1 − Σᵢ sᵢ^(q+1)) ν(ds)."""
        self._check_domain(q)
        return self.gamma - self.part_moment(q)

    def phi_prime(self, q: float) -> float:
        """Φ′(q) = ∫ Σᵢ sᵢ^(q+1)(−log sᵢ) ν(ds)."""
        self._check_domain(q)
        return self.part_moment(q, log_power=1)

    def phi_second(self, q: float) -> float:
        """Φ″(q) = −∫ Σᵢ sᵢ^(q+1)(log sᵢ)² ν(ds)."""
        self._check_domain(q)
        return -self.part_moment(q, log_power=2)

    @cached_property
    def p_bar(self) -> float:
        """The unique root p̄ in (0, ∞) of (p+1)Φ′(p) − Φ(p) = 0."""
        lo, hi = P_BAR_WINDOW

        def excess(p: float) -> float:
            return (p + 1.0) * self.phi_prime(p) - self.phi(p)

        f_lo, f_hi = excess(lo), excess(hi)
        if not (f_lo > 0.0 > f_hi):
            raise RootNotBracketedError("(p+1)Φ′(p) − Φ(p)", P_BAR_WINDOW)
        root = optimize.brentq(excess, lo, hi, xtol=ROOT_TOLERANCE, rtol=4 * np.finfo(float).eps)
        logger.debug("p_bar=%r for %r", root, self.measure)
        return float(root)

    def wave_speed(self, p: float) -> float:
        """c_p = Φ(p)/(p+1)."""
        self._check_domain(p, "p")
        if p == -1.0:
            raise DomainRangeError("p", p, "p = -1 has no wave speed")
        return self.phi(p) / (p + 1.0)

    @property
    def critical_speed(self) -> float:
        """c_p̄, the maximal wave speed (equal to Φ′(p̄))."""
        return self.wave_speed(self.p_bar)

    def is_critical(self, p: float, tol: float = 1e-9) -> bool:
        return abs(p - self.p_bar) <= tol

    def jump_law(self, p: float) -> JumpLaw:
        """
        The Lévy measure m^(p) of the tagged fragment under ℙ^(p).

        DiscreteAtoms give atoms at −log sᵢⱼ with rates weightᵢ·sᵢⱼ^(p+1),
        aggregated over identical sizes; UniformBinary gives the density
        2e^(−(p+2)x).
        """
        self._check_domain(p, "p")
        measure = self.measure
        if isinstance(measure, DiscreteAtoms):
            rates: dict[float, float] = {}
            for atom in measure.atoms:
                for s in atom.ratios:
                    size = -math.log(s)
                    rates[size] = rates.get(size, 0.0) + atom.weight * s ** (p + 1.0)
            sizes = np.array(sorted(rates))
            values = np.array([rates[s] for s in sorted(rates)])
            return JumpLaw(p=p, total_rate=float(values.sum()), sizes=sizes, rates=values)
        decay = p + 2.0
        return JumpLaw(
            p=p,
            total_rate=2.0 / decay,
            coefficient=2.0,
            decay=decay,
            laguerre_nodes=self.quadrature_nodes,
        )

    def eta_root(self, p: float) -> float:
        """
        Largest root in [0, ∞) of c_p·θ − Φ(θ+p) + Φ(p) = 0.

        The function is convex in θ (Φ is concave), vanishes at 0 and has
        slope c_p − Φ′(p) ≤ 0 there for p ≤ p̄. When the slope is negative it
        dips below zero and climbs back; that second root is found by
        scanning upward and bracketing.
        """
        if not 0.0 < p <= self.p_bar + 1e-12:
            raise DomainRangeError("p", p, f"must lie in (0, p_bar={self.p_bar!r}]")
        c = self.wave_speed(p)
        phi_p = self.phi(p)

        def g(theta: float) -> float:
            return c * theta - self.phi(theta + p) + phi_p

        if self.is_critical(p, 1e-10):
            return 0.0
        # g < 0 just right of 0 when the tilted drift Φ′(p) − c_p > 0.
        step = 0.25
        lo = 1e-9
        hi = lo + step
        while g(hi) < 0.0:
            lo, hi = hi, hi + step
            step *= 1.5
            if hi > 1e6:
                logger.warning("eta_root scan left (0, 1e6) at p=%r; returning 0", p)
                return 0.0
        return float(optimize.brentq(g, lo, hi, xtol=ROOT_TOLERANCE))

    def is_lattice(self, p: float = 0.0, tol: float = 1e-9, max_denominator: int = 1000) -> bool:
        """
        Whether the jump law is supported on a common arithmetic grid.

        All jump sizes must be rational multiples (denominator ≤
        max_denominator) of the smallest one within tol.
        """
        law = self.jump_law(p)
        if not law.is_atomic:
            return False
        base = law.sizes[0]
        for size in law.sizes[1:]:
            ratio = size / base
            approx = Fraction(ratio).limit_denominator(max_denominator)
            if abs(float(approx) - ratio) > tol:
                return False
        return True

    def expected_population(self, t: float) -> float:
        """E[number of fragments at time t] = exp(γ(k̄ − 1)t)."""
        return math.exp(self.gamma * (self.measure.mean_part_count - 1.0) * t)
