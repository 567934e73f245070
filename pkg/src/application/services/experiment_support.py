"""
Small helpers shared by the experiment handlers: check naming, the g
functions of the many-to-one identity and the closed forms known for the
two reference measures.
"""

import math
from typing import Callable

import numpy as np

from src.domain.models.dislocation import DiscreteAtoms, SpectralProfile, UniformBinary
from src.domain.models.errors import FragwaveError

G_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "one": np.ones_like,
    "identity": np.asarray,
}


def g_function(name: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        return G_FUNCTIONS[name]
    except KeyError:
        raise FragwaveError(f"Unknown g function {name!r}; expected one of {sorted(G_FUNCTIONS)}.") from None


def cell(name: str, **params: float | str) -> str:
    """A check name tagged with its parameter cell, e.g. W_mean[p=1.0,t=2.0]."""
    inner = ",".join(f"{key}={value!r}" for key, value in params.items())
    return f"{name}[{inner}]"


def is_uniform_binary(profile: SpectralProfile) -> bool:
    return isinstance(profile.measure, UniformBinary)


def closed_form_phi(profile: SpectralProfile) -> Callable[[float], float] | None:
    """
    Φ in closed form when one is known.

    UniformBinary has Φ(q) = q/(q+2). A single atom of weight w splitting into
    k equal parts has Φ(q) = w(1 − k^(−q)) (the binary-half law for k = 2).
    """
    measure = profile.measure
    if isinstance(measure, UniformBinary):
        return lambda q: q / (q + 2.0)
    if isinstance(measure, DiscreteAtoms) and len(measure.atoms) == 1:
        atom = measure.atoms[0]
        k = len(atom.ratios)
        if all(abs(r - 1.0 / k) <= 1e-15 for r in atom.ratios):
            return lambda q: atom.weight * (1.0 - k ** (-q))
    return None


# UniformBinary reference values.
UNIFORM_P_BAR = math.sqrt(2.0)
UNIFORM_CRITICAL_SPEED = 3.0 - 2.0 * math.sqrt(2.0)
