"""
Defines the domain exceptions raised by the numerical core.

Every error subclasses ValueError so callers that only care about
"bad input or impossible request" can catch a single type, while the
command-line entrypoint maps them to a standardized error document.
"""

from typing import Any


# --- Custom Domain Exceptions ---

class FragwaveError(ValueError):
    """Base class for all domain rule violations."""

    def __init__(self, message: str = "Domain rule violation."):
        self.message = message
        super().__init__(self.message)


class InvalidMeasureError(FragwaveError):
    """Raised when a dislocation measure violates conservation or finiteness."""


class DomainRangeError(FragwaveError):
    """Raised when an argument lies outside the admissible range of an operation."""

    def __init__(self, name: str, value: float, bound: str):
        self.name = name
        self.value = value
        self.bound = bound
        super().__init__(f"{name}={value!r} is outside the admissible range ({bound}).")


class RootNotBracketedError(FragwaveError):
    """Raised when a root search finds no sign change inside its window."""

    def __init__(self, what: str, window: tuple[float, float]):
        self.window = window
        super().__init__(
            f"Could not bracket the root of {what} inside the window "
            f"({window[0]!r}, {window[1]!r})."
        )


class SimulationCapExceeded(FragwaveError):
    """Raised when a simulation or a sweep exceeds its fragment cap."""

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class TrajectoryRangeError(FragwaveError):
    """Raised when a time outside [0, horizon] is requested from a trajectory."""


class EmptyWindowError(FragwaveError):
    """Raised when a time window is empty or not covered by the trajectories."""


class LineageDataMissing(FragwaveError):
    """Raised when a trajectory was simulated without the lineage data an operation needs."""


class EnvelopeNotAdmissible(FragwaveError):
    """Raised when a test functional's growth envelope is not integrable for the profile."""


class LatticeMeasureError(FragwaveError):
    """Raised when a renewal formula is requested for a lattice jump law without forcing it."""


class InsufficientSamplesError(FragwaveError):
    """Raised when an estimator receives too few (or invalid) Monte Carlo samples."""


class WaveClassViolation(FragwaveError):
    """Raised when a tabulated wave leaves the monotone classes beyond noise."""


class RunNotFoundError(FragwaveError):
    """Raised when a stored run is looked up by an id that does not exist."""

    def __init__(self, run_id: Any):
        self.run_id = run_id
        super().__init__(f"No stored run with id {run_id}.")


class LatticeWarning(UserWarning):
    """Emitted when a renewal-based formula is forced on a lattice jump law."""
