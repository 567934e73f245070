"""
The application-level description of one experiment.

An ExperimentRequest is what the use case consumes: a built measure, the
parameter grids, controls and tolerances. The command-line schemas convert
a validated config into a request; nothing here knows about files or JSON.
"""

import math
from dataclasses import dataclass, field
from typing import Any

from src.domain.models.dislocation import DislocationMeasure, SpectralProfile
from src.domain.models.fragmentation import SimulationControls

P_BAR_TOKEN = "p_bar"

EXPERIMENT_KINDS = (
    "exponents",
    "simulate",
    "martingale",
    "line",
    "lln",
    "wave",
    "residual",
    "speed",
    "many_to_one",
    "passage",
    "ladder",
)


@dataclass(frozen=True)
class Tolerances:
    """Declared tolerances; every check cites the one it uses."""
    n_se: float = 4.0
    absolute: float = 1e-9
    relative: float = 0.05
    ks_max: float = 0.02
    residual_abs: float = 0.02
    exact_residual: float = 1e-8
    wrong_speed_ratio: float = 5.0
    tail_stability: float = 0.2
    horizon_diagnostic: float = 0.05
    ladder_gap: float = 1e-6


@dataclass(frozen=True)
class ExperimentRequest:
    kind: str
    measure: DislocationMeasure
    master_seed: int
    replicates: int = 1
    p_values: tuple[float | str, ...] = ()
    t_values: tuple[float, ...] = ()
    z_values: tuple[float, ...] = ()
    q_values: tuple[float, ...] = (0.5, 1.0)
    c_values: tuple[float, ...] = ()
    x_values: tuple[float, ...] = ()
    horizon: float | None = None
    window: tuple[float, float] | None = None
    grid: tuple[float, float, float] | None = None
    functional: dict[str, Any] | None = None
    g_names: tuple[str, ...] = ("one", "identity")
    eps: float = 0.5
    x_trunc: float = 8.0
    samples: int = 0
    product_replicates: int = 0
    time_cap: float = 1e4
    force_lattice: bool = False
    emit_frozen: bool = False
    quadrature_nodes: int = 64
    controls: SimulationControls = field(default_factory=SimulationControls)
    tolerances: Tolerances = field(default_factory=Tolerances)
    config: dict[str, Any] = field(default_factory=dict)

    def profile(self) -> SpectralProfile:
        return SpectralProfile(self.measure, self.quadrature_nodes)

    def resolved_p_values(self, profile: SpectralProfile) -> list[float]:
        """p values with the "p_bar" token replaced by the profile's p̄."""
        return [profile.p_bar if p == P_BAR_TOKEN else float(p) for p in self.p_values]

    def resolved_horizon(self) -> float:
        if self.horizon is not None:
            return self.horizon
        return max(self.t_values) if self.t_values else 0.0

    def grid_points(self) -> list[float] | None:
        if self.grid is None:
            return None
        start, stop, step = self.grid
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
