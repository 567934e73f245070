"""
Defines the Pydantic schemas of the command line.

ExperimentConfig validates one JSON experiment document and converts it into
the application's ExperimentRequest; validation errors keep their field paths.
The error schemas give every failure the same JSON shape on stderr.
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Any, Literal
from uuid import UUID

from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, model_validator

from src.application.services.experiment_request import ExperimentRequest, Tolerances
from src.domain.models.dislocation import DislocationMeasure, measure_from_spec
from src.domain.models.fragmentation import SimulationControls

ExperimentKind = Literal[
    "exponents", "simulate", "martingale", "line", "lln", "wave",
    "residual", "speed", "many_to_one", "passage", "ladder",
]

# Parameters each kind cannot run without.
REQUIRED_PARAMETERS: dict[str, tuple[str, ...]] = {
    "exponents": (),
    "simulate": ("t_values",),
    "martingale": ("p_values", "t_values"),
    "line": ("p_values", "z_values"),
    "lln": ("p_values", "z_values"),
    "wave": ("p_values", "horizon"),
    "residual": ("p_values",),
    "speed": ("window",),
    "many_to_one": ("p_values", "t_values"),
    "passage": ("p_values", "z_values"),
    "ladder": ("p_values",),
}

MAX_SEED = 2**64 - 1


# --- Schemas for Experiment Configs ---

class MeasureSpec(BaseModel):
    """The dislocation measure: uniform_binary, or discrete_atoms with [weight, ratios] pairs."""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["uniform_binary", "discrete_atoms"]
    atoms: list[tuple[PositiveFloat, list[float]]] | None = None

    @model_validator(mode="after")
    def _atoms_match_kind(self) -> "MeasureSpec":
        if self.kind == "discrete_atoms" and not self.atoms:
            raise ValueError("discrete_atoms needs a non-empty 'atoms' list.")
        if self.kind == "uniform_binary" and self.atoms:
            raise ValueError("uniform_binary takes no 'atoms'.")
        return self

    def build(self) -> DislocationMeasure:
        """Raises InvalidMeasureError when the atoms are not conservative splits."""
        return measure_from_spec(self.model_dump(exclude_none=True))

    @classmethod
    def parse_cli(cls, value: str) -> "MeasureSpec":
        """
        Reads --measure: a kind name, an inline JSON object or a path to a JSON file.
        """
        text = value.strip()
        if text.startswith("{"):
            return cls.model_validate_json(text)
        path = Path(text)
        if path.suffix == ".json":
            return cls.model_validate_json(path.read_text(encoding="utf-8"))
        return cls(kind=text)


class FunctionalSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Literal["zero", "identity", "indicator", "exp_eps", "bounded_custom_grid"]
    lower: NonNegativeFloat | None = None
    upper: PositiveFloat | None = None
    eps: PositiveFloat | None = None
    xs: list[float] | None = None
    ys: list[float] | None = None

    @model_validator(mode="after")
    def _parameters_present(self) -> "FunctionalSpec":
        if self.name == "exp_eps" and self.eps is None:
            raise ValueError("exp_eps needs 'eps'.")
        if self.name == "bounded_custom_grid" and (self.xs is None or self.ys is None):
            raise ValueError("bounded_custom_grid needs 'xs' and 'ys'.")
        return self


class GridSpec(BaseModel):
    """An arithmetic grid start, start + step, ... up to stop inclusive."""
    model_config = ConfigDict(extra="forbid")

    start: float
    stop: float
    step: PositiveFloat

    @model_validator(mode="after")
    def _ordered(self) -> "GridSpec":
        if self.stop < self.start:
            raise ValueError("grid 'stop' must not be below 'start'.")
        return self

    @classmethod
    def parse_cli(cls, value: str) -> "GridSpec":
        """Reads the a:b:step form of --p-grid."""
        parts = value.split(":")
        if len(parts) != 3:
            raise ValueError(f"A grid is written start:stop:step, got {value!r}.")
        start, stop, step = (float(part) for part in parts)
        return cls(start=start, stop=stop, step=step)


class ToleranceSpec(BaseModel):
    """Overrides of the declared tolerances; omitted fields keep their defaults."""
    model_config = ConfigDict(extra="forbid")

    n_se: PositiveFloat = Tolerances.n_se
    absolute: PositiveFloat = Tolerances.absolute
    relative: PositiveFloat = Tolerances.relative
    ks_max: PositiveFloat = Tolerances.ks_max
    residual_abs: PositiveFloat = Tolerances.residual_abs
    exact_residual: PositiveFloat = Tolerances.exact_residual
    wrong_speed_ratio: PositiveFloat = Tolerances.wrong_speed_ratio
    tail_stability: PositiveFloat = Tolerances.tail_stability
    horizon_diagnostic: PositiveFloat = Tolerances.horizon_diagnostic
    ladder_gap: PositiveFloat = Tolerances.ladder_gap


class ExperimentConfig(BaseModel):
    """
    Schema for one experiment document.

    Every parameter a kind needs must be present; the rest keep defaults.
    """
    model_config = ConfigDict(extra="forbid")

    kind: ExperimentKind
    measure: MeasureSpec
    master_seed: int = Field(..., ge=0, le=MAX_SEED)
    replicates: int = Field(1, ge=1)
    p_values: list[float | Literal["p_bar"]] = Field(default_factory=list)
    t_values: list[NonNegativeFloat] = Field(default_factory=list)
    z_values: list[NonNegativeFloat] = Field(default_factory=list)
    q_values: list[PositiveFloat] = Field(default_factory=lambda: [0.5, 1.0])
    c_values: list[float] = Field(default_factory=list)
    x_values: list[float] = Field(default_factory=list)
    horizon: PositiveFloat | None = None
    window: tuple[NonNegativeFloat, PositiveFloat] | None = None
    grid: GridSpec | None = None
    functional: FunctionalSpec | None = None
    g_names: list[Literal["one", "identity"]] = Field(default_factory=lambda: ["one", "identity"])
    eps: PositiveFloat = 0.5
    x_trunc: PositiveFloat = 8.0
    samples: int = Field(0, ge=0)
    product_replicates: int = Field(0, ge=0)
    time_cap: PositiveFloat = 1e4
    force_lattice: bool = False
    emit_frozen: bool = False
    quadrature_nodes: int = Field(64, ge=2, le=1024)
    max_fragments: int = Field(1_000_000, ge=1)
    size_floor: NonNegativeFloat = 1e-12
    tolerances: ToleranceSpec = Field(default_factory=ToleranceSpec)
    workers: int | None = Field(None, ge=1)
    output_path: str | None = None

    @model_validator(mode="after")
    def _parameters_for_kind(self) -> "ExperimentConfig":
        for name in REQUIRED_PARAMETERS[self.kind]:
            if not getattr(self, name):
                raise ValueError(f"kind '{self.kind}' requires '{name}'.")
        if self.kind == "exponents" and not (self.p_values or self.grid):
            raise ValueError("kind 'exponents' requires 'p_values' or 'grid'.")
        if self.window is not None and self.window[1] <= self.window[0]:
            raise ValueError("'window' must be [start, end] with end > start.")
        return self

    @classmethod
    def from_file(cls, path: Path) -> "ExperimentConfig":
        """Reads and validates a JSON config; OSError carries the path."""
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        """A copy with master_seed overridden, validated again."""
        if seed is None:
            return self
        return self.model_validate({**self.model_dump(), "master_seed": seed})

    def to_request(self) -> ExperimentRequest:
        """
        Builds the application request.

        Raises:
            InvalidMeasureError: If the measure atoms are not valid splits.
        """
        return ExperimentRequest(
            kind=self.kind,
            measure=self.measure.build(),
            master_seed=self.master_seed,
            replicates=self.replicates,
            p_values=tuple(self.p_values),
            t_values=tuple(self.t_values),
            z_values=tuple(self.z_values),
            q_values=tuple(self.q_values),
            c_values=tuple(self.c_values),
            x_values=tuple(self.x_values),
            horizon=self.horizon,
            window=self.window,
            grid=(self.grid.start, self.grid.stop, self.grid.step) if self.grid else None,
            functional=self.functional.model_dump(exclude_none=True) if self.functional else None,
            g_names=tuple(self.g_names),
            eps=self.eps,
            x_trunc=self.x_trunc,
            samples=self.samples,
            product_replicates=self.product_replicates,
            time_cap=self.time_cap,
            force_lattice=self.force_lattice,
            emit_frozen=self.emit_frozen,
            quadrature_nodes=self.quadrature_nodes,
            controls=SimulationControls(max_fragments=self.max_fragments, size_floor=self.size_floor),
            tolerances=Tolerances(**self.tolerances.model_dump()),
            config=self.echo(),
        )

    def echo(self) -> dict[str, Any]:
        """The config as it is echoed into reports; runtime-only fields are left out."""
        return self.model_dump(mode="json", exclude={"workers", "output_path"})


# --- Schemas for Run History ---

class RunRecordView(BaseModel):
    """One line of `fragwave history`, read from a RunRecord."""
    run_id: UUID
    kind: str
    master_seed: int
    passed: bool
    created_at: datetime
    failed_checks: list[str]
    output_paths: list[str]

    model_config = ConfigDict(from_attributes=True)

    def to_row(self) -> dict[str, Any]:
        return {
            "run_id": str(self.run_id),
            "kind": self.kind,
            "master_seed": self.master_seed,
            "passed": self.passed,
            "created_at": self.created_at.isoformat(),
            "failed_checks": ";".join(self.failed_checks),
            "output_dir": str(Path(self.output_paths[-1]).parent) if self.output_paths else None,
        }


HISTORY_COLUMNS = ("run_id", "kind", "master_seed", "passed", "created_at", "failed_checks", "output_dir")


# --- Schemas for Standardized Error Responses ---

class ErrorDetail(BaseModel):
    """Schema for the nested 'error' object."""
    code: str
    message: str
    details: str | list[dict[str, Any]] | dict[str, Any]


class ErrorResponse(BaseModel):
    """
    Schema for a standardized error document, written as JSON to stderr.
    """
    status: str = "error"
    error: ErrorDetail

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2)

