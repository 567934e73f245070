"""
Unit tests for the command-line schemas.

These tests check that ExperimentConfig enforces the per-kind parameters and
converts into the application's ExperimentRequest.
"""
import json
import typing
from pathlib import Path

import pytest
from pydantic import ValidationError

from src.application.services.experiment_request import EXPERIMENT_KINDS, P_BAR_TOKEN
from src.domain.models.dislocation import DiscreteAtoms, UniformBinary
from src.domain.models.errors import InvalidMeasureError
from src.infrastructure.adapters.entrypoints.cli.schemas import (
    REQUIRED_PARAMETERS,
    ExperimentConfig,
    ExperimentKind,
    GridSpec,
    MeasureSpec,
)

CONFIG_DIR = Path(__file__).resolve().parents[5] / "configs"


@pytest.fixture
def martingale_config() -> dict:
    """Provides a valid martingale config document."""
    return {
        "kind": "martingale",
        "measure": {"kind": "uniform_binary"},
        "master_seed": 3,
        "replicates": 100,
        "p_values": [1.0, "p_bar"],
        "t_values": [1.0, 2.0],
    }


def test_kinds_match_the_dispatch_table():
    """
    Test Case: The schema accepts exactly the experiment kinds the service runs.
    """
    assert set(typing.get_args(ExperimentKind)) == set(EXPERIMENT_KINDS)
    assert set(REQUIRED_PARAMETERS) == set(EXPERIMENT_KINDS)


def test_valid_config_to_request(martingale_config: dict):
    """
    Test Case: A valid document builds a request with the measure, grids and config echo.
    """
    request = ExperimentConfig.model_validate(martingale_config).to_request()

    assert isinstance(request.measure, UniformBinary)
    assert request.p_values == (1.0, P_BAR_TOKEN)
    assert request.t_values == (1.0, 2.0)
    assert request.controls.max_fragments == 1_000_000
    assert request.config["master_seed"] == 3
    assert "workers" not in request.config


@pytest.mark.parametrize(
    "override, field",
    [
        ({"replicates": 0}, "replicates"),
        ({"master_seed": -1}, "master_seed"),
        ({"master_seed": 2**64}, "master_seed"),
        ({"t_values": [-1.0]}, "t_values.0"),
        ({"unknown": 1}, "unknown"),
        ({"kind": "teleport"}, "kind"),
    ],
)
def test_invalid_fields(martingale_config: dict, override: dict, field: str):
    """
    Test Case: Out-of-range or unknown fields fail validation at their path.
    """
    with pytest.raises(ValidationError) as info:
        ExperimentConfig.model_validate({**martingale_config, **override})

    locations = [".".join(str(part) for part in error["loc"]) for error in info.value.errors()]
    assert field in locations


def test_missing_kind_parameters(martingale_config: dict):
    """
    Test Case: A kind without the parameters it needs is rejected.
    """
    del martingale_config["t_values"]
    with pytest.raises(ValidationError, match="requires 't_values'"):
        ExperimentConfig.model_validate(martingale_config)

    with pytest.raises(ValidationError, match="requires 'p_values' or 'grid'"):
        ExperimentConfig.model_validate({"kind": "exponents", "measure": {"kind": "uniform_binary"}, "master_seed": 1})


def test_window_must_be_ordered():
    """
    Test Case: A speed window must end after it starts.
    """
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({
            "kind": "speed", "measure": {"kind": "uniform_binary"}, "master_seed": 1, "window": [5.0, 2.0],
        })


def test_with_seed_overrides(martingale_config: dict):
    """
    Test Case: --seed replaces master_seed and keeps everything else.
    """
    config = ExperimentConfig.model_validate(martingale_config)

    assert config.with_seed(None) is config
    assert config.with_seed(99).master_seed == 99
    assert config.with_seed(99).p_values == config.p_values


def test_discrete_measure_validation():
    """
    Test Case: Atoms are required for discrete_atoms and must be conservative to build.
    """
    with pytest.raises(ValidationError):
        MeasureSpec(kind="discrete_atoms")

    measure = MeasureSpec(kind="discrete_atoms", atoms=[(1.0, [0.5, 0.5])]).build()
    assert isinstance(measure, DiscreteAtoms)

    with pytest.raises(InvalidMeasureError):
        MeasureSpec(kind="discrete_atoms", atoms=[(1.0, [0.5, 0.6])]).build()


def test_measure_parse_cli(tmp_path: Path):
    """
    Test Case: --measure accepts a kind name, inline JSON or a JSON file.
    """
    spec = {"kind": "discrete_atoms", "atoms": [[1.0, [0.5, 0.5]]]}
    path = tmp_path / "measure.json"
    path.write_text(json.dumps(spec))

    assert MeasureSpec.parse_cli("uniform_binary").kind == "uniform_binary"
    assert MeasureSpec.parse_cli(json.dumps(spec)).atoms == [(1.0, [0.5, 0.5])]
    assert MeasureSpec.parse_cli(str(path)).kind == "discrete_atoms"


def test_grid_parse_cli():
    """
    Test Case: --p-grid reads start:stop:step and rejects other forms.
    """
    grid = GridSpec.parse_cli("-1.75:4:0.25")
    assert (grid.start, grid.stop, grid.step) == (-1.75, 4.0, 0.25)

    with pytest.raises(ValueError):
        GridSpec.parse_cli("0:1")
    with pytest.raises(ValidationError):
        GridSpec.parse_cli("0:1:0")


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_are_valid(path: Path):
    """
    Test Case: Every shipped experiment config validates and builds a request.
    """
    request = ExperimentConfig.from_file(path).to_request()
    assert request.kind in EXPERIMENT_KINDS
