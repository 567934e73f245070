"""
Unit tests for the ExperimentService.

The repository is mocked; the handlers run for real on small requests so
the tests cover the dispatch, the abort handling and the tables each kind
produces.
"""
import math

import pytest
from unittest.mock import MagicMock

from src.application.services.experiment_request import (
    EXPERIMENT_KINDS,
    P_BAR_TOKEN,
    ExperimentRequest,
)
from src.application.services.experiment_service import HANDLERS, ExperimentService
from src.domain.models.dislocation import DiscreteAtoms, UniformBinary
from src.domain.models.errors import DomainRangeError, FragwaveError, RunNotFoundError
from src.domain.models.fragmentation import SimulationControls
from src.domain.models.report import RunReport
from src.domain.models.run_record import RunRecord
from src.domain.ports.run_repository import IRunRepository


@pytest.fixture
def mock_repo() -> MagicMock:
    """Provides a MagicMock object simulating the IRunRepository."""
    return MagicMock(spec=IRunRepository)


@pytest.fixture
def experiment_service(mock_repo: MagicMock) -> ExperimentService:
    """Provides an instance of ExperimentService with a mocked repository."""
    return ExperimentService(run_repository=mock_repo)


def uniform_request(kind: str, **kwargs) -> ExperimentRequest:
    return ExperimentRequest(kind=kind, measure=UniformBinary(), master_seed=kwargs.pop("master_seed", 7), **kwargs)


def test_every_kind_has_a_handler():
    """
    Test Case: The dispatch table covers exactly the declared experiment kinds.
    """
    assert set(HANDLERS) == set(EXPERIMENT_KINDS)


def test_unknown_kind_raises(experiment_service: ExperimentService):
    """
    Test Case: A kind without a handler raises FragwaveError.
    """
    with pytest.raises(FragwaveError):
        experiment_service.run(uniform_request("teleport"))


def test_run_exponents(experiment_service: ExperimentService):
    """
    Test Case: The exponent table covers the grid and every spectral check passes.
    """
    report = experiment_service.run(uniform_request("exponents", grid=(-1.75, 4.0, 0.25), q_values=(0.5, 1.0, 2.0)))

    assert report.passed, [c.name for c in report.checks if not c.passed]
    assert [table.name for table in report.tables] == ["exponents", "constants"]
    assert len(report.main_table.rows) == 24
    assert report.timing["workers"] == 1
    assert "wall_seconds" in report.timing


def test_run_exponents_binary_half(experiment_service: ExperimentService):
    """
    Test Case: The lattice binary-half law matches its closed-form Φ.
    """
    request = ExperimentRequest(
        kind="exponents",
        measure=DiscreteAtoms([(1.0, [0.5, 0.5])]),
        master_seed=1,
        grid=(-0.5, 3.0, 0.5),
    )
    report = experiment_service.run(request)

    assert report.passed
    assert any(check.name == "phi_closed_form" for check in report.checks)


def test_run_ladder(experiment_service: ExperimentService):
    """
    Test Case: The ladder-height identity holds at every p in (0, p̄].
    """
    report = experiment_service.run(uniform_request("ladder", p_values=(0.5, 1.0, P_BAR_TOKEN), eps=0.5))

    assert report.passed
    assert len(report.main_table.rows) == 3


def test_run_ladder_outside_range_raises(experiment_service: ExperimentService):
    """
    Test Case: A p above p̄ is a domain error, not a failed check.
    """
    with pytest.raises(DomainRangeError):
        experiment_service.run(uniform_request("ladder", p_values=(2.0,)))


def test_run_residual(experiment_service: ExperimentService):
    """
    Test Case: The constant wave has zero residual and the Gumbel wave solves the equation at p = 0.
    """
    report = experiment_service.run(uniform_request("residual", p_values=(0.0, 1.0)))

    assert report.passed
    names = {check.name for check in report.checks}
    assert "gumbel_wave_residual[p=0.0]" in names
    assert "gumbel_wave_residual[p=1.0]" in report.diagnostics


def test_run_simulate_is_reproducible(experiment_service: ExperimentService):
    """
    Test Case: The same seed gives the same trajectory rows; one row per replicate and time.
    """
    request = uniform_request("simulate", replicates=20, t_values=(1.0, 2.0))

    first = experiment_service.run(request)
    second = experiment_service.run(request)

    assert len(first.main_table.rows) == 40
    assert first.main_table.rows == second.main_table.rows
    assert first.run_id != second.run_id


def test_cap_abort_is_carried_into_the_report(experiment_service: ExperimentService):
    """
    Test Case: Exceeding the fragment cap fails the report instead of raising.
    """
    request = uniform_request(
        "simulate", replicates=2, t_values=(10.0,), controls=SimulationControls(max_fragments=5),
    )
    report = experiment_service.run(request)

    assert not report.passed
    assert report.error["code"] == "SIMULATION_CAP_EXCEEDED"
    assert "alive" in report.error["details"]


def test_run_passage_table(experiment_service: ExperimentService):
    """
    Test Case: Passages are tabulated per (p, z) with the master seed in every row.
    """
    report = experiment_service.run(uniform_request("passage", replicates=300, p_values=(1.0,), z_values=(0.0, 1.0)))

    rows = report.main_table.rows
    assert len(rows) == 600
    assert {row["seed"] for row in rows} == {7}
    assert report.diagnostics["unobserved_passages"] == 0


def test_persist_saves_record(experiment_service: ExperimentService, mock_repo: MagicMock):
    """
    Test Case: persist stores one RunRecord with the report's id and the written paths.
    """
    report = RunReport(run_id="12345678-1234-5678-1234-567812345678", kind="ladder", master_seed=1, config={})

    record = experiment_service.persist(report, ["runs/ladder-1/report.json"])

    mock_repo.save.assert_called_once()
    saved = mock_repo.save.call_args[0][0]
    assert isinstance(saved, RunRecord)
    assert saved is record
    assert str(saved.run_id) == report.run_id
    assert saved.output_paths == ["runs/ladder-1/report.json"]


def test_history_delegates_to_repository(experiment_service: ExperimentService, mock_repo: MagicMock):
    """
    Test Case: history passes its paging and kind filter to the repository.
    """
    mock_repo.find.return_value = []

    assert experiment_service.history(limit=5, offset=10, kind="wave") == []
    mock_repo.find.assert_called_once_with(limit=5, offset=10, kind="wave")


def test_get_run_returns_stored_record(experiment_service: ExperimentService, mock_repo: MagicMock):
    """
    Test Case: get_run returns the repository's record and raises RunNotFoundError when it has none.
    """
    report = RunReport(run_id="12345678-1234-5678-1234-567812345678", kind="ladder", master_seed=1, config={})
    record = RunRecord.from_report(report, [])
    mock_repo.get.return_value = record

    assert experiment_service.get_run(record.run_id) is record
    mock_repo.get.return_value = None
    with pytest.raises(RunNotFoundError):
        experiment_service.get_run(record.run_id)


def test_handler_receives_the_service_runner(mock_repo: MagicMock, mocker):
    """
    Test Case: Handlers are called with the request, a fresh report and the service's runner.
    """
    handler = mocker.MagicMock()
    mocker.patch.dict(HANDLERS, {"ladder": handler})
    service = ExperimentService(run_repository=mock_repo)
    request = uniform_request("ladder", p_values=(1.0,))

    report = service.run(request)

    handler.assert_called_once_with(request, report, service.runner)
    assert report.kind == "ladder" and report.master_seed == 7


# --- Small runs of the stochastic kinds ---

def test_run_martingale_tables(experiment_service: ExperimentService):
    """
    Test Case: One row per (run, p, t), and truncated sums for the extra x at p̄.
    """
    report = experiment_service.run(uniform_request(
        "martingale", replicates=30, p_values=(1.0, P_BAR_TOKEN), t_values=(1.0, 2.0), x_values=(2.0,),
    ))

    assert [table.name for table in report.tables] == ["martingales", "truncated_derivative"]
    assert len(report.main_table.rows) == 30 * 2 * 2
    assert all(math.isnan(row["dW"]) for row in report.main_table.rows if row["p"] == 1.0)


def test_run_line_with_frozen_fragments(experiment_service: ExperimentService):
    """
    Test Case: One row per (sweep, level), plus the frozen fragments when requested.
    """
    report = experiment_service.run(uniform_request(
        "line", replicates=20, p_values=(1.0,), z_values=(0.0, 1.0), emit_frozen=True, samples=2000,
    ))

    lines, frozen = report.tables
    assert (lines.name, frozen.name) == ("lines", "frozen")
    assert len(lines.rows) == 40
    assert sum(row["n_frozen"] for row in lines.rows) == len(frozen.rows)
    assert any(check.name == "nested_lines[p=1.0]" and check.passed for check in report.checks)


def test_run_lln_checks_q_large_error_slope(experiment_service: ExperimentService):
    """
    Test Case: For p > 0 the lln run checks that the q_large SE falls like n^(−1/2).
    """
    report = experiment_service.run(uniform_request(
        "lln", replicates=5, p_values=(1.0,), z_values=(1.0,), samples=16_000,
    ))

    slope = next(check for check in report.checks if check.name == "q_large_error_slope[p=1.0]")
    assert slope.passed
    assert sorted(report.diagnostics["q_large_errors[p=1.0]"]) == [2_000, 4_000, 8_000, 16_000]


def test_run_lln_uses_quadrature_below_zero(experiment_service: ExperimentService):
    """
    Test Case: For p ≤ 0 the renewal functional comes from quadrature.
    """
    report = experiment_service.run(uniform_request("lln", replicates=10, p_values=(0.0,), z_values=(2.0,)))

    lln, q_table = report.tables
    assert len(lln.rows) == 10
    assert q_table.rows[0]["method"] == "quadrature"
    assert q_table.rows[0]["value"] == pytest.approx(0.5)


def test_run_speed_tables(experiment_service: ExperimentService):
    """
    Test Case: One slope per run and one classification per configured speed plus the estimate.
    """
    report = experiment_service.run(uniform_request("speed", replicates=5, window=(1.0, 3.0), c_values=(0.1,)))

    speeds, classes = report.tables
    assert len(speeds.rows) == 5
    assert [row["c"] for row in classes.rows][0] == 0.1
    assert len(classes.rows) == 2
    assert report.diagnostics["log_correction"] > 0.0


def test_run_many_to_one_tables(experiment_service: ExperimentService):
    """
    Test Case: One tree value per (run, p, t, g), plus the Laplace table.
    """
    report = experiment_service.run(uniform_request(
        "many_to_one", replicates=20, p_values=(1.0,), t_values=(1.0,), samples=500, q_values=(0.5,),
    ))

    many_to_one, laplace = report.tables
    assert len(many_to_one.rows) == 20 * 2
    assert {row["g"] for row in many_to_one.rows} == {"one", "identity"}
    assert len(laplace.rows) == 1


def test_run_wave_tables(experiment_service: ExperimentService):
    """
    Test Case: Δ samples and the wave table are emitted for every p.
    """
    report = experiment_service.run(uniform_request("wave", replicates=1000, p_values=(1.0,), horizon=2.0))

    assert [table.name for table in report.tables] == ["wave_deltas", "wave[p=1.0]"]
    assert len(report.main_table.rows) == 1000
    assert any(check.name == "L_monotone[p=1.0]" for check in report.checks)
    assert "horizon_drift_se[p=1.0]" in report.diagnostics
    assert "horizon_adequate[p=1.0]" in report.diagnostics
    assert not any(check.name.startswith("horizon_diagnostic") for check in report.checks)
