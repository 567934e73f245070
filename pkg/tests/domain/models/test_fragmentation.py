"""
Unit tests for the event-driven fragmentation simulator and the
reconstruction of populations from a trajectory.
"""
import math

import numpy as np
import pytest

from src.domain.models.dislocation import DiscreteAtoms, SpectralProfile, UniformBinary
from src.domain.models.errors import EmptyWindowError, SimulationCapExceeded, TrajectoryRangeError
from src.domain.models.fragmentation import (
    TRAJECTORY_COLUMNS,
    SimulationControls,
    conservation_error,
    largest_fragment_speed,
    log_correction,
    min_neg_log_size_path,
    per_run_speeds,
    simulate,
    snapshot_at,
    trajectory_rows,
    truncation_bias,
)
from src.domain.models.statistics import summarize


@pytest.fixture
def measure() -> UniformBinary:
    """Provides the uniform binary measure."""
    return UniformBinary()


def test_simulate_is_deterministic(measure: UniformBinary):
    """
    Test Case: The same seed and replicate give the same trajectory; another replicate differs.
    """
    a = simulate(measure, 3.0, seed=11, replicate=2)
    b = simulate(measure, 3.0, seed=11, replicate=2)
    c = simulate(measure, 3.0, seed=11, replicate=3)

    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.event_times, b.event_times)
    assert not (a.n_fragments == c.n_fragments and np.array_equal(a.x, c.x))


def test_horizon_zero_is_the_root(measure: UniformBinary):
    """
    Test Case: A zero horizon leaves the single root fragment of unit mass.
    """
    snapshot = simulate(measure, 0.0, seed=1).final_population()

    assert snapshot.size == 1
    assert snapshot.x[0] == 0.0
    assert conservation_error(snapshot) == 0.0


@pytest.mark.parametrize("horizon", [-1.0, math.inf, math.nan])
def test_invalid_horizon_raises(measure: UniformBinary, horizon: float):
    """
    Test Case: Negative or non-finite horizons raise TrajectoryRangeError.
    """
    with pytest.raises(TrajectoryRangeError):
        simulate(measure, horizon, seed=1)


def test_mass_is_conserved(measure: UniformBinary):
    """
    Test Case: Σ e^(−x) over the alive population stays 1 at every time.
    """
    trajectory = simulate(measure, 4.0, seed=5)
    for t in [0.0, 0.5, 1.0, 2.0, 4.0]:
        assert conservation_error(snapshot_at(trajectory, t)) <= 1e-9


def test_size_floor_moves_mass_to_dropped(measure: UniformBinary):
    """
    Test Case: Retired fragments leave the population but their mass is counted as dropped.
    """
    trajectory = simulate(measure, 6.0, seed=3, controls=SimulationControls(size_floor=0.05))
    snapshot = trajectory.final_population()

    assert snapshot.dropped_mass > 0.0
    assert trajectory.dropped_mass == pytest.approx(snapshot.dropped_mass)
    assert conservation_error(snapshot) <= 1e-9
    assert np.all(snapshot.x <= -math.log(0.05))


def test_fragment_cap_aborts_with_diagnostics(measure: UniformBinary):
    """
    Test Case: Exceeding max_fragments raises SimulationCapExceeded with partial diagnostics.
    """
    with pytest.raises(SimulationCapExceeded) as info:
        simulate(measure, 20.0, seed=2, controls=SimulationControls(max_fragments=10))

    assert info.value.diagnostics["alive"] == 11
    assert "dropped_mass" in info.value.diagnostics


def test_binary_half_sizes_are_powers_of_two():
    """
    Test Case: Splitting into halves keeps every x on the grid k·log 2.
    """
    trajectory = simulate(DiscreteAtoms([(1.0, [0.5, 0.5])]), 3.0, seed=8)
    steps = trajectory.x / math.log(2.0)

    np.testing.assert_allclose(steps, np.round(steps), atol=1e-9)


def test_snapshot_is_sorted_and_checks_range(measure: UniformBinary):
    """
    Test Case: Snapshots list fragments by ascending x; times beyond the horizon are rejected.
    """
    trajectory = simulate(measure, 3.0, seed=4)
    snapshot = snapshot_at(trajectory, 3.0)

    assert np.all(np.diff(snapshot.x) >= 0.0)
    with pytest.raises(TrajectoryRangeError):
        snapshot_at(trajectory, 3.5)


def test_expected_population_mean():
    """
    Test Case: The mean number of fragments at t = 2 is e² within 4 standard errors.
    """
    measure = UniformBinary()
    profile = SpectralProfile(measure)
    counts = [simulate(measure, 2.0, seed=99, replicate=i).final_population().size for i in range(2000)]

    assert summarize(counts).within(profile.expected_population(2.0), 4.0)


def test_lineage_minimum_of_root_children(measure: UniformBinary):
    """
    Test Case: Children of the root record x_root − c·(split time) as their lineage minimum.
    """
    c = 0.2
    trajectory = simulate(measure, 2.0, seed=6, controls=SimulationControls(lineage_drift=c))

    assert trajectory.has_lineage
    if trajectory.n_events:
        first_split = trajectory.event_times[0]
        np.testing.assert_allclose(trajectory.lineage_min[1:3], -c * first_split)


def test_min_path_is_nondecreasing(measure: UniformBinary):
    """
    Test Case: The largest fragment only shrinks, so min x(t) never decreases.
    """
    trajectory = simulate(measure, 5.0, seed=12)
    times = np.linspace(0.0, 5.0, 40)
    path = min_neg_log_size_path(trajectory, times)

    assert path[0] == 0.0
    assert np.all(np.diff(path) >= 0.0)
    assert path[-1] == pytest.approx(trajectory.final_population().x[0])


def test_speed_window_past_horizon_raises(measure: UniformBinary):
    """
    Test Case: A regression window reaching beyond a horizon raises EmptyWindowError.
    """
    trajectory = simulate(measure, 2.0, seed=1)
    with pytest.raises(EmptyWindowError):
        largest_fragment_speed([trajectory], (1.0, 3.0))


def test_log_correction_of_uniform_binary(measure: UniformBinary):
    """
    Test Case: The log t coefficient is 3/(2(p̄+1)), with p̄ = √2 for the uniform binary measure.
    """
    assert log_correction(SpectralProfile(measure)) == pytest.approx(1.5 / (math.sqrt(2.0) + 1.0))


def test_corrected_speed_removes_log_term(measure: UniformBinary):
    """
    Test Case: The corrected slope is the raw slope minus the coefficient times the fitted slope of log t.
    """
    trajectory = simulate(measure, 4.0, seed=2)
    window = (2.0, 4.0)
    times = np.linspace(*window, 50)
    log_slope = np.polyfit(times, np.log(times), 1)[0]

    raw = per_run_speeds([trajectory], window)[0]
    corrected = per_run_speeds([trajectory], window, log_coefficient=0.6)[0]

    assert corrected == pytest.approx(raw - 0.6 * log_slope, abs=1e-9)
    with pytest.raises(EmptyWindowError):
        per_run_speeds([trajectory], (0.0, 4.0), log_coefficient=0.6)


def test_truncation_bias_without_floor_is_zero(measure: UniformBinary):
    """
    Test Case: Nothing is retired without a size floor, so the bias bound is zero.
    """
    trajectory = simulate(measure, 2.0, seed=1, controls=SimulationControls(size_floor=0.0))
    assert truncation_bias(trajectory, SpectralProfile(measure), 1.0, 2.0) == 0.0


def test_trajectory_rows(measure: UniformBinary):
    """
    Test Case: One summary row per requested time with the fixed columns.
    """
    trajectory = simulate(measure, 2.0, seed=1)
    rows = trajectory_rows(trajectory, run_id=7, times=[1.0, 2.0])

    assert [row["t"] for row in rows] == [1.0, 2.0]
    assert all(tuple(row) == TRAJECTORY_COLUMNS for row in rows)
    assert rows[0]["run_id"] == 7 and rows[0]["seed"] == 1
