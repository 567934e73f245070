"""
Unit tests for the test functionals and their antiderivatives.
"""
import math

import numpy as np
import pytest

from src.domain.models.dislocation import SpectralProfile, UniformBinary
from src.domain.models.errors import EnvelopeNotAdmissible, FragwaveError
from src.domain.models.functionals import (
    bounded_custom_grid,
    exp_eps,
    functional_from_spec,
    identity,
    indicator,
    zero,
)


@pytest.fixture
def profile() -> SpectralProfile:
    """Provides the uniform binary profile (p̲ = −2)."""
    return SpectralProfile(UniformBinary())


@pytest.mark.parametrize(
    "functional, w, expected",
    [
        (zero(), 3.0, 0.0),
        (identity(), 2.0, 2.0),
        (indicator(1.0, 2.0), 3.0, 1.0),
        (indicator(1.0, 2.0), 1.5, 0.5),
        (exp_eps(1.0), 1.0, math.e - 2.0),
    ],
)
def test_antiderivatives(functional, w, expected):
    """
    Test Case: F(w) = ∫₀^w f(u) du for the closed-form functionals.
    """
    assert float(functional.integral(w)) == pytest.approx(expected)


def test_indicator_is_right_closed():
    """
    Test Case: The indicator of (lower, upper] excludes the lower end and includes the upper one.
    """
    f = indicator(1.0, 2.0)
    np.testing.assert_array_equal(f([1.0, 1.5, 2.0, 2.5]), [0.0, 1.0, 1.0, 0.0])


def test_indicator_bounds_validated():
    """
    Test Case: Bounds must satisfy 0 ≤ lower < upper.
    """
    with pytest.raises(ValueError):
        indicator(2.0, 1.0)


def test_exp_eps_needs_positive_eps():
    """
    Test Case: exp_eps is only defined for ε > 0.
    """
    with pytest.raises(ValueError):
        exp_eps(0.0)


def test_bounded_custom_grid_matches_trapezoid():
    """
    Test Case: A tabulated functional interpolates linearly and integrates exactly.
    """
    f = bounded_custom_grid([0.0, 1.0, 2.0], [0.0, 1.0, 1.0])

    np.testing.assert_allclose(f([0.5, 1.5, 5.0]), [0.5, 1.0, 1.0])
    assert float(f.integral(1.0)) == pytest.approx(0.5)
    assert float(f.integral(2.0)) == pytest.approx(1.5)
    assert float(f.integral(4.0)) == pytest.approx(3.5)
    assert f.is_bounded


def test_bounded_custom_grid_must_start_at_origin():
    """
    Test Case: The grid must begin at x = 0 with f(0) = 0.
    """
    with pytest.raises(ValueError):
        bounded_custom_grid([1.0, 2.0], [0.0, 1.0])


def test_envelope_check(profile: SpectralProfile):
    """
    Test Case: An envelope e^(εx) is admissible only when p − ε > p̲.
    """
    exp_eps(0.5).check_envelope(profile, 0.0)
    with pytest.raises(EnvelopeNotAdmissible):
        exp_eps(0.5).check_envelope(profile, -1.6)


def test_functional_from_spec():
    """
    Test Case: Config specs build the named functional with its parameters.
    """
    f = functional_from_spec({"name": "exp_eps", "eps": 0.25})
    assert f.name == "exp_eps"
    assert f.to_spec() == {"name": "exp_eps", "eps": 0.25}
    assert functional_from_spec({"name": "indicator", "lower": 1.0}).params == {"lower": 1.0}

    with pytest.raises(FragwaveError):
        functional_from_spec({"name": "cosine"})
