"""
Deterministic experiments on the spectral profile: the exponent table and
the ladder-height identity. No randomness is involved, so these run in the
parent process.
"""

import logging
import math

import numpy as np

from src.application.services.experiment_request import ExperimentRequest
from src.application.services.experiment_support import (
    UNIFORM_CRITICAL_SPEED,
    UNIFORM_P_BAR,
    cell,
    closed_form_phi,
    is_uniform_binary,
)
from src.application.services.replicate_runner import ReplicateRunner
from src.domain.models.dislocation import SpectralProfile
from src.domain.models.report import CheckResult, RunReport, Table
from src.domain.models.spine import ladder_height_check

logger = logging.getLogger(__name__)

EXPONENT_COLUMNS = ("p", "phi", "phi_prime", "c_p", "eta")
CONSTANT_COLUMNS = ("p_lower", "p_bar", "c_p_bar", "gamma")
LADDER_COLUMNS = ("p", "eta", "eps", "lhs", "rhs", "gap", "eta_residual")

FINITE_DIFFERENCE_STEP = 1e-5
FINITE_DIFFERENCE_TOLERANCE = 1e-6
LAPLACE_CONSISTENCY_TOLERANCE = 1e-8
CLOSED_FORM_TOLERANCE = 1e-10


def exponent_grid(request: ExperimentRequest, profile: SpectralProfile) -> list[float]:
    """The p-grid of an exponent table: the config grid, else the p list."""
    points = request.grid_points()
    return points if points is not None else request.resolved_p_values(profile)


def exponent_row(profile: SpectralProfile, p: float) -> dict:
    """Φ, Φ′ and c_p at p; η only where it is defined, on (0, p̄]."""
    c_p = math.nan if p == -1.0 else profile.wave_speed(p)
    eta = profile.eta_root(p) if 0.0 < p <= profile.p_bar + 1e-12 else math.nan
    return {"p": p, "phi": profile.phi(p), "phi_prime": profile.phi_prime(p), "c_p": c_p, "eta": eta}


def constants_row(profile: SpectralProfile) -> dict:
    return {
        "p_lower": profile.p_lower,
        "p_bar": profile.p_bar,
        "c_p_bar": profile.critical_speed,
        "gamma": profile.gamma,
    }


def run_exponents(request: ExperimentRequest, report: RunReport, runner: ReplicateRunner) -> None:
    """
    Tabulates Φ, Φ′, c_p and η over a p-grid and checks the spectral identities.

    Raises:
        DomainRangeError: If a grid point is not above p̲.
    """
    profile = request.profile()
    tol = request.tolerances
    grid = exponent_grid(request, profile)

    table = report.add_table(Table("exponents", EXPONENT_COLUMNS))
    table.extend([exponent_row(profile, p) for p in grid])
    report.add_table(Table("constants", CONSTANT_COLUMNS, [constants_row(profile)]))

    p_bar = profile.p_bar
    report.add_check(CheckResult.absolute("phi_at_zero", profile.phi(0.0), 0.0, tol.absolute))
    report.add_check(CheckResult.absolute(
        "p_bar_equation", (p_bar + 1.0) * profile.phi_prime(p_bar) - profile.phi(p_bar), 0.0, tol.absolute,
    ))

    h = FINITE_DIFFERENCE_STEP
    fd_gaps = [
        abs((profile.phi(p + h) - profile.phi(p - h)) / (2.0 * h) - profile.phi_prime(p))
        for p in grid if p - h > profile.p_lower
    ]
    if fd_gaps:
        report.add_check(CheckResult.at_most("phi_prime_finite_difference", max(fd_gaps), FINITE_DIFFERENCE_TOLERANCE))

    phis = [profile.phi(p) for p in sorted(grid)]
    report.add_check(CheckResult.at_least(
        "phi_increasing", float(np.min(np.diff(phis))) if len(phis) > 1 else 0.0, 0.0,
    ))

    speed_domain = [p for p in grid if p > max(profile.p_lower, -1.0)]
    if speed_domain:
        top = max(profile.wave_speed(p) for p in speed_domain)
        report.add_check(CheckResult.at_most("c_p_below_critical", top - profile.critical_speed, tol.absolute))

    laplace_gaps = [
        abs(profile.jump_law(p).laplace_exponent(q) - (profile.phi(p + q) - profile.phi(p)))
        for p in grid
        for q in request.q_values
    ]
    if laplace_gaps:
        report.add_check(CheckResult.at_most("jump_law_laplace", max(laplace_gaps), LAPLACE_CONSISTENCY_TOLERANCE))

    exact = closed_form_phi(profile)
    if exact is not None:
        error = max(abs(profile.phi(p) - exact(p)) for p in grid)
        report.add_check(CheckResult.at_most("phi_closed_form", error, CLOSED_FORM_TOLERANCE))

    if is_uniform_binary(profile):
        report.add_check(CheckResult.absolute("p_bar_uniform", p_bar, UNIFORM_P_BAR, tol.absolute))
        report.add_check(CheckResult.absolute(
            "c_p_bar_uniform", profile.critical_speed, UNIFORM_CRITICAL_SPEED, tol.absolute,
        ))
        report.add_check(CheckResult.absolute("eta_uniform_p1", profile.eta_root(1.0), 1.0, tol.absolute))

    logger.info("Exponent table over %d points, p_bar=%r", len(grid), p_bar)


def run_ladder(request: ExperimentRequest, report: RunReport, runner: ReplicateRunner) -> None:
    """
    Checks ∫ e^(εx) m_H(dx) = [Φ(p+η) − Φ(p−ε)]/(η+ε) for every p in (0, p̄].

    Raises:
        DomainRangeError: If a p is outside (0, p̄].
        EnvelopeNotAdmissible: If p − ε ≤ p̲.
    """
    profile = request.profile()
    tol = request.tolerances
    table = report.add_table(Table("ladder", LADDER_COLUMNS))

    for p in request.resolved_p_values(profile):
        check = ladder_height_check(profile, p, request.eps)
        residual = profile.wave_speed(p) * check.eta - profile.phi(check.eta + p) + profile.phi(p)
        table.extend([{
            "p": p,
            "eta": check.eta,
            "eps": check.eps,
            "lhs": check.lhs,
            "rhs": check.rhs,
            "gap": check.gap,
            "eta_residual": residual,
        }])
        report.add_check(CheckResult.at_most(cell("ladder_gap", p=p), check.gap, tol.ladder_gap))
        report.add_check(CheckResult.absolute(cell("eta_equation", p=p), residual, 0.0, tol.absolute))
        report.diagnostics[cell("ladder_quadrature_error", p=p)] = check.lhs_error
        if is_uniform_binary(profile) and p == 1.0:
            report.add_check(CheckResult.absolute("eta_uniform_p1", check.eta, 1.0, tol.absolute))
