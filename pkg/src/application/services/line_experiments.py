"""
Experiments on first-passage stopping lines and on the tagged fragment's
passages: the line martingale, the laws of large numbers along lines and the
overshoot samples.
"""

import logging
import math
from functools import partial

import numpy as np
from scipy import stats

from src.application.services.experiment_request import ExperimentRequest
from src.application.services.experiment_support import cell, is_uniform_binary
from src.application.services.replicate_runner import ReplicateRunner
from src.application.services.replicate_tasks import line_task, passage_task
from src.domain.models.dislocation import SpectralProfile
from src.domain.models.fragmentation import CONSERVATION_CHECK_TOLERANCE
from src.domain.models.functionals import functional_from_spec
from src.domain.models.random_streams import StreamPurpose, rng_for
from src.domain.models.report import CheckResult, RunReport, Table
from src.domain.models.spine import first_passage_batch, q_large, q_large_error_slope, q_small
from src.domain.models.statistics import summarize, weighted_ks_distance
from src.domain.models.stopping_lines import (
    FROZEN_COLUMNS,
    FrozenLineState,
    frozen_rows,
    line_W,
    lln_from_state,
    malthusian_sum,
    nested_consistency,
)

logger = logging.getLogger(__name__)

LINE_COLUMNS = ("sweep_id", "p", "z", "W", "n_frozen", "max_freeze_time", "conservation_error")
LLN_COLUMNS = ("sweep_id", "p", "z", "numerator", "ratio", "W")
Q_COLUMNS = ("p", "value", "error", "method", "n_samples")
PASSAGE_COLUMNS = ("seed", "p", "z", "tau", "overshoot")

DEFAULT_SPINE_SAMPLES = 100_000
PASSAGE_BLOCK = 10_000
SE_DOUBLINGS = 3
SE_SLOPE_TOLERANCE = 0.1


def _sweeps(
    request: ExperimentRequest,
    profile: SpectralProfile,
    runner: ReplicateRunner,
    p: float,
    levels: tuple[float, ...],
    start: int,
) -> list[list[FrozenLineState]]:
    task = partial(
        line_task,
        measure=request.measure,
        profile=profile,
        seed=request.master_seed,
        p=p,
        levels=levels,
        controls=request.controls,
    )
    return runner.map(task, request.replicates, start=start)


# --- line ---

def _coming_generation_checks(
    request: ExperimentRequest,
    profile: SpectralProfile,
    report: RunReport,
    p: float,
    states: list[FrozenLineState],
    stream: int,
) -> None:
    """The z = 0 line for p > 0: Malthusian mean, positivity and agreement with the spine."""
    tol = request.tolerances
    malthusian = summarize([malthusian_sum(state.distances, p) for state in states])
    report.summaries[cell("malthusian", p=p)] = malthusian
    report.add_check(CheckResult.within_se(cell("malthusian_mean", p=p), malthusian, 1.0, tol.n_se, tol.absolute))

    distances = np.concatenate([state.distances for state in states])
    weights = np.concatenate([state.weights for state in states])
    report.add_check(CheckResult.at_least(cell("distances_positive", p=p), float(distances.min()), np.finfo(float).tiny))
    first_freeze = min(float(state.freeze_time.min()) for state in states)
    report.add_check(CheckResult.at_least(cell("freeze_times_positive", p=p), first_freeze, np.finfo(float).tiny))

    if is_uniform_binary(profile):
        tilted = summarize([math.fsum(state.distances * np.exp(-(p + 1.0) * state.distances)) for state in states])
        report.summaries[cell("tilted_distance", p=p)] = tilted
        report.add_check(CheckResult.within_se(cell("tilted_distance_mean", p=p), tilted, 1.0 / (p + 2.0), tol.n_se))

    n = request.samples or DEFAULT_SPINE_SAMPLES
    rng = rng_for(request.master_seed, stream, StreamPurpose.PASSAGE)
    overshoots = first_passage_batch(profile, p, 0.0, n, rng, request.time_cap).observed_overshoots()
    distance = weighted_ks_distance(distances, weights, overshoots)
    report.add_check(CheckResult.at_most(cell("spine_overshoot_ks", p=p), distance, tol.ks_max))


def run_line(request: ExperimentRequest, report: RunReport, runner: ReplicateRunner) -> None:
    """
    Sweeps nested lines ℓ^(p,z) and checks the line martingale.

    For every p the replicates sweep all levels on one tree each; sweep ids
    continue across p so that every sweep has its own stream.
    """
    profile = request.profile()
    tol = request.tolerances
    levels = tuple(sorted(request.z_values))
    table = report.add_table(Table("lines", LINE_COLUMNS))
    frozen = report.add_table(Table("frozen", FROZEN_COLUMNS)) if request.emit_frozen else None
    worst_conservation = 0.0

    for i, p in enumerate(request.resolved_p_values(profile)):
        start = i * request.replicates
        sweeps = _sweeps(request, profile, runner, p, levels, start)
        for offset, states in enumerate(sweeps):
            sweep_id = start + offset
            for state in states:
                error = state.conservation_error()
                worst_conservation = max(worst_conservation, error)
                table.extend([{
                    "sweep_id": sweep_id,
                    "p": p,
                    "z": state.z,
                    "W": line_W(state),
                    "n_frozen": state.fragment_count,
                    "max_freeze_time": state.max_freeze_time,
                    "conservation_error": error,
                }])
                if frozen is not None:
                    frozen.extend(frozen_rows(state, sweep_id))

        by_level = [[states[k] for states in sweeps] for k in range(len(levels))]
        for k, z in enumerate(levels):
            values = [line_W(state) for state in by_level[k]]
            summary = summarize(values)
            report.summaries[cell("line_W", p=p, z=z)] = summary
            if z == 0.0 and p <= 0.0:
                deviation = max(abs(v - 1.0) for v in values)
                report.add_check(CheckResult.at_most(cell("root_line_W", p=p), deviation, tol.absolute))
            else:
                report.add_check(CheckResult.within_se(cell("line_W_mean", p=p, z=z), summary, 1.0, tol.n_se, tol.absolute))
            if k > 0:
                steps = summarize([b - a for a, b in zip(map(line_W, by_level[k - 1]), values)])
                report.add_check(CheckResult.within_se(
                    cell("line_W_increment", p=p, z=z), steps, 0.0, tol.n_se, tol.absolute,
                ))
            if z == 0.0 and p > 0.0:
                _coming_generation_checks(request, profile, report, p, by_level[k], i)

        if len(levels) > 1:
            broken = sum(not nested_consistency(states) for states in sweeps)
            report.add_check(CheckResult.at_most(cell("nested_lines", p=p), broken, 0.0))
        report.diagnostics[cell("max_simulated", p=p)] = max(states[-1].simulated for states in sweeps)

    report.add_check(CheckResult.at_most("line_conservation", worst_conservation, CONSERVATION_CHECK_TOLERANCE))


# --- lln ---

def run_lln(request: ExperimentRequest, report: RunReport, runner: ReplicateRunner) -> None:
    """
    Weighted averages of f(dᵢ) along lines against the renewal functional Q^(p)(f).

    Q is evaluated by quadrature for p ≤ 0 and by overshoot sampling for p > 0.
    """
    profile = request.profile()
    tol = request.tolerances
    f = functional_from_spec(request.functional or {"name": "identity"})
    levels = tuple(sorted(request.z_values))
    table = report.add_table(Table("lln", LLN_COLUMNS))
    q_table = report.add_table(Table("q_functional", Q_COLUMNS))

    p_values = request.resolved_p_values(profile)
    n_p = len(p_values)

    for i, p in enumerate(p_values):
        f.check_envelope(profile, p)
        if p <= 0.0:
            q = q_small(profile, p, f, force=request.force_lattice)
        else:
            n = request.samples or DEFAULT_SPINE_SAMPLES
            q = q_large(profile, p, f, n, request.master_seed, i, request.time_cap)
            first = n_p + i * (SE_DOUBLINGS + 1)
            sizes, errors, slope = q_large_error_slope(
                profile, p, f, n, request.master_seed, first, SE_DOUBLINGS, request.time_cap,
            )
            report.diagnostics[cell("q_large_errors", p=p)] = dict(zip(sizes, errors))
            report.add_check(CheckResult.absolute(
                cell("q_large_error_slope", p=p), slope, -0.5, SE_SLOPE_TOLERANCE,
                detail="log(SE) against log(n)",
            ))
        q_table.extend([{"p": p, "value": q.value, "error": q.error, "method": q.method, "n_samples": q.n_samples}])

        start = i * request.replicates
        sweeps = _sweeps(request, profile, runner, p, levels, start)
        for k, z in enumerate(levels):
            results = [lln_from_state(states[k], f, profile) for states in sweeps]
            table.extend([
                {
                    "sweep_id": start + offset,
                    "p": p,
                    "z": z,
                    "numerator": result.numerator,
                    "ratio": result.ratio,
                    "W": line_W(states[k]),
                }
                for offset, (result, states) in enumerate(zip(results, sweeps))
            ])
            median = float(np.median([result.ratio for result in results]))
            report.add_check(CheckResult.relative(
                cell("lln_median_ratio", p=p, z=z), median, q.value, tol.relative,
                detail=f"f={f.name}, q_error={q.error!r}",
            ))
    logger.info("LLN along lines for %s with %d sweeps per p", f.name, request.replicates)


# --- passage ---

def run_passage(request: ExperimentRequest, report: RunReport, runner: ReplicateRunner) -> None:
    """
    First passages of Y over every level, replicates passages per (p, z).

    Passages are drawn in blocks with one stream each, so the worker count
    never changes the sample.
    """
    profile = request.profile()
    tol = request.tolerances
    total = request.replicates
    n_blocks = -(-total // PASSAGE_BLOCK)
    table = report.add_table(Table("passages", PASSAGE_COLUMNS))
    unobserved = 0
    first_block = 0

    for p in request.resolved_p_values(profile):
        for z in sorted(request.z_values):
            task = partial(
                passage_task,
                profile=profile,
                seed=request.master_seed,
                p=p,
                z=z,
                total=total,
                block_size=PASSAGE_BLOCK,
                first_block=first_block,
                time_cap=request.time_cap,
            )
            batches = runner.map(task, n_blocks, start=first_block)
            first_block += n_blocks
            tau = np.concatenate([batch.tau for batch in batches])
            over = np.concatenate([batch.overshoot for batch in batches])
            observed = np.concatenate([batch.observed for batch in batches])
            unobserved += int((~observed).sum())
            table.extend([
                {"seed": request.master_seed, "p": p, "z": z, "tau": float(t), "overshoot": float(o)}
                for t, o in zip(tau, over)
            ])
            _passage_checks(request, profile, report, p, z, tau[observed], over[observed])

    report.diagnostics["unobserved_passages"] = unobserved


def _passage_checks(
    request: ExperimentRequest,
    profile: SpectralProfile,
    report: RunReport,
    p: float,
    z: float,
    tau: np.ndarray,
    over: np.ndarray,
) -> None:
    tol = request.tolerances
    if tau.size == 0:
        report.add_check(CheckResult.at_least(cell("observed_passages", p=p, z=z), 0.0, 1.0))
        return
    zero_fraction = float(np.mean(tau == 0.0))
    if p > 0.0:
        report.add_check(CheckResult.at_least(cell("overshoot_positive", p=p, z=z), float(over.min()), np.finfo(float).tiny))
        if z == 0.0:
            report.add_check(CheckResult.at_most(cell("zero_passage_fraction", p=p, z=z), zero_fraction, 0.0))
    elif z == 0.0:
        report.add_check(CheckResult.at_least(cell("zero_passage_fraction", p=p, z=z), zero_fraction, 1.0))

    if p > 0.0 and is_uniform_binary(profile):
        # The tilted jump law is Exp(p+2), so every overshoot is Exp(p+2).
        rate = p + 2.0
        summary = summarize(over)
        report.summaries[cell("overshoot", p=p, z=z)] = summary
        report.add_check(CheckResult.relative(cell("overshoot_mean", p=p, z=z), summary.mean, 1.0 / rate, tol.relative))
        ks = stats.kstest(over, stats.expon(scale=1.0 / rate).cdf).statistic
        report.add_check(CheckResult.at_most(cell("overshoot_ks", p=p, z=z), float(ks), tol.ks_max))
        malthusian = summarize(np.exp(-(p + 1.0) * over))
        report.add_check(CheckResult.within_se(
            cell("overshoot_malthusian", p=p, z=z), malthusian, rate / (2.0 * p + 3.0), tol.n_se,
        ))
