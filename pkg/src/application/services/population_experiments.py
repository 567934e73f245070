"""
Experiments on whole simulated populations: raw trajectories, the additive
and derivative martingales, the many-to-one identity and the speed of the
largest fragment.

Every replicate runs through the ReplicateRunner with its own stream, and
the reductions below iterate in replicate order.
"""

import logging
import math
from functools import partial

from src.application.services.experiment_request import ExperimentRequest
from src.application.services.experiment_support import cell, g_function
from src.application.services.replicate_runner import ReplicateRunner
from src.application.services.replicate_tasks import (
    martingale_task,
    simulate_task,
    snapshot_task,
    speed_task,
)
from src.domain.models.fragmentation import (
    CONSERVATION_CHECK_TOLERANCE,
    TRAJECTORY_COLUMNS,
    SimulationControls,
    log_correction,
)
from src.domain.models.random_streams import StreamPurpose, rng_for
from src.domain.models.report import CheckResult, RunReport, Table
from src.domain.models.spine import laplace_check, sample_tagged_values, tree_side_value
from src.domain.models.statistics import difference_z_score, summarize
from src.domain.models.waves import classify_speed

logger = logging.getLogger(__name__)

MARTINGALE_COLUMNS = ("run_id", "p", "t", "W", "dW", "dW_trunc", "n_alive", "dropped_mass")
TRUNCATED_COLUMNS = ("run_id", "p", "t", "x", "dW_trunc")
MANY_TO_ONE_COLUMNS = ("run_id", "p", "t", "g", "tree_value")
LAPLACE_COLUMNS = ("p", "q", "t", "empirical", "se", "target")
SPEED_COLUMNS = ("run_id", "slope")
SPEED_CLASS_COLUMNS = ("c", "label", "critical_speed", "p", "lower_edge")


def _none_to_nan(value: float | None) -> float:
    return math.nan if value is None else value


# --- simulate ---

def run_simulate(request: ExperimentRequest, report: RunReport, runner: ReplicateRunner) -> None:
    """Summary rows of replicated trajectories with the population and conservation checks."""
    profile = request.profile()
    tol = request.tolerances
    times = tuple(request.t_values)
    task = partial(
        simulate_task,
        measure=request.measure,
        seed=request.master_seed,
        horizon=request.resolved_horizon(),
        controls=request.controls,
        times=times,
    )
    runs = runner.map(task, request.replicates)

    table = report.add_table(Table("trajectories", TRAJECTORY_COLUMNS))
    for run in runs:
        table.extend(run.rows)

    dropped = any(row["dropped_mass"] > 0.0 for run in runs for row in run.rows)
    for j, t in enumerate(times):
        if dropped:
            # Retired fragments leave the alive count, so E[N(t)] no longer applies.
            report.diagnostics["population_check_skipped"] = "size floor retired fragments"
        else:
            counts = summarize([run.n_alive[j] for run in runs])
            report.summaries[cell("n_alive", t=t)] = counts
            report.add_check(CheckResult.within_se(
                cell("expected_population", t=t), counts, profile.expected_population(t), tol.n_se,
            ))
        size_biased = summarize([run.size_biased[j] for run in runs])
        report.summaries[cell("size_biased_mean", t=t)] = size_biased
        report.add_check(CheckResult.within_se(
            cell("size_biased_mean", t=t), size_biased, profile.phi_prime(0.0) * t, tol.n_se, tol.absolute,
        ))

    worst = max(run.conservation for run in runs)
    report.add_check(CheckResult.at_most("conservation", worst, CONSERVATION_CHECK_TOLERANCE))
    report.diagnostics["events_total"] = sum(run.n_events for run in runs)


# --- martingale ---

def martingale_controls(request: ExperimentRequest, critical: bool) -> SimulationControls:
    """Lineage minima are tracked at c_p̄ whenever a critical tilt is requested."""
    if not critical:
        return request.controls
    return SimulationControls(
        max_fragments=request.controls.max_fragments,
        size_floor=request.controls.size_floor,
        lineage_drift=request.profile().critical_speed,
    )


def run_martingale(request: ExperimentRequest, report: RunReport, runner: ReplicateRunner) -> None:
    """
    Additive martingales for every (p, t), derivative martingales at p̄.

    Checks the unit mean of W, the zero mean of ∂W, the mean x of the
    truncated derivative martingale with its positivity, and the paired
    increments of W between consecutive times.
    """
    profile = request.profile()
    tol = request.tolerances
    p_values = tuple(request.resolved_p_values(profile))
    times = tuple(sorted(request.t_values))
    critical = any(profile.is_critical(p) for p in p_values)
    x_values = tuple(request.x_values) if critical else ()
    task = partial(
        martingale_task,
        measure=request.measure,
        profile=profile,
        seed=request.master_seed,
        horizon=request.resolved_horizon(),
        controls=martingale_controls(request, critical),
        p_values=p_values,
        times=times,
        x_trunc=request.x_trunc if critical else None,
        x_values=x_values,
    )
    runs = runner.map(task, request.replicates)

    table = report.add_table(Table("martingales", MARTINGALE_COLUMNS))
    for run_id, run in enumerate(runs):
        table.extend([
            {
                "run_id": run_id,
                "p": s.p,
                "t": s.t,
                "W": s.W,
                "dW": _none_to_nan(s.dW),
                "dW_trunc": _none_to_nan(s.dW_trunc),
                "n_alive": s.n_alive,
                "dropped_mass": s.dropped_mass,
            }
            for s in run.samples
        ])

    n_times = len(times)
    for i, p in enumerate(p_values):
        cells = [[run.samples[i * n_times + j] for run in runs] for j in range(n_times)]
        for j, t in enumerate(times):
            samples = cells[j]
            w = summarize([s.W for s in samples])
            report.summaries[cell("W", p=p, t=t)] = w
            report.add_check(CheckResult.within_se(cell("W_mean", p=p, t=t), w, 1.0, tol.n_se, tol.absolute))
            if profile.is_critical(p):
                dw = summarize([s.dW for s in samples])
                report.summaries[cell("dW", p=p, t=t)] = dw
                report.add_check(CheckResult.within_se(cell("dW_mean", p=p, t=t), dw, 0.0, tol.n_se, tol.absolute))
            if j > 0:
                steps = summarize([b.W - a.W for a, b in zip(cells[j - 1], samples)])
                report.add_check(CheckResult.within_se(
                    cell("W_increment", p=p, t=t), steps, 0.0, tol.n_se, tol.absolute,
                ))

    if x_values:
        aux = report.add_table(Table("truncated_derivative", TRUNCATED_COLUMNS))
        for run_id, run in enumerate(runs):
            aux.extend([
                {"run_id": run_id, "p": p, "t": t, "x": x, "dW_trunc": value}
                for p, t, x, value in run.truncated
            ])
        keys = [(p, t, x) for p, t, x, _ in runs[0].truncated]
        for k, (p, t, x) in enumerate(keys):
            values = [run.truncated[k][3] for run in runs]
            summary = summarize(values)
            report.summaries[cell("dW_trunc", p=p, t=t, x=x)] = summary
            report.add_check(CheckResult.within_se(cell("dW_trunc_mean", p=p, t=t, x=x), summary, x, tol.n_se))
            report.add_check(CheckResult.at_least(cell("dW_trunc_nonnegative", p=p, t=t, x=x), min(values), 0.0))

    all_samples = [s for run in runs for s in run.samples]
    report.diagnostics["max_truncation_bias"] = max(s.truncation_bias_bound for s in all_samples)
    report.diagnostics["max_alive"] = max(s.n_alive for s in all_samples)
    report.diagnostics["max_dropped_mass"] = max(s.dropped_mass for s in all_samples)


# --- many_to_one ---

def run_many_to_one(request: ExperimentRequest, report: RunReport, runner: ReplicateRunner) -> None:
    """
    Tree side e^(Φ(p)t)Σ e^(−(p+1)xᵢ)g(xᵢ) against the spine side E^(p)[g(ξ_t)].

    One set of trees serves every (p, g) cell; each spine cell draws from its
    own stream. Laplace transforms of ξ_t under ℙ^(p) go to an auxiliary table.
    """
    profile = request.profile()
    tol = request.tolerances
    p_values = request.resolved_p_values(profile)
    times = tuple(sorted(request.t_values))
    task = partial(
        snapshot_task,
        measure=request.measure,
        seed=request.master_seed,
        horizon=max(times),
        controls=request.controls,
        times=times,
    )
    snapshots = runner.map(task, request.replicates)
    n_spine = request.samples or request.replicates

    table = report.add_table(Table("many_to_one", MANY_TO_ONE_COLUMNS))
    stream = 0
    for p in p_values:
        phi_p = profile.phi(p)
        for j, t in enumerate(times):
            spine_xi = sample_tagged_values(
                profile, p, t, n_spine, rng_for(request.master_seed, stream, StreamPurpose.SPINE),
            )
            stream += 1
            for name in request.g_names:
                g = g_function(name)
                tree_values = [tree_side_value(run[j].x, phi_p, p, t, g) for run in snapshots]
                table.extend([
                    {"run_id": run_id, "p": p, "t": t, "g": name, "tree_value": value}
                    for run_id, value in enumerate(tree_values)
                ])
                tree = summarize(tree_values)
                spine = summarize(g(spine_xi))
                report.summaries[cell("tree", p=p, t=t, g=name)] = tree
                report.summaries[cell("spine", p=p, t=t, g=name)] = spine
                z = difference_z_score(tree, spine)
                report.add_check(CheckResult.at_most(cell("many_to_one_z", p=p, t=t, g=name), abs(z), tol.n_se))
                # E^(p)[1] = 1 and E^(p)[ξ_t] = Φ′(p)t.
                target = 1.0 if name == "one" else profile.phi_prime(p) * t
                report.add_check(CheckResult.within_se(
                    cell("spine_mean", p=p, t=t, g=name), spine, target, tol.n_se, tol.absolute,
                ))

    laplace = report.add_table(Table("laplace", LAPLACE_COLUMNS))
    for p in p_values:
        for q in request.q_values:
            for t in times:
                result = laplace_check(profile, p, q, t, n_spine, request.master_seed, stream)
                stream += 1
                laplace.extend([{
                    "p": p, "q": q, "t": t,
                    "empirical": result.empirical.mean,
                    "se": result.empirical.se,
                    "target": result.target,
                }])
                report.add_check(CheckResult.within_se(
                    cell("laplace", p=p, q=q, t=t), result.empirical, result.target, tol.n_se, tol.absolute,
                ))


# --- speed ---

def run_speed(request: ExperimentRequest, report: RunReport, runner: ReplicateRunner) -> None:
    """
    Regression slope of min x(t) over the window, one per run, against c_p̄.

    The log t term of the largest fragment is removed before fitting unless
    the window starts at 0.

    The auxiliary table classifies the configured speeds and the estimate.
    """
    profile = request.profile()
    tol = request.tolerances
    window = request.window or (0.0, request.resolved_horizon())
    correction = log_correction(profile) if window[0] > 0.0 else 0.0
    report.diagnostics["log_correction"] = correction
    task = partial(
        speed_task,
        measure=request.measure,
        seed=request.master_seed,
        window=window,
        controls=request.controls,
        log_coefficient=correction,
    )
    slopes = runner.map(task, request.replicates)

    report.add_table(Table(
        "speeds", SPEED_COLUMNS,
        [{"run_id": run_id, "slope": slope} for run_id, slope in enumerate(slopes)],
    ))
    summary = summarize(slopes)
    report.summaries["slope"] = summary
    report.add_check(CheckResult.relative(
        "largest_fragment_speed", summary.mean, profile.critical_speed, tol.relative,
        detail=f"window={list(window)!r}, log_correction={correction!r}",
    ))

    classes = report.add_table(Table("speed_classes", SPEED_CLASS_COLUMNS))
    for c in [*request.c_values, summary.mean]:
        verdict = classify_speed(profile, c)
        classes.extend([{
            "c": verdict.c,
            "label": verdict.label,
            "critical_speed": verdict.critical_speed,
            "p": verdict.p,
            "lower_edge": verdict.lower_edge,
        }])
    logger.info("Mean largest-fragment slope %r over %d runs", summary.mean, len(slopes))
