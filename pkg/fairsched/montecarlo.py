"""
Monte Carlo over RRR seeds: trial k runs with seed base_seed ^ k.

Trials are independent; with workers > 1 they run in a
multiprocessing Pool and are aggregated in trial order, so the
StatsTable matches serial execution.
"""

import logging
import multiprocessing
import os

from fairsched.allocation import AllocationState
from fairsched.filling import PolicyError, PolicySpec, run
from fairsched.rng import derive_seed
from fairsched.scenario import Scenario, check_valid
from fairsched.stats import PolicyStats, StatsTable

logger = logging.getLogger(__name__)

CPU_COUNT = multiprocessing.cpu_count()


def MC_WORKERS() -> int:
    """
    default worker process count (MC_WORKERS env, default 1)
    """
    value = os.environ.get("MC_WORKERS", "1")
    try:
        workers = int(value)
    except ValueError:
        raise PolicyError(f"MC_WORKERS {value!r} not an integer")
    return max(1, min(workers, CPU_COUNT))


def policy_label(policy: PolicySpec) -> str:
    return f"{policy.server_policy.value}-{policy.criterion.kind.value}"


Trial = tuple[Scenario, PolicySpec, int]


def _run_trial(trial: Trial) -> AllocationState:
    # top level so Pool can pickle it
    scenario, policy, seed = trial
    return run(scenario, policy.with_seed(seed)).final_state


def run_trials(
    scenario: Scenario,
    policy: PolicySpec,
    trials: int,
    base_seed: int,
    workers: int = 1,
) -> list[AllocationState]:
    """
    final states of `trials` runs, in trial order
    """
    if trials < 2:
        raise PolicyError(f"monte carlo needs at least 2 trials, got {trials}")
    check_valid(scenario)
    policy.validate()

    jobs = [(scenario, policy, derive_seed(base_seed, k)) for k in range(trials)]
    if workers <= 1:
        return [_run_trial(job) for job in jobs]

    logger.info("%d trials on %d workers", trials, workers)
    with multiprocessing.Pool(processes=workers) as pool:
        return pool.map(_run_trial, jobs)


def monte_carlo(
    scenario: Scenario,
    policy: PolicySpec,
    trials: int,
    base_seed: int,
    label: str | None = None,
    workers: int | None = None,
) -> StatsTable:
    if workers is None:
        workers = MC_WORKERS()
    label = label or policy_label(policy)
    states = run_trials(scenario, policy, trials, base_seed, workers)
    row = PolicyStats.from_states(label, states)
    logger.info(
        "%s: %d trials, mean total %g (std %g)",
        label,
        trials,
        row.total.mean,
        row.total.std,
    )
    table = StatsTable()
    table.add(row)
    return table
