"""
Framework churn without revocation: departures free their tasks,
arrivals start empty, nobody else is moved.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from fairsched.allocation import AllocationState
from fairsched.filling import PolicySpec, RoundRobinOffers, RunResult, ServerPolicy, run
from fairsched.rng import RngStream
from fairsched.scenario import FrameworkSpec, Scenario, ScenarioError, check_valid

logger = logging.getLogger(__name__)


class EventError(ScenarioError):
    """
    duplicate arrival id or unknown departure id
    """


@dataclass(frozen=True)
class FrameworkArrival:
    spec: FrameworkSpec


@dataclass(frozen=True)
class FrameworkDeparture:
    framework_id: int


Event = Union[FrameworkArrival, FrameworkDeparture]


def apply_event(state: AllocationState, event: Event) -> AllocationState:
    """
    new state over the updated scenario; `state` is left untouched
    """
    scenario = state.scenario
    if isinstance(event, FrameworkDeparture):
        try:
            n = scenario.framework_index(event.framework_id)
        except ScenarioError:
            raise EventError(f"departure of unknown framework {event.framework_id}")
        after = state.copy()
        after.release(n)
        new_scenario = scenario.without_framework(event.framework_id)
        x = np.delete(after.x, n, axis=0)
        logger.info("framework %d departs", event.framework_id)
    else:
        if any(f.id == event.spec.id for f in scenario.frameworks):
            raise EventError(f"arrival of duplicate framework {event.spec.id}")
        new_scenario = scenario.with_framework(event.spec)
        check_valid(new_scenario)
        empty = np.zeros((1, scenario.num_servers), dtype=state.x.dtype)
        x = np.vstack([state.x, empty])
        logger.info("framework %d arrives", event.spec.id)
    return AllocationState(new_scenario, integer=state.integer, x=x)


def run_with_churn(
    scenario: Scenario, policy: PolicySpec, events: Sequence[Event]
) -> list[RunResult]:
    """
    fill, then for each event: apply it and resume filling.
    one RunResult per epoch (len(events) + 1); RRR policies keep
    a single offer stream throughout.
    """
    offers = None
    if policy.server_policy is ServerPolicy.RRR:
        offers = RoundRobinOffers(scenario.num_servers, RngStream(policy.seed))
    results = [run(scenario, policy, offers=offers)]
    for event in events:
        state = apply_event(results[-1].final_state, event)
        results.append(run(state.scenario, policy, initial_state=state, offers=offers))
    return results
