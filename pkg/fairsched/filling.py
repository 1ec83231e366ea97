"""
Progressive filling: repeatedly place epsilon tasks of the framework
with the smallest fairness score on a server chosen by the policy,
until no framework fits anywhere.

Server policies:
RRR        randomized round robin over random server permutations.
           With a framework-level criterion the framework is picked
           first, then a fresh permutation is drawn and walked to the
           first server where it fits (one round per placement).  With
           a server-specific criterion the servers are offered round
           by round, a new permutation once every server has been
           offered, and the criterion picks the framework for each.
BEST_FIT   (framework-level criteria) each framework prefers the server
           whose residual shape best matches its demand shape, and
           waits while that server cannot take a task: a framework
           with a higher score may be placed first.  When every
           eligible framework is waiting the lowest score is placed
           on its best fitting server.
JOINT_MIN  (server-specific criteria) the fitting (n,j) pair with the
           smallest score.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from fairsched.allocation import AllocationState
from fairsched.app import AppException
from fairsched.criteria import (
    CriterionKind,
    CriterionSpec,
    framework_score,
    pair_score,
)
from fairsched.rng import MASK64, RngStream
from fairsched.scenario import Scenario, check_valid

logger = logging.getLogger(__name__)


class PolicyError(AppException):
    """
    invalid PolicySpec, or a PolicySpec used outside its rule
    """


class ServerPolicy(Enum):
    RRR = "rrr"
    BEST_FIT = "best-fit"
    JOINT_MIN = "joint-min"


@dataclass(frozen=True)
class PolicySpec:
    criterion: CriterionSpec
    server_policy: ServerPolicy
    epsilon: float = 1
    seed: int = 0

    @property
    def integer(self) -> bool:
        """task mode iff epsilon is a whole number of tasks"""
        return float(self.epsilon).is_integer()

    @property
    def stochastic(self) -> bool:
        return self.server_policy is ServerPolicy.RRR

    def validate(self) -> None:
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise PolicyError(f"epsilon {self.epsilon} must be positive")
        if not 0 <= self.seed <= MASK64:
            raise PolicyError(f"seed {self.seed} not a 64-bit unsigned integer")
        kind = self.criterion.kind
        if self.server_policy is ServerPolicy.JOINT_MIN and not kind.server_specific:
            raise PolicyError(
                f"joint-min needs a server-specific criterion, not {kind.value}"
            )
        if self.server_policy is ServerPolicy.BEST_FIT and kind.server_specific:
            raise PolicyError(
                f"best-fit needs a framework-level criterion, not {kind.value}"
            )

    def with_seed(self, seed: int) -> "PolicySpec":
        return PolicySpec(self.criterion, self.server_policy, self.epsilon, seed)


@dataclass(frozen=True)
class TraceStep:
    step: int
    framework_id: int
    server_id: int
    score: float


@dataclass
class RunResult:
    policy: PolicySpec
    final_state: AllocationState
    trace: list[TraceStep] = field(default_factory=list)
    # allocation the run started from (empty unless resumed)
    initial_x: np.ndarray | None = None

    @property
    def scenario(self) -> Scenario:
        return self.final_state.scenario

    @property
    def total_efficiency(self) -> float:
        return self.final_state.efficiency()

    @property
    def total_tasks(self) -> float:
        return float(self.final_state.totals().sum())

    def replay(self) -> AllocationState:
        return replay(
            self.scenario, self.trace, self.policy.epsilon, initial_x=self.initial_x
        )


class RoundRobinOffers:
    """
    server offers in randomized round robin order:
    a fresh permutation each time every server has been offered once.
    """

    def __init__(self, num_servers: int, rng: RngStream):
        self.num_servers = num_servers
        self.rng = rng
        self.order: list[int] = []
        self.pos = 0
        self.rounds = 0

    def next(self) -> int:
        if self.pos >= len(self.order):
            self.order = self.rng.permutation(self.num_servers)
            self.pos = 0
            self.rounds += 1
        j = self.order[self.pos]
        self.pos += 1
        return j

    def new_round(self) -> None:
        """
        drop the rest of the current round; the next offer starts
        a fresh permutation
        """
        self.pos = len(self.order)


def select_framework(
    scenario: Scenario,
    state: AllocationState,
    criterion: CriterionSpec,
    eligible: Iterable[int],
) -> int | None:
    """
    eligible framework with the smallest score (lowest index on ties)
    """
    best: int | None = None
    best_score = math.inf
    for n in sorted(eligible):
        score = framework_score(scenario, state, criterion, n)
        if best is None or score < best_score:
            best, best_score = n, score
    return best


def best_fit_distance(
    scenario: Scenario, state: AllocationState, n: int, i: int
) -> float:
    """
    L1 distance between framework n's demand shape and server i's
    residual shape, both normalized by pooled capacity and scaled to
    unit sum.  inf when server i has nothing left.
    """
    pooled = scenario.pooled_capacity
    demand = scenario.demand[n] / pooled
    residual = state.residual[i] / pooled
    total = residual.sum()
    if total <= 0:
        return math.inf
    return float(np.abs(demand / demand.sum() - residual / total).sum())


def preferred_server(scenario: Scenario, state: AllocationState, n: int) -> int | None:
    """
    allowed server with spare capacity best matching framework n's
    demand shape, whether or not a task fits there
    """
    best: int | None = None
    best_h = math.inf
    for i in np.flatnonzero(scenario.allowed[n]):
        h = best_fit_distance(scenario, state, n, int(i))
        if h < best_h:
            best, best_h = int(i), h
    return best


def select_server(
    scenario: Scenario,
    state: AllocationState,
    n: int,
    server_policy: ServerPolicy,
    offers: RoundRobinOffers | None = None,
    count: float = 1,
) -> int | None:
    """
    server for `count` tasks of framework n, or None if it fits nowhere.
    RRR consumes offers (declined ones included) from `offers`.
    """
    if not state.fits_anywhere(n, count):
        return None
    if server_policy is ServerPolicy.RRR:
        if offers is None:
            raise PolicyError("RRR server selection needs a RoundRobinOffers")
        # within two rounds every server has been offered
        for _ in range(2 * scenario.num_servers):
            j = offers.next()
            if state.fits(n, j, count):
                return j
        return None  # not reached
    if server_policy is ServerPolicy.BEST_FIT:
        fitting = [
            i for i in range(scenario.num_servers) if state.fits(n, i, count)
        ]
        return min(fitting, key=lambda i: (best_fit_distance(scenario, state, n, i), i))
    raise PolicyError("joint-min selects (framework, server) pairs, not servers")


Placement = tuple[int, int, float]  # (n, j, score)


def _eligible(state: AllocationState, count: float) -> list[int]:
    return [
        n for n in range(state.scenario.num_frameworks) if state.fits_anywhere(n, count)
    ]


def _fitting_pairs(
    scenario: Scenario, state: AllocationState, spec: CriterionSpec, count: float
) -> list[Placement]:
    pairs = []
    for n in range(scenario.num_frameworks):
        for j in range(scenario.num_servers):
            if state.fits(n, j, count):
                score = pair_score(scenario, state, spec, n, j)
                if math.isfinite(score):
                    pairs.append((n, j, score))
    return pairs


def _step_framework_rrr(
    scenario: Scenario,
    state: AllocationState,
    policy: PolicySpec,
    offers: RoundRobinOffers,
) -> Placement | None:
    eligible = _eligible(state, policy.epsilon)
    n = select_framework(scenario, state, policy.criterion, eligible)
    if n is None:
        return None
    score = framework_score(scenario, state, policy.criterion, n)
    offers.new_round()
    j = select_server(scenario, state, n, ServerPolicy.RRR, offers, policy.epsilon)
    assert j is not None
    return n, j, score


def _step_server_rrr(
    scenario: Scenario,
    state: AllocationState,
    policy: PolicySpec,
    offers: RoundRobinOffers,
) -> Placement | None:
    if not _fitting_pairs(scenario, state, policy.criterion, policy.epsilon):
        return None
    while True:
        j = offers.next()
        best: Placement | None = None
        for n in scenario.users(j):
            if not state.fits(n, j, policy.epsilon):
                continue
            score = pair_score(scenario, state, policy.criterion, n, j)
            if math.isfinite(score) and (best is None or score < best[2]):
                best = (n, j, score)
        if best is not None:
            return best
        # declined offer


def _step_best_fit(
    scenario: Scenario, state: AllocationState, policy: PolicySpec
) -> Placement | None:
    eps = policy.epsilon
    ranked = sorted(
        (framework_score(scenario, state, policy.criterion, n), n)
        for n in _eligible(state, eps)
    )
    if not ranked:
        return None
    for score, n in ranked:
        p = preferred_server(scenario, state, n)
        if p is not None and state.fits(n, p, eps):
            return n, p, score
    # every preferred server is full: keep filling so the state ends maximal
    score, n = ranked[0]
    j = select_server(scenario, state, n, ServerPolicy.BEST_FIT, count=eps)
    assert j is not None
    return n, j, score


def _step_joint_min(
    scenario: Scenario, state: AllocationState, policy: PolicySpec
) -> Placement | None:
    best: Placement | None = None
    for pair in _fitting_pairs(scenario, state, policy.criterion, policy.epsilon):
        if best is None or pair[2] < best[2]:
            best = pair
    return best


def run(
    scenario: Scenario,
    policy: PolicySpec,
    initial_state: AllocationState | None = None,
    offers: RoundRobinOffers | None = None,
) -> RunResult:
    """
    fill from initial_state (default: empty) until maximal.
    `offers` lets a caller carry one RRR offer stream across runs.
    """
    check_valid(scenario)
    policy.validate()
    if policy.criterion.kind is CriterionKind.GENERIC:
        policy.criterion.weight_matrix(scenario)  # raises on bad weights

    if initial_state is None:
        state = AllocationState(scenario, integer=policy.integer)
    else:
        if initial_state.scenario != scenario:
            raise PolicyError("initial state belongs to a different scenario")
        state = initial_state.copy()
    initial_x = state.x.copy()

    server_policy = policy.server_policy
    if server_policy is ServerPolicy.RRR and offers is None:
        offers = RoundRobinOffers(scenario.num_servers, RngStream(policy.seed))

    trace: list[TraceStep] = []
    while True:
        if server_policy is ServerPolicy.RRR:
            assert offers is not None
            if policy.criterion.server_specific:
                placed = _step_server_rrr(scenario, state, policy, offers)
            else:
                placed = _step_framework_rrr(scenario, state, policy, offers)
        elif server_policy is ServerPolicy.BEST_FIT:
            placed = _step_best_fit(scenario, state, policy)
        else:
            placed = _step_joint_min(scenario, state, policy)
        if placed is None:
            break

        n, j, score = placed
        state.apply_increment(n, j, policy.epsilon)
        trace.append(
            TraceStep(
                len(trace) + 1,
                scenario.frameworks[n].id,
                scenario.servers[j].id,
                score,
            )
        )
        logger.debug(
            "step %d: framework %d -> server %d (%g)",
            len(trace),
            trace[-1].framework_id,
            trace[-1].server_id,
            score,
        )

    result = RunResult(policy, state, trace, initial_x)
    logger.info(
        "%s/%s: %d steps, efficiency %g",
        policy.criterion.kind.value,
        server_policy.value,
        len(trace),
        result.total_efficiency,
    )
    return result


def replay(
    scenario: Scenario,
    trace: Sequence[TraceStep],
    epsilon: float = 1,
    initial_x: np.ndarray | None = None,
) -> AllocationState:
    """
    rebuild an allocation by applying the trace's increments
    (in order) to initial_x, or to an empty state
    """
    state = AllocationState(scenario, integer=float(epsilon).is_integer(), x=initial_x)
    for step in trace:
        state.apply_increment(
            scenario.framework_index(step.framework_id),
            scenario.server_index(step.server_id),
            epsilon,
        )
    return state
