import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairsched.allocation import AllocationState
from fairsched.criteria import framework_score, pair_score, parse_criterion
from fairsched.filling import (
    PolicyError,
    PolicySpec,
    RoundRobinOffers,
    ServerPolicy,
    best_fit_distance,
    preferred_server,
    replay,
    run,
    select_framework,
    select_server,
)
from fairsched.rng import RngStream
from fairsched.scenario import Scenario, ScenarioValidationError, make_scenario

PS_DSF_SET = ([[19, 0], [2, 20]], [[20, 2], [0, 19]])


def policy(criterion: str, server_policy: ServerPolicy, seed: int = 0) -> PolicySpec:
    return PolicySpec(parse_criterion(criterion), server_policy, seed=seed)


def mirrored(x: list[list[int]]) -> list[list[int]]:
    """swap both framework and server labels"""
    return [[x[1][1], x[1][0]], [x[0][1], x[0][0]]]


class TestPolicySpec:
    def test_joint_min_needs_server_criterion(self) -> None:
        with pytest.raises(PolicyError):
            policy("drf", ServerPolicy.JOINT_MIN).validate()
        policy("rpsdsf", ServerPolicy.JOINT_MIN).validate()

    def test_best_fit_needs_framework_criterion(self) -> None:
        with pytest.raises(PolicyError):
            policy("psdsf-server", ServerPolicy.BEST_FIT).validate()

    def test_epsilon(self) -> None:
        drf = parse_criterion("drf")
        with pytest.raises(PolicyError):
            PolicySpec(drf, ServerPolicy.RRR, epsilon=0).validate()
        assert PolicySpec(drf, ServerPolicy.RRR, epsilon=2).integer
        assert not PolicySpec(drf, ServerPolicy.RRR, epsilon=0.5).integer

    def test_seed(self) -> None:
        with pytest.raises(PolicyError):
            policy("drf", ServerPolicy.RRR, seed=-1).validate()


class TestSelect:
    def test_framework_tie(self, s0: Scenario) -> None:
        drf = parse_criterion("drf")
        assert select_framework(s0, AllocationState(s0), drf, [0, 1]) == 0

    def test_framework_min(self, s0: Scenario) -> None:
        state = AllocationState.from_matrix(s0, [[2, 0], [1, 0]])
        assert select_framework(s0, state, parse_criterion("drf"), [0, 1]) == 1
        assert select_framework(s0, state, parse_criterion("drf"), []) is None

    def test_best_fit_empty(self, s0: Scenario) -> None:
        state = AllocationState(s0)
        assert best_fit_distance(s0, state, 0, 0) == pytest.approx(10 / 78)
        assert best_fit_distance(s0, state, 0, 1) == pytest.approx(94 / 78)
        assert select_server(s0, state, 0, ServerPolicy.BEST_FIT) == 0
        assert select_server(s0, state, 1, ServerPolicy.BEST_FIT) == 1
        assert preferred_server(s0, state, 0) == 0

    def test_full(self, s0: Scenario) -> None:
        state = AllocationState.from_matrix(s0, [[19, 0], [2, 20]])
        offers = RoundRobinOffers(2, RngStream(1))
        for server_policy in (ServerPolicy.RRR, ServerPolicy.BEST_FIT):
            assert select_server(s0, state, 0, server_policy, offers) is None

    def test_single_server(self, classic: Scenario) -> None:
        state = AllocationState(classic)
        offers = RoundRobinOffers(1, RngStream(1))
        assert select_server(classic, state, 0, ServerPolicy.RRR, offers) == 0
        assert select_server(classic, state, 0, ServerPolicy.BEST_FIT) == 0

    def test_rrr_needs_offers(self, s0: Scenario) -> None:
        with pytest.raises(PolicyError):
            select_server(s0, AllocationState(s0), 0, ServerPolicy.RRR)

    def test_rrr_rounds(self) -> None:
        offers = RoundRobinOffers(3, RngStream(11))
        first = [offers.next() for _ in range(3)]
        second = [offers.next() for _ in range(3)]
        assert sorted(first) == sorted(second) == [0, 1, 2]
        assert offers.rounds == 2

    def test_rrr_skips_full_servers(self) -> None:
        scenario = make_scenario([[1], [5], [1]], [[2]])
        state = AllocationState(scenario)
        offers = RoundRobinOffers(3, RngStream(4))
        for _ in range(2):
            assert select_server(scenario, state, 0, ServerPolicy.RRR, offers) == 1
            state.apply_increment(0, 1)
        assert select_server(scenario, state, 0, ServerPolicy.RRR, offers) is None


class TestRunDeterministic:
    def test_psdsf_joint_min(self, s0: Scenario) -> None:
        result = run(s0, policy("psdsf-server", ServerPolicy.JOINT_MIN))
        assert result.final_state.x.tolist() in PS_DSF_SET
        assert result.total_efficiency == 41
        assert result.final_state.maximal()

    def test_rpsdsf_joint_min(self, s0: Scenario) -> None:
        result = run(s0, policy("rpsdsf", ServerPolicy.JOINT_MIN))
        assert result.total_efficiency == 42
        assert result.final_state.unused().tolist() == [[3, 1], [1, 3]]

    def test_best_fit_drf(self, s0: Scenario) -> None:
        result = run(s0, policy("drf", ServerPolicy.BEST_FIT))
        x = result.final_state.x.tolist()
        assert x in PS_DSF_SET
        assert result.total_efficiency == 41
        unused = result.final_state.unused().tolist()
        assert unused in ([[3, 1], [10, 0]], [[0, 10], [1, 3]])

    @pytest.mark.parametrize("criterion", ["psdsf-server", "rpsdsf"])
    def test_joint_min_scores_minimal(self, s0: Scenario, criterion: str) -> None:
        spec = policy(criterion, ServerPolicy.JOINT_MIN)
        result = run(s0, spec)
        state = AllocationState(s0)
        for step in result.trace:
            n = s0.framework_index(step.framework_id)
            j = s0.server_index(step.server_id)
            assert pair_score(s0, state, spec.criterion, n, j) == step.score
            for m in range(2):
                for i in range(2):
                    if state.fits(m, i):
                        score = pair_score(s0, state, spec.criterion, m, i)
                        assert score >= step.score
            state.apply_increment(n, j)

    def test_best_fit_waiting(self, s0: Scenario) -> None:
        spec = policy("drf", ServerPolicy.BEST_FIT)
        result = run(s0, spec)
        state = AllocationState(s0)
        waited = 0
        for step in result.trace:
            n = s0.framework_index(step.framework_id)
            j = s0.server_index(step.server_id)
            on_preferred = j == preferred_server(s0, state, n)
            for m in range(2):
                if m == n or not state.fits_anywhere(m):
                    continue
                if framework_score(s0, state, spec.criterion, m) < step.score:
                    # passed over only while its preferred server is full
                    assert on_preferred
                    p = preferred_server(s0, state, m)
                    assert p is not None and not state.fits(m, p)
                    waited += 1
            state.apply_increment(n, j)
        assert waited > 0

    def test_relabeled(self, s0: Scenario) -> None:
        # s0 is symmetric under swapping framework, server and resource labels
        swapped = s0.permuted([1, 0], [1, 0], [1, 0])
        for criterion, server_policy in (
            ("psdsf-server", ServerPolicy.JOINT_MIN),
            ("rpsdsf", ServerPolicy.JOINT_MIN),
            ("drf", ServerPolicy.BEST_FIT),
        ):
            a = run(s0, policy(criterion, server_policy))
            b = run(swapped, policy(criterion, server_policy))
            assert a.total_efficiency == b.total_efficiency
            if criterion == "psdsf-server":
                assert mirrored(a.final_state.x.tolist()) in PS_DSF_SET

    def test_replay(self, s0: Scenario) -> None:
        result = run(s0, policy("rpsdsf", ServerPolicy.JOINT_MIN))
        assert np.array_equal(result.replay().x, result.final_state.x)

    def test_invalid_scenario(self) -> None:
        scenario = make_scenario([[0]], [[1]])
        with pytest.raises(ScenarioValidationError):
            run(scenario, policy("drf", ServerPolicy.BEST_FIT))

    def test_invalid_policy(self, s0: Scenario) -> None:
        with pytest.raises(PolicyError):
            run(s0, policy("tsf", ServerPolicy.JOINT_MIN))

    def test_fluid_epsilon(self, classic: Scenario) -> None:
        spec = PolicySpec(parse_criterion("drf"), ServerPolicy.BEST_FIT, epsilon=0.5)
        result = run(classic, spec)
        state = result.final_state
        assert not state.integer
        assert not any(state.fits_anywhere(n, 0.5) for n in range(2))
        assert np.allclose(result.replay().x, state.x)


class TestRunRRR:
    @pytest.mark.parametrize("criterion", ["drf", "tsf", "psdsf-server", "rpsdsf"])
    def test_maximal_and_bounded(self, s0: Scenario, criterion: str) -> None:
        result = run(s0, policy(criterion, ServerPolicy.RRR, seed=17))
        assert result.final_state.maximal()
        assert len(result.trace) <= 60
        assert np.array_equal(result.replay().x, result.final_state.x)

    def test_deterministic(self, s0: Scenario) -> None:
        a = run(s0, policy("drf", ServerPolicy.RRR, seed=99))
        b = run(s0, policy("drf", ServerPolicy.RRR, seed=99))
        assert a.trace == b.trace
        assert np.array_equal(a.final_state.x, b.final_state.x)

    def test_scores_minimal(self, s0: Scenario) -> None:
        spec = policy("drf", ServerPolicy.RRR, seed=5)
        result = run(s0, spec)
        state = AllocationState(s0)
        for step in result.trace:
            scores = [
                framework_score(s0, state, spec.criterion, n)
                for n in range(2)
                if state.fits_anywhere(n)
            ]
            assert step.score == min(scores)
            n = s0.framework_index(step.framework_id)
            state.apply_increment(n, s0.server_index(step.server_id))

    def test_resume(self, s0: Scenario) -> None:
        spec = policy("drf", ServerPolicy.RRR, seed=3)
        start = AllocationState.from_matrix(s0, [[4, 0], [0, 4]])
        result = run(s0, spec, initial_state=start)
        assert np.all(result.final_state.x >= start.x)
        assert start.x.tolist() == [[4, 0], [0, 4]]
        assert np.array_equal(result.replay().x, result.final_state.x)

    def test_placement_respected(self) -> None:
        scenario = make_scenario(
            [[10, 10], [10, 10]], [[1, 1], [2, 1]], allowed=[[1], [1, 2]]
        )
        result = run(scenario, policy("drf", ServerPolicy.RRR, seed=8))
        assert result.final_state.x[0, 1] == 0
        assert result.final_state.maximal()

    def test_one_round_per_placement(self, s0: Scenario) -> None:
        seed = 31
        offers = RoundRobinOffers(2, RngStream(seed))
        result = run(s0, policy("drf", ServerPolicy.RRR, seed=seed), offers=offers)
        assert offers.rounds == len(result.trace)
        # each placement walks a fresh permutation to the first fitting server
        rng = RngStream(seed)
        state = AllocationState(s0)
        for step in result.trace:
            n = s0.framework_index(step.framework_id)
            first = next(i for i in rng.permutation(2) if state.fits(n, i))
            assert s0.servers[first].id == step.server_id
            state.apply_increment(n, first)

    def test_server_first_scores_minimal(self, s0: Scenario) -> None:
        spec = policy("psdsf-server", ServerPolicy.RRR, seed=21)
        result = run(s0, spec)
        state = AllocationState(s0)
        for step in result.trace:
            n = s0.framework_index(step.framework_id)
            j = s0.server_index(step.server_id)
            assert pair_score(s0, state, spec.criterion, n, j) == step.score
            for m in s0.users(j):
                if state.fits(m, j):
                    assert pair_score(s0, state, spec.criterion, m, j) >= step.score
            state.apply_increment(n, j)

    def test_trace_ids(self, s0: Scenario) -> None:
        result = run(s0, policy("tsf", ServerPolicy.RRR, seed=2))
        assert [s.step for s in result.trace] == list(range(1, len(result.trace) + 1))
        assert {s.framework_id for s in result.trace} <= {1, 2}
        assert all(math.isfinite(s.score) for s in result.trace)


def test_replay_empty(s0: Scenario) -> None:
    assert replay(s0, []).x.sum() == 0


ROWS = [
    ("drf", ServerPolicy.RRR),
    ("tsf", ServerPolicy.RRR),
    ("psdsf-server", ServerPolicy.RRR),
    ("drf", ServerPolicy.BEST_FIT),
    ("psdsf-server", ServerPolicy.JOINT_MIN),
    ("rpsdsf", ServerPolicy.JOINT_MIN),
]
S0_CAPACITY = [[100, 30], [30, 100]]
S0_DEMAND = [[5, 1], [1, 5]]


class TestProperties:
    @given(row=st.sampled_from(ROWS), k=st.integers(2, 5), seed=st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_scale_covariance(
        self, row: tuple[str, ServerPolicy], k: int, seed: int
    ) -> None:
        base = make_scenario(S0_CAPACITY, S0_DEMAND)
        scaled = make_scenario(
            [[k * c for c in cap] for cap in S0_CAPACITY],
            [[k * d for d in dem] for dem in S0_DEMAND],
        )
        spec = policy(row[0], row[1], seed=seed)
        assert run(base, spec).final_state.x.tolist() == (
            run(scaled, spec).final_state.x.tolist()
        )

    @given(
        row=st.sampled_from(ROWS),
        p=st.sampled_from([0.25, 0.5, 2.0, 4.0]),
        seed=st.integers(0, 1000),
    )
    @settings(max_examples=25, deadline=None)
    def test_priority_invariance(
        self, row: tuple[str, ServerPolicy], p: float, seed: int
    ) -> None:
        base = make_scenario(S0_CAPACITY, S0_DEMAND)
        weighted = make_scenario(S0_CAPACITY, S0_DEMAND, priorities=[p, p])
        spec = policy(row[0], row[1], seed=seed)
        a = run(base, spec)
        b = run(weighted, spec)
        assert a.final_state.x.tolist() == b.final_state.x.tolist()
        assert b.total_efficiency == pytest.approx(p * a.total_efficiency)
