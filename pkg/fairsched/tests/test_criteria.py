import math

import numpy as np
import pytest

from fairsched.allocation import AllocationState
from fairsched.criteria import (
    CriterionError,
    CriterionKind,
    CriterionSpec,
    criterion_weights,
    dominant_index,
    framework_score,
    pair_score,
    parse_criterion,
    score_drf,
    score_generic,
    score_psdsf_global,
    score_psdsf_server,
    score_rpsdsf,
    score_tsf,
    task_capacity,
)
from fairsched.scenario import Scenario, make_scenario


def state(scenario: Scenario, x: list[list[int]]) -> AllocationState:
    return AllocationState.from_matrix(scenario, x)


class TestFrameworkScores:
    def test_drf(self, s0: Scenario) -> None:
        st = state(s0, [[2, 0], [1, 0]])
        assert score_drf(s0, st, 0).value == pytest.approx(10 / 130)
        assert score_drf(s0, st, 1).value == pytest.approx(5 / 130)

    def test_drf_priority(self) -> None:
        scenario = make_scenario([[10, 10]], [[1, 2]], priorities=[2])
        st = state(scenario, [[4]])
        assert score_drf(scenario, st, 0).value == pytest.approx(4 * 0.2 / 2)

    def test_generic(self, s0: Scenario) -> None:
        spec = CriterionSpec(CriterionKind.GENERIC, ((0.05, 1 / 6), (0.05, 1 / 6)))
        st = state(s0, [[10, 0], [0, 0]])
        assert score_generic(s0, st, spec, 0).value == pytest.approx(0.5)
        assert score_generic(s0, st, spec, 1).value == 0

    def test_generic_weights_checked(self, s0: Scenario) -> None:
        st = AllocationState(s0)
        with pytest.raises(CriterionError):
            score_generic(s0, st, CriterionSpec(CriterionKind.GENERIC), 0)
        with pytest.raises(CriterionError):
            score_generic(s0, st, CriterionSpec(CriterionKind.GENERIC, ((1.0,),)), 0)
        with pytest.raises(CriterionError):
            spec = CriterionSpec(CriterionKind.GENERIC, ((1.0, 0.0), (1.0, 1.0)))
            score_generic(s0, st, spec, 0)

    def test_psdsf_global(self, s0: Scenario) -> None:
        st = state(s0, [[3, 0], [0, 0]])
        k = 0.05 + 5 / 30
        assert score_psdsf_global(s0, st, 0).value == pytest.approx(3 * k)

    def test_tsf(self, s0: Scenario) -> None:
        assert task_capacity(s0, 0) == 26
        assert task_capacity(s0, 1) == 26
        st = state(s0, [[13, 0], [0, 0]])
        assert score_tsf(s0, st, 0).value == pytest.approx(0.5)

    def test_tsf_ignores_undemanded(self) -> None:
        scenario = make_scenario([[10, 1]], [[2, 0]])
        assert task_capacity(scenario, 0) == 5

    def test_dispatch(self, s0: Scenario) -> None:
        st = state(s0, [[2, 0], [1, 0]])
        drf = parse_criterion("drf")
        assert framework_score(s0, st, drf, 0) == score_drf(s0, st, 0).value
        with pytest.raises(CriterionError):
            framework_score(s0, st, parse_criterion("psdsf-server"), 0)
        with pytest.raises(CriterionError):
            pair_score(s0, st, drf, 0, 0)


class TestServerScores:
    def test_dominant_index(self, s0: Scenario) -> None:
        assert dominant_index(s0, 0, 0) == 0
        assert dominant_index(s0, 0, 1) == 0
        assert dominant_index(s0, 1, 0) == 1

    def test_dominant_index_tie(self) -> None:
        scenario = make_scenario([[10, 20]], [[1, 2]])
        assert dominant_index(scenario, 0, 0) == 0

    def test_psdsf_server(self, s0: Scenario) -> None:
        st = state(s0, [[2, 0], [0, 0]])
        assert score_psdsf_server(s0, st, 0, 0).value == pytest.approx(0.1)
        assert score_psdsf_server(s0, st, 0, 1).value == pytest.approx(2 * 5 / 30)
        assert score_psdsf_server(s0, st, 1, 0).value == 0

    def test_disallowed(self) -> None:
        scenario = make_scenario([[4], [4]], [[1], [1]], allowed=[[2], [1, 2]])
        st = AllocationState(scenario)
        with pytest.raises(CriterionError):
            score_psdsf_server(scenario, st, 0, 0)
        with pytest.raises(CriterionError):
            score_rpsdsf(scenario, st, 0, 0)

    def test_rpsdsf(self, s0: Scenario) -> None:
        assert score_rpsdsf(s0, AllocationState(s0), 0, 0).value == 0
        st = state(s0, [[19, 0], [0, 0]])  # server 1 residual (5, 11)
        assert score_rpsdsf(s0, st, 0, 0).value == pytest.approx(19.0)
        assert score_rpsdsf(s0, st, 0, 1).value == pytest.approx(19 * 5 / 30)

    def test_rpsdsf_exhausted(self, s0: Scenario) -> None:
        st = state(s0, [[20, 0], [0, 0]])  # server 1 cpu used up
        assert math.isinf(score_rpsdsf(s0, st, 0, 0).value)
        assert math.isinf(score_rpsdsf(s0, st, 1, 0).value)


class TestWeights:
    def test_drf(self, s0: Scenario) -> None:
        u = criterion_weights(s0, parse_criterion("drf"))
        assert u == pytest.approx(np.full((2, 2), 5 / 130))

    def test_psdsf(self, s0: Scenario) -> None:
        u = criterion_weights(s0, parse_criterion("psdsf-server"))
        assert u == pytest.approx(np.array([[0.05, 5 / 30], [5 / 30, 0.05]]))
        k = criterion_weights(s0, parse_criterion("psdsf"))
        assert k == pytest.approx(np.full((2, 2), 0.05 + 5 / 30))

    def test_global_matches_score(self, s0: Scenario) -> None:
        st = state(s0, [[4, 1], [2, 3]])
        u = criterion_weights(s0, parse_criterion("psdsf"))
        for n in range(2):
            assert u[n] @ st.x[n] == pytest.approx(score_psdsf_global(s0, st, n).value)

    def test_tsf(self, s0: Scenario) -> None:
        u = criterion_weights(s0, parse_criterion("tsf"))
        assert u == pytest.approx(np.full((2, 2), 1 / 26))

    def test_masked(self) -> None:
        scenario = make_scenario([[4], [4]], [[1], [1]], allowed=[[2], [1, 2]])
        u = criterion_weights(scenario, parse_criterion("drf"))
        assert u[0, 0] == 0
        assert u[0, 1] == pytest.approx(1 / 8)

    def test_state_dependent(self, s0: Scenario) -> None:
        with pytest.raises(CriterionError):
            criterion_weights(s0, parse_criterion("rpsdsf"))

    def test_parse(self) -> None:
        assert parse_criterion("PSDSF-Server").kind is CriterionKind.PSDSF_SERVER
        assert parse_criterion("rpsdsf").server_specific
        assert not parse_criterion("tsf").server_specific
        with pytest.raises(CriterionError):
            parse_criterion("fifo")
