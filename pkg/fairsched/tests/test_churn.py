import numpy as np
import pytest

from fairsched.allocation import AllocationState
from fairsched.churn import (
    EventError,
    FrameworkArrival,
    FrameworkDeparture,
    apply_event,
    run_with_churn,
)
from fairsched.criteria import parse_criterion
from fairsched.filling import PolicySpec, ServerPolicy
from fairsched.scenario import FrameworkSpec, Scenario


def filled(s0: Scenario) -> AllocationState:
    return AllocationState.from_matrix(s0, [[19, 0], [2, 20]])


class TestApplyEvent:
    def test_departure(self, s0: Scenario) -> None:
        before = filled(s0)
        after = apply_event(before, FrameworkDeparture(2))
        assert [f.id for f in after.scenario.frameworks] == [1]
        assert after.x.tolist() == [[19, 0]]
        assert after.residual.tolist() == [[5, 11], [30, 100]]
        # the input state is untouched
        assert before.x.tolist() == [[19, 0], [2, 20]]

    def test_arrival_then_departure(self, s0: Scenario) -> None:
        before = filled(s0)
        arrived = apply_event(before, FrameworkArrival(FrameworkSpec(3, (2.0, 2.0))))
        assert arrived.x.tolist() == [[19, 0], [2, 20], [0, 0]]
        back = apply_event(arrived, FrameworkDeparture(3))
        assert back.scenario == s0
        assert np.array_equal(back.x, before.x)
        assert np.array_equal(back.residual, before.residual)

    def test_bad_events(self, s0: Scenario) -> None:
        with pytest.raises(EventError):
            apply_event(filled(s0), FrameworkArrival(FrameworkSpec(1, (1.0, 1.0))))
        with pytest.raises(EventError):
            apply_event(filled(s0), FrameworkDeparture(9))


class TestRunWithChurn:
    def test_departure_refill(self, s0: Scenario) -> None:
        spec = PolicySpec(parse_criterion("drf"), ServerPolicy.BEST_FIT)
        results = run_with_churn(s0, spec, [FrameworkDeparture(2)])
        assert len(results) == 2
        assert results[0].total_efficiency == 41
        # framework 1 keeps its tasks and takes what 2 left behind
        assert results[1].final_state.x.tolist() == [[20, 6]]

    def test_arrival_no_revocation(self, s0: Scenario) -> None:
        spec = PolicySpec(parse_criterion("drf"), ServerPolicy.RRR, seed=21)
        events = [FrameworkArrival(FrameworkSpec(3, (1.0, 1.0)))]
        first, second = run_with_churn(s0, spec, events)
        assert np.all(second.final_state.x[:2] >= first.final_state.x)
        assert second.final_state.maximal()
        assert second.initial_x is not None
        assert second.initial_x[2].sum() == 0
