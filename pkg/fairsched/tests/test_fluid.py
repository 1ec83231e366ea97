import math

import numpy as np
import pytest

from fairsched.criteria import (
    CriterionKind,
    CriterionSpec,
    criterion_weights,
    parse_criterion,
)
from fairsched.fluid import (
    G_MAXMIN,
    FluidError,
    ObjectiveMode,
    ObjectiveSpec,
    check_full_booking,
    check_ummf,
    check_uniqueness_condition,
    parse_objective,
    prop_gap,
    prop_gap_u,
    polish,
    relabeled_totals_gap,
    sample_feasible,
    solve,
    utilization,
)
from fairsched.scenario import Scenario, make_scenario, random_scenario

PF = ObjectiveSpec(ObjectiveMode.PF_A)


class TestSolvePF:
    def test_s0(self, s0: Scenario) -> None:
        solution = solve(s0, PF)
        assert solution.totals() == pytest.approx([65 / 3, 65 / 3], abs=1e-3)
        assert solution.kkt_residual <= 1e-6
        assert solution.lambda_ is not None
        assert solution.lambda_[0] == pytest.approx([50 / 65, 15 / 65], abs=1e-4)

    def test_all_resources_booked(self, s0: Scenario) -> None:
        x = solve(s0, PF).x_star
        # every capacity constraint is tight at the optimum
        assert utilization(s0, x) == pytest.approx(np.ones((2, 2)), abs=1e-6)
        assert x[0, 0] == pytest.approx(470 / 24, abs=1e-3)

    @pytest.mark.parametrize("a", [0.5, 2.0])
    def test_other_a(self, s0: Scenario, a: float) -> None:
        solution = solve(s0, ObjectiveSpec(ObjectiveMode.PF_A, a=a))
        assert solution.totals() == pytest.approx([65 / 3, 65 / 3], abs=1e-3)

    def test_trivial(self) -> None:
        scenario = make_scenario([[10]], [[1]])
        assert solve(scenario, PF).totals() == pytest.approx([10], abs=1e-6)

    def test_relabeled(self, s0: Scenario) -> None:
        assert relabeled_totals_gap(s0, PF) <= 1e-6


class TestSolveMMF:
    def test_log1p(self, classic: Scenario) -> None:
        solution = solve(classic, ObjectiveSpec(ObjectiveMode.MMF_G))
        assert solution.totals() == pytest.approx([45 / 11, 18 / 11], abs=1e-4)

    def test_maxmin(self, classic: Scenario) -> None:
        solution = solve(classic, ObjectiveSpec(ObjectiveMode.MMF_G, g=G_MAXMIN))
        assert solution.totals() == pytest.approx([3, 2], abs=1e-5)
        assert solution.lambda_ is None
        assert math.isnan(solution.kkt_residual)
        doc = solution.to_json()
        assert doc["lambda"] is None
        assert doc["residuals"]["kkt"] is None
        assert doc["mode"] == "mmf"

    def test_u_pf_matches_pf(self, s0: Scenario) -> None:
        # DRF weights are uniform on s0, so log U_n = log x_n + const
        solution = solve(s0, ObjectiveSpec(ObjectiveMode.U_PF))
        assert solution.totals() == pytest.approx([65 / 3, 65 / 3], abs=1e-3)


class TestPolish:
    EXACT = np.array([[470, 50], [50, 470]]) / 24

    def test_recovers_optimum(self, s0: Scenario) -> None:
        rough = self.EXACT * (1 - 3e-6)
        np.testing.assert_allclose(polish(s0, PF, rough), self.EXACT, rtol=0, atol=1e-9)

    def test_solve_is_polished(self, s0: Scenario) -> None:
        solution = solve(s0, PF)
        assert solution.kkt_residual <= 1e-9
        np.testing.assert_allclose(solution.x_star, self.EXACT, rtol=0, atol=1e-8)

    def test_interior_point_unchanged(self, s0: Scenario) -> None:
        # nothing booked: no stationary point to refine towards
        half = self.EXACT / 2
        assert np.array_equal(polish(s0, PF, half), half)


class TestChecks:
    def test_full_booking(self, s0: Scenario) -> None:
        solution = solve(s0, PF)
        assert check_full_booking(s0, solution) == [True, True]
        assert check_full_booking(s0, solution.x_star / 2) == [False, False]

    def test_prop_gap(self, s0: Scenario) -> None:
        x_star = solve(s0, PF)
        gap = prop_gap(s0, [[19, 0], [2, 20]], x_star, a=1)
        assert gap == pytest.approx(-7 / 65, abs=1e-4)
        with pytest.raises(FluidError):
            prop_gap(s0, [19, 22], [10, 0], a=1)

    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
    def test_prop_gap_samples(self, s0: Scenario, a: float) -> None:
        x_star = solve(s0, ObjectiveSpec(ObjectiveMode.PF_A, a=a))
        for x in sample_feasible(s0, 1000, seed=int(a * 10)):
            assert np.all(utilization(s0, x) <= 1 + 1e-12)
            assert prop_gap(s0, x, x_star, a) <= 1e-6

    def test_prop_gap_u(self) -> None:
        assert prop_gap_u([1, 3], [2, 2], [1, 1]) == pytest.approx(0)
        assert prop_gap_u([1, 1], [2, 2], [1, 1]) == pytest.approx(-1)
        with pytest.raises(FluidError):
            prop_gap_u([1, 1], [0, 2], [1, 1])

    def test_ummf(self, classic: Scenario) -> None:
        u = criterion_weights(classic, parse_criterion("drf"))
        assert check_ummf(classic, [[3], [2]], u).holds
        # feasible, r1 booked, yet framework 1 (U = 8/9) outscores 2 (U = 5/9)
        unfair = [[4], [5 / 3]]
        assert np.all(utilization(classic, unfair) <= 1 + 1e-12)
        report = check_ummf(classic, unfair, u)
        assert not report.holds
        assert report.violations == [(1, 2, 1)]
        # a server with room left never counts against the allocation
        assert check_ummf(classic, [[4], [0]], u).holds

    def test_uniqueness(self, s0: Scenario) -> None:
        u = criterion_weights(s0, parse_criterion("drf"))
        report = check_uniqueness_condition(s0, u)
        assert not report.holds
        assert report.conflicts == [(1, 2, 1), (1, 2, 2)]
        twins = make_scenario([[10, 10]], [[1, 2], [1, 2]])
        assert check_uniqueness_condition(twins, np.ones((2, 1))).holds


class TestObjective:
    def test_parse(self) -> None:
        spec = parse_objective("PF", a=2)
        assert spec.mode is ObjectiveMode.PF_A and spec.a == 2
        generic = CriterionSpec(CriterionKind.GENERIC, ((1.0,),))
        assert parse_objective("mmf", criterion=generic).criterion is generic

    def test_bad(self) -> None:
        with pytest.raises(FluidError):
            parse_objective("fifo")
        with pytest.raises(FluidError):
            parse_objective("pf", a=0)
        with pytest.raises(FluidError):
            parse_objective("pf", g=G_MAXMIN)
        with pytest.raises(FluidError):
            parse_objective("mmf", g="sqrt")


def corpus() -> list[Scenario]:
    scenarios = [
        random_scenario(seed, 2 + seed % 3, 2 + seed % 2, 2 + (seed // 2) % 2)
        for seed in range(25)
    ]
    classic = make_scenario([[9, 18]], [[1, 4], [3, 1]])
    s0 = make_scenario([[100, 30], [30, 100]], [[5, 1], [1, 5]])
    return [s0, classic] + scenarios


CORPUS = corpus()


class TestCorpus:
    @pytest.mark.parametrize("scenario", CORPUS)
    def test_mmf_books_every_server(self, scenario: Scenario) -> None:
        solution = solve(scenario, ObjectiveSpec(ObjectiveMode.MMF_G))
        assert all(check_full_booking(scenario, solution))

    @pytest.mark.parametrize("scenario", CORPUS)
    def test_pf_gap(self, scenario: Scenario) -> None:
        for a in (0.5, 1.0, 2.0):
            x_star = solve(scenario, ObjectiveSpec(ObjectiveMode.PF_A, a=a))
            gaps = [
                prop_gap(scenario, x, x_star, a)
                for x in sample_feasible(scenario, 1000, seed=7)
            ]
            assert max(gaps) <= 1e-6

    @pytest.mark.parametrize("scenario", CORPUS)
    def test_u_pf_reduces_to_pf(self, scenario: Scenario) -> None:
        totals = solve(scenario, PF).totals()
        for name in ("drf", "psdsf"):
            criterion = parse_criterion(name)
            objective = ObjectiveSpec(ObjectiveMode.U_PF, criterion=criterion)
            assert solve(scenario, objective).totals() == pytest.approx(
                totals, abs=1e-5
            )
