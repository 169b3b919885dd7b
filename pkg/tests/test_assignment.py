import numpy as np
import pytest

from conftest import matrix_from_array, registry_from_costs
from oracles import enumerate_cost_saving, random_instance

from toolrouter.assignment import (
    CostSavingRequest,
    Strategy,
    _argmax_selection,
    best_performance,
    cost_saving,
    cost_saving_exact,
    cost_saving_parametric,
    fixed_tool,
    max_achievable_mean,
    parse_strategy,
    route,
)
from toolrouter.errors import (
    DataError,
    InfeasibleError,
    InvalidConfigError,
    SizeBudgetExceededError,
    UnknownToolError,
)


class TestFixedTool:
    def test_cost_arithmetic(self):
        reg = registry_from_costs([1.0, 2.0])
        m = matrix_from_array([[0.5, 0.5]] * 3, reg)
        a = fixed_tool(m, reg, "t0")
        assert a.total_cost == 3.0 and a.average_cost == 1.0

    def test_selection_ignores_scores(self):
        reg = registry_from_costs([1.0, 2.0])
        m = matrix_from_array([[0.1, 0.9]], reg)
        a = fixed_tool(m, reg, "t0")
        assert a.mean_predicted_score == pytest.approx(0.1)

    def test_unknown_tool(self):
        reg = registry_from_costs([1.0])
        m = matrix_from_array([[0.5]], reg)
        with pytest.raises(UnknownToolError):
            fixed_tool(m, reg, "duckduck")


class TestBestPerformance:
    def test_argmax_beats_cost(self):
        reg = registry_from_costs([0.33, 2.0])
        m = matrix_from_array([[0.3, 0.7]], reg)
        a = best_performance(m, reg)
        assert a.selections["q0"] == "t1"

    def test_tie_breaks_to_cheaper(self):
        reg = registry_from_costs([2.0, 1.0])
        m = matrix_from_array([[0.7, 0.7]], reg)
        a = best_performance(m, reg)
        assert a.selections["q0"] == "t1"

    def test_tie_breaks_to_lower_index_at_equal_cost(self):
        reg = registry_from_costs([1.0, 1.0])
        m = matrix_from_array([[0.7, 0.7]], reg)
        assert best_performance(m, reg).selections["q0"] == "t0"

    def test_single_tool(self):
        reg = registry_from_costs([1.0])
        m = matrix_from_array([[0.1], [0.9]], reg)
        a = best_performance(m, reg)
        assert set(a.selections.values()) == {"t0"}

    def test_argmax_scale_invariant(self):
        # raw-array harness: scaling rows by a positive constant cannot
        # change the argmax, even when the scale leaves [0,1]
        rng = np.random.default_rng(5)
        scores = rng.uniform(0, 1, (20, 3))
        costs = np.array([1.0, 0.5, 2.0])
        regidx = np.arange(3)
        base = _argmax_selection(scores, costs, regidx)
        scaled = _argmax_selection(scores * 3.7, costs, regidx)
        assert np.array_equal(base, scaled)


class TestCostSavingExact:
    def test_worked_example(self, example_matrix, two_tool_registry):
        a, diag = cost_saving_exact(CostSavingRequest(example_matrix, two_tool_registry, 0.8))
        assert a.selections == {"q1": "t2", "q2": "t1"}
        assert a.total_cost == 3.0
        assert diag.optimal_proved and diag.gap_bound == 0.0
        # agrees with the brute-force reference
        oracle = enumerate_cost_saving(
            example_matrix.scores, np.array([1.0, 2.0]), 0.8
        )
        assert oracle[0] == 3.0 and oracle[2] == [1, 0]

    def test_threshold_zero_takes_cheapest(self, example_matrix, two_tool_registry):
        a, _ = cost_saving_exact(CostSavingRequest(example_matrix, two_tool_registry, 0.0))
        assert a.selections == {"q1": "t1", "q2": "t1"}
        assert a.total_cost == 2.0

    def test_infeasible_carries_certificate(self, example_matrix, two_tool_registry):
        with pytest.raises(InfeasibleError) as err:
            cost_saving_exact(CostSavingRequest(example_matrix, two_tool_registry, 0.9))
        assert err.value.max_achievable_mean == pytest.approx(0.875)

    def test_default_budget_rejects_large_instances(self):
        reg = registry_from_costs([1.0, 2.0])
        rng = np.random.default_rng(0)
        m = matrix_from_array(rng.uniform(0, 1, (30, 2)), reg)
        with pytest.raises(SizeBudgetExceededError):
            cost_saving_exact(CostSavingRequest(m, reg, 0.0))
        a, _ = cost_saving_exact(CostSavingRequest(m, reg, 0.0), node_budget=10 ** 6)
        assert a.total_cost == 30.0

    def test_empty_matrix(self):
        reg = registry_from_costs([1.0, 2.0])
        m = matrix_from_array(np.empty((0, 2)), reg)
        a, diag = cost_saving_exact(CostSavingRequest(m, reg, 0.7))
        assert a.selections == {} and a.total_cost == 0.0 and diag.optimal_proved

    def test_matches_enumeration_on_random_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(150):
            scores, costs, p_min = random_instance(rng, max_n=8, max_m=4)
            reg = registry_from_costs(costs)
            m = matrix_from_array(scores, reg)
            oracle = enumerate_cost_saving(scores, costs, p_min)
            try:
                a, _ = cost_saving_exact(CostSavingRequest(m, reg, p_min))
                got = (a.total_cost, [reg.index_of(t) for t in a.selections.values()])
            except InfeasibleError:
                got = None
            if oracle is None:
                assert got is None
            else:
                assert got is not None
                assert got[0] == oracle[0]
                assert got[1] == oracle[2]  # canonical tie-break, selection-exact


class TestCostSavingParametric:
    def test_threshold_zero_matches_exact(self, example_matrix, two_tool_registry):
        pe, _ = cost_saving_exact(CostSavingRequest(example_matrix, two_tool_registry, 0.0))
        pp, diag = cost_saving_parametric(
            CostSavingRequest(example_matrix, two_tool_registry, 0.0)
        )
        assert pp.selections == pe.selections
        assert diag.optimal_proved and diag.gap_bound == 0.0

    def test_threshold_at_max_matches_best_performance(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            scores, costs, _ = random_instance(rng, max_n=12, max_m=4)
            reg = registry_from_costs(costs)
            m = matrix_from_array(scores, reg)
            hi = max_achievable_mean(m, reg)
            a, _ = cost_saving_parametric(CostSavingRequest(m, reg, hi))
            assert a.selections == best_performance(m, reg).selections

    def test_soundness_against_exact(self):
        rng = np.random.default_rng(321)
        for _ in range(120):
            scores, costs, p_min = random_instance(rng, max_n=12, max_m=4)
            reg = registry_from_costs(costs)
            m = matrix_from_array(scores, reg)
            try:
                ae, _ = cost_saving_exact(CostSavingRequest(m, reg, p_min))
                exact_cost = ae.total_cost
            except InfeasibleError:
                exact_cost = None
            try:
                ap, diag = cost_saving_parametric(CostSavingRequest(m, reg, p_min))
            except InfeasibleError:
                assert exact_cost is None
                continue
            assert exact_cost is not None  # parametric feasible iff exact feasible
            assert ap.total_cost >= exact_cost - 1e-9
            assert ap.total_cost - exact_cost <= (costs.max() - costs.min()) + 1e-9
            assert ap.total_cost >= diag.lp_bound - 1e-9

    def test_infeasible_same_certificate_as_exact(self, example_matrix, two_tool_registry):
        with pytest.raises(InfeasibleError) as err:
            cost_saving_parametric(CostSavingRequest(example_matrix, two_tool_registry, 0.95))
        assert err.value.max_achievable_mean == pytest.approx(0.875)


class TestThresholdMonotonicity:
    def test_exact_cost_nondecreasing(self):
        rng = np.random.default_rng(555)
        for _ in range(40):
            scores, costs, _ = random_instance(rng, max_n=7, max_m=4)
            reg = registry_from_costs(costs)
            m = matrix_from_array(scores, reg)
            hi = max_achievable_mean(m, reg)
            prev = None
            for p_min in np.linspace(0.0, hi, 6):
                a, _ = cost_saving_exact(CostSavingRequest(m, reg, float(p_min)))
                if prev is not None:
                    assert a.total_cost >= prev - 1e-9
                prev = a.total_cost


class TestDominance:
    def test_best_performance_dominates_fixed(self):
        rng = np.random.default_rng(888)
        for _ in range(30):
            scores, costs, _ = random_instance(rng, max_n=15, max_m=4)
            reg = registry_from_costs(costs)
            m = matrix_from_array(scores, reg)
            best = best_performance(m, reg).mean_predicted_score
            for tid in reg.ids:
                assert best >= fixed_tool(m, reg, tid).mean_predicted_score - 1e-12


class TestRoute:
    def test_fixed_dispatch(self, example_matrix, two_tool_registry):
        a, _ = route(example_matrix, two_tool_registry, Strategy.fixed("t2"))
        assert a.selections == fixed_tool(example_matrix, two_tool_registry, "t2").selections

    def test_cost_saving_zero(self, example_matrix, two_tool_registry):
        a, _ = route(example_matrix, two_tool_registry, Strategy.cost_saving(0.0))
        assert a.selections == {"q1": "t1", "q2": "t1"}

    def test_best_performance_on_worked_example(self, example_matrix, two_tool_registry):
        a, _ = route(example_matrix, two_tool_registry, Strategy.best_performance())
        assert a.selections == {"q1": "t2", "q2": "t2"}

    def test_auto_uses_parametric_above_budget(self):
        reg = registry_from_costs([0.5, 1.0])
        rng = np.random.default_rng(1)
        m = matrix_from_array(rng.uniform(0, 1, (40, 2)), reg)
        _, diag = route(m, reg, Strategy.cost_saving(0.4))
        assert diag.solver_used == "parametric"

    def test_auto_uses_exact_within_budget(self, example_matrix, two_tool_registry):
        _, diag = route(example_matrix, two_tool_registry, Strategy.cost_saving(0.5))
        assert diag.solver_used == "exact"


class TestStrategyParsing:
    def test_forms(self):
        assert parse_strategy("best_performance").kind == "best_performance"
        assert parse_strategy("fixed:google").tool_id == "google"
        assert parse_strategy("cost_saving:0.7").p_min == 0.7
        assert parse_strategy("cost_saving", p_min=0.5).p_min == 0.5

    def test_rejects_garbage(self):
        with pytest.raises(InvalidConfigError):
            parse_strategy("nearest_neighbor")
        with pytest.raises(InvalidConfigError):
            parse_strategy("cost_saving")
        with pytest.raises(InvalidConfigError):
            parse_strategy("fixed")

    def test_request_validation(self, example_matrix, two_tool_registry):
        with pytest.raises(InvalidConfigError):
            CostSavingRequest(example_matrix, two_tool_registry, 1.2)
        with pytest.raises(InvalidConfigError):
            CostSavingRequest(example_matrix, two_tool_registry, 0.5, solver="simplex")


class TestColumnAlignment:
    def test_matrix_tools_must_be_registered(self):
        reg = registry_from_costs([1.0])
        m = matrix_from_array([[0.5, 0.5]], registry_from_costs([1.0, 2.0]))
        with pytest.raises(UnknownToolError):
            best_performance(m, reg)

    def test_fixed_tool_must_have_column(self):
        reg = registry_from_costs([1.0, 2.0, 3.0])
        m = matrix_from_array([[0.5, 0.5]], registry_from_costs([1.0, 2.0]))
        with pytest.raises(DataError):
            fixed_tool(m, reg, "t2")
