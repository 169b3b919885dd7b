import numpy as np
import pytest

from conftest import matrix_from_array, registry_from_costs
from oracles import random_instance

from toolrouter.assignment import Strategy, best_performance, fixed_tool, max_achievable_mean
from toolrouter.core import Assignment, LabeledQuery, label_matrix
from toolrouter.errors import MissingTruthError
from toolrouter.evaluation import (
    compare_methods,
    cost_accuracy_curve,
    evaluate,
    win_tie_lose,
)


def truth_from_matrix(matrix):
    out = []
    for i, qid in enumerate(matrix.query_ids):
        labels = {t: float(matrix.scores[i, j]) for j, t in enumerate(matrix.tool_ids)}
        out.append(LabeledQuery(id=qid, query=f"query {qid}", labels=labels))
    return out


class TestEvaluate:
    def test_perfect_selection(self):
        reg = registry_from_costs([1.0, 1.0])
        m = matrix_from_array([[1, 0], [0, 1]], reg)
        truth = truth_from_matrix(m)
        a = Assignment.from_indices(m, reg, [0, 1])
        assert evaluate(a, truth, reg).accuracy == 1.0

    def test_inverted_selection(self):
        reg = registry_from_costs([1.0, 1.0])
        m = matrix_from_array([[1, 0], [0, 1]], reg)
        truth = truth_from_matrix(m)
        a = Assignment.from_indices(m, reg, [1, 0])
        assert evaluate(a, truth, reg).accuracy == 0.0

    def test_argmax_selection_mean(self):
        reg = registry_from_costs([1.0, 1.0])
        m = matrix_from_array([[0.5, 0.2], [0.3, 0.9]], reg)
        truth = truth_from_matrix(m)
        a = best_performance(m, reg)
        report = evaluate(a, truth, reg)
        assert report.accuracy == pytest.approx(0.7)

    def test_shares_sum_to_one(self):
        reg = registry_from_costs([0.0, 1.0, 2.0])
        rng = np.random.default_rng(3)
        m = matrix_from_array(rng.uniform(0, 1, (17, 3)), reg)
        truth = truth_from_matrix(m)
        report = evaluate(best_performance(m, reg), truth, reg)
        assert sum(report.per_tool_share.values()) == pytest.approx(1.0, abs=1e-9)
        assert report.n == 17

    def test_missing_truth_named(self):
        reg = registry_from_costs([1.0])
        m = matrix_from_array([[0.5]], reg)
        a = Assignment.from_indices(m, reg, [0])
        with pytest.raises(MissingTruthError, match="q0"):
            evaluate(a, [], reg)

    def test_order_invariant(self):
        reg = registry_from_costs([1.0, 2.0])
        m = matrix_from_array([[0.4, 0.6], [0.7, 0.1], [0.2, 0.9]], reg)
        truth = truth_from_matrix(m)
        a = best_performance(m, reg)
        fwd = evaluate(a, truth, reg)
        rev = evaluate(a, list(reversed(truth)), reg)
        assert fwd.accuracy == rev.accuracy


class TestCurve:
    def test_grid_zero_equals_cheapest(self):
        reg = registry_from_costs([0.5, 2.0])
        m = matrix_from_array([[0.3, 0.9], [0.4, 0.8]], reg)
        truth = truth_from_matrix(m)
        points = cost_accuracy_curve(m, truth, reg, grid=[0.0])
        assert len(points) == 1 and points[0].feasible
        assert points[0].average_cost == pytest.approx(0.5)
        assert points[0].accuracy == pytest.approx(0.35)

    def test_above_max_is_infeasible_point(self):
        reg = registry_from_costs([0.5, 2.0])
        m = matrix_from_array([[0.3, 0.9], [0.4, 0.8]], reg)
        truth = truth_from_matrix(m)
        points = cost_accuracy_curve(m, truth, reg, grid=[0.99])
        assert points == [
            type(points[0])(p_min=0.99, average_cost=None, accuracy=None, feasible=False)
        ]

    def test_costs_nondecreasing_on_random_instances(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            scores, costs, _ = random_instance(rng, max_n=8, max_m=3)
            reg = registry_from_costs(costs)
            m = matrix_from_array(scores, reg)
            truth = truth_from_matrix(m)
            grid = np.linspace(0, max_achievable_mean(m, reg), 8)
            points = cost_accuracy_curve(m, truth, reg, grid=grid)
            feas = [p for p in points if p.feasible]
            assert len(feas) == len(points)
            for a, b in zip(feas, feas[1:]):
                assert b.average_cost >= a.average_cost - 1e-9

    def test_auto_grid_spans_to_best_performance(self):
        rng = np.random.default_rng(42)
        scores, costs, _ = random_instance(rng, max_n=10, max_m=3)
        reg = registry_from_costs(costs)
        m = matrix_from_array(scores, reg)
        truth = truth_from_matrix(m)
        points = cost_accuracy_curve(m, truth, reg)
        assert len(points) == 20
        assert all(p.feasible for p in points)
        assert [p.p_min for p in points] == sorted(p.p_min for p in points)
        top = points[-1]
        bp = best_performance(m, reg)
        assert top.mean_predicted_score == pytest.approx(bp.mean_predicted_score, abs=1e-9)


class TestWinTieLose:
    def test_self_comparison_all_tie(self):
        reg = registry_from_costs([1.0, 2.0])
        m = matrix_from_array([[0.4, 0.6], [0.7, 0.1]], reg)
        truth = truth_from_matrix(m)
        sel = best_performance(m, reg).selections
        wtl = win_tie_lose(truth, reg, sel, dict(sel))
        assert wtl.tie == 1.0 and wtl.win == 0.0 and wtl.lose == 0.0

    def test_symmetric_case(self):
        reg = registry_from_costs([1.0, 1.0])
        m = matrix_from_array([[1, 0], [0, 1]], reg)
        truth = truth_from_matrix(m)
        a = {"q0": "t0", "q1": "t0"}
        b = {"q0": "t1", "q1": "t1"}
        wtl = win_tie_lose(truth, reg, a, b)
        assert wtl.win == 0.5 and wtl.lose == 0.5 and wtl.tie == 0.0

    def test_rates_sum_exactly_to_one(self):
        rng = np.random.default_rng(17)
        reg = registry_from_costs([1.0, 2.0, 0.5])
        for n in (3, 7, 11):
            m = matrix_from_array(rng.uniform(0, 1, (n, 3)), reg)
            truth = truth_from_matrix(m)
            a = {q: "t0" for q in m.query_ids}
            b = {q: "t1" for q in m.query_ids}
            wtl = win_tie_lose(truth, reg, a, b)
            assert wtl.win + wtl.tie + wtl.lose == 1.0

    def test_tolerance_turns_close_calls_into_ties(self):
        reg = registry_from_costs([1.0, 1.0])
        m = matrix_from_array([[0.50, 0.52]], reg)
        truth = truth_from_matrix(m)
        a = {"q0": "t1"}
        b = {"q0": "t0"}
        assert win_tie_lose(truth, reg, a, b).win == 1.0
        assert win_tie_lose(truth, reg, a, b, tie_tolerance=0.05).tie == 1.0

    def test_coverage_error(self):
        reg = registry_from_costs([1.0])
        m = matrix_from_array([[0.5]], reg)
        truth = truth_from_matrix(m)
        with pytest.raises(MissingTruthError):
            win_tie_lose(truth, reg, {}, {"q0": "t0"})


class TestCompareMethods:
    def test_one_row_per_fixed_tool(self):
        reg = registry_from_costs([0.0, 1.0])
        m = matrix_from_array([[0.2, 0.8], [0.6, 0.4]], reg)
        truth = truth_from_matrix(m)
        rows = compare_methods(
            m, truth, reg, [Strategy.fixed(t) for t in reg.ids]
        )
        assert [r.strategy for r in rows] == ["fixed:t0", "fixed:t1"]

    def test_oracle_routing_dominates_every_fixed_row(self):
        # scores equal to the true labels: per-query max is at least any
        # column mean, so best_performance cannot lose to a fixed tool
        rng = np.random.default_rng(23)
        reg = registry_from_costs([0.0, 0.33, 1.0, 2.0])
        truth_matrix = matrix_from_array(rng.uniform(0, 1, (60, 4)), reg)
        truth = truth_from_matrix(truth_matrix)
        scores = label_matrix(truth, reg)
        strategies = [Strategy.best_performance()] + [Strategy.fixed(t) for t in reg.ids]
        rows = compare_methods(scores, truth, reg, strategies)
        best = rows[0]
        for fixed_row in rows[1:]:
            assert best.accuracy >= fixed_row.accuracy

    def test_empty_strategy_list(self):
        reg = registry_from_costs([1.0])
        m = matrix_from_array([[0.5]], reg)
        assert compare_methods(m, truth_from_matrix(m), reg, []) == []
