"""Metrics over assignments and true labels: realized accuracy, average
cost, cost-accuracy curves and pairwise win/tie/lose rates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .assignment import (
    CostSavingRequest,
    SolveDiagnostics,
    Strategy,
    cost_saving,
    max_achievable_mean,
    route,
)
from .core import Assignment, LabeledQuery, ScoreMatrix, ToolRegistry
from .errors import InfeasibleError, MissingTruthError

DEFAULT_CURVE_POINTS = 20


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    average_cost: float
    per_tool_share: Mapping[str, float]
    n: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "average_cost": self.average_cost,
            "per_tool_share": dict(self.per_tool_share),
            "n": self.n,
        }


@dataclass(frozen=True)
class CurvePoint:
    p_min: float
    average_cost: Optional[float]
    accuracy: Optional[float]
    feasible: bool
    mean_predicted_score: Optional[float] = None  # constraint side, for calibration checks


@dataclass(frozen=True)
class WinTieLose:
    win: float
    tie: float
    lose: float
    tie_tolerance: float

    def to_dict(self) -> dict:
        return {
            "win": self.win,
            "tie": self.tie,
            "lose": self.lose,
            "tie_tolerance": self.tie_tolerance,
        }


@dataclass(frozen=True)
class MethodResult:
    strategy: str
    accuracy: float
    average_cost: float


def _truth_index(truth: Sequence[LabeledQuery]) -> dict[str, LabeledQuery]:
    return {q.id: q for q in truth}


def _true_label(by_id: dict[str, LabeledQuery], qid: str, tool_id: str) -> float:
    q = by_id.get(qid)
    if q is None:
        raise MissingTruthError(f"no truth entry for query {qid!r}")
    if tool_id not in q.labels:
        raise MissingTruthError(f"query {qid!r} has no true label for tool {tool_id!r}")
    return float(q.labels[tool_id])


def evaluate(
    assignment: Assignment, truth: Sequence[LabeledQuery], registry: ToolRegistry
) -> EvalReport:
    """Realized accuracy of a selection: the mean true label of the selected
    tools, plus average cost and per-tool traffic shares."""
    by_id = _truth_index(truth)
    n = len(assignment.selections)
    acc_sum = 0.0
    cost_sum = 0.0
    counts = {tid: 0 for tid in registry.ids}
    for qid, tid in assignment.selections.items():
        acc_sum += _true_label(by_id, qid, tid)
        cost_sum += registry.cost_of(tid)
        counts[tid] = counts.get(tid, 0) + 1
    shares = {tid: (c / n if n else 0.0) for tid, c in counts.items()}
    return EvalReport(
        accuracy=acc_sum / n if n else 0.0,
        average_cost=cost_sum / n if n else 0.0,
        per_tool_share=shares,
        n=n,
    )


def cost_accuracy_curve(
    scores: ScoreMatrix,
    truth: Sequence[LabeledQuery],
    registry: ToolRegistry,
    grid: Optional[Sequence[float]] = None,
) -> list[CurvePoint]:
    """Sweep the cost-saving threshold and evaluate each solution.

    The default grid spans from the mean predicted score of the all-cheapest
    assignment up to the max achievable mean, DEFAULT_CURVE_POINTS values.
    Thresholds beyond the achievable mean yield infeasible points with no
    cost or accuracy.
    """
    if grid is None:
        cheapest, _ = cost_saving(CostSavingRequest(scores, registry, 0.0, "auto"))
        hi = max_achievable_mean(scores, registry)
        lo = min(cheapest.mean_predicted_score, hi)
        grid = np.linspace(lo, hi, DEFAULT_CURVE_POINTS).tolist()
    points: list[CurvePoint] = []
    for p_min in sorted(float(p) for p in grid):
        try:
            assignment, _ = cost_saving(CostSavingRequest(scores, registry, p_min, "auto"))
        except InfeasibleError:
            points.append(CurvePoint(p_min, None, None, False, None))
            continue
        report = evaluate(assignment, truth, registry)
        points.append(
            CurvePoint(
                p_min=p_min,
                average_cost=report.average_cost,
                accuracy=report.accuracy,
                feasible=True,
                mean_predicted_score=assignment.mean_predicted_score,
            )
        )
    return points


def win_tie_lose(
    truth: Sequence[LabeledQuery],
    registry: ToolRegistry,
    method_a: Mapping[str, str],
    method_b: Mapping[str, str],
    tie_tolerance: float = 0.0,
) -> WinTieLose:
    """Per-query comparison of two selection maps on true labels.

    win counts queries where a beats b by more than the tolerance; tie is
    computed as the exact remainder so the three rates always sum to 1.
    """
    if tie_tolerance < 0:
        raise MissingTruthError("tie_tolerance must be >= 0")
    by_id = _truth_index(truth)
    n = len(truth)
    if n == 0:
        raise MissingTruthError("empty truth set")
    wins = 0
    loses = 0
    for q in truth:
        if q.id not in method_a or q.id not in method_b:
            raise MissingTruthError(f"selection maps do not cover query {q.id!r}")
        la = _true_label(by_id, q.id, method_a[q.id])
        lb = _true_label(by_id, q.id, method_b[q.id])
        if la - lb > tie_tolerance:
            wins += 1
        elif lb - la > tie_tolerance:
            loses += 1
    win = wins / n
    lose = loses / n
    return WinTieLose(win=win, tie=1.0 - win - lose, lose=lose, tie_tolerance=tie_tolerance)


def compare_methods(
    scores: ScoreMatrix,
    truth: Sequence[LabeledQuery],
    registry: ToolRegistry,
    strategies: Sequence[Strategy],
) -> list[MethodResult]:
    """Run each strategy and tabulate realized accuracy and average cost."""
    rows: list[MethodResult] = []
    for strategy in strategies:
        assignment, _ = route(scores, registry, strategy)
        report = evaluate(assignment, truth, registry)
        rows.append(
            MethodResult(
                strategy=strategy.describe(),
                accuracy=report.accuracy,
                average_cost=report.average_cost,
            )
        )
    return rows


def plot_curve(points: Sequence[CurvePoint], path) -> None:
    """Render the cost-accuracy trade-off to an image file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [p.average_cost for p in points if p.feasible]
    ys = [p.accuracy for p in points if p.feasible]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel("average cost per query")
    ax.set_ylabel("accuracy")
    ax.set_title("cost-accuracy trade-off")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
