"""Assignment strategies over a score matrix.

Three ways to map queries to tools:

* fixed_tool: every query goes to one chosen tool.
* best_performance: per-query argmax of the predicted scores.
* cost_saving: minimize total cost subject to the batch-average predicted
  score staying at or above a threshold. This is an integer program with a
  single coupling constraint, solved natively two ways:

  - cost_saving_exact: depth-first branch and bound. Nodes carry a lower
    bound that is the max of the remaining-min-cost bound and a Lagrangian
    bound at the multiplier found by the parametric sweep; subtrees that
    cannot reach the score target, cannot beat the incumbent cost, or can
    only tie it with a worse score are cut. Proves optimality.

  - cost_saving_parametric: sweep the multiplier lam over the breakpoints of
    the per-query rule argmin_m (C_m - lam * p_m). The mean score of the
    induced assignment is nondecreasing in lam, so the first feasible
    breakpoint brackets the LP optimum; the last infeasible assignment is
    then repaired by greedily upgrading single queries with the best
    score-per-cost ratio. Because every upgrade with the top ratio stays on
    the Lagrangian support, the repaired cost exceeds the LP bound by at
    most one query's worth of cost spread: max_m C_m - min_m C_m.

Ties always break the same way (higher score, then lower cost, then lower
registry index) so results are reproducible byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Assignment, ScoreMatrix, ToolRegistry
from .errors import DataError, InfeasibleError, InvalidConfigError, SizeBudgetExceededError

# Slack for pruning decisions only; incumbent comparisons stay exact so the
# canonical optimum survives. Accumulated float error across <= a few hundred
# additions of O(1) terms is far below this.
_PRUNE_EPS = 1e-9
# Breakpoints closer than this (relatively) are treated as one candidate.
_DEDUPE_RTOL = 1e-12
# Per-query slack in the score constraint. Without it, a threshold set to the
# max achievable mean (sum / n) can round to a target a few ulp above the sum
# itself and flip a mathematically tight instance to infeasible.
_FEAS_EPS_PER_QUERY = 1e-9

DEFAULT_EXACT_QUERY_LIMIT = 20
DEFAULT_EXACT_LEAF_LIMIT = 10 ** 7


@dataclass(frozen=True)
class SolveDiagnostics:
    solver_used: str  # "exact" | "parametric" | "none"
    optimal_proved: bool
    lp_bound: float
    gap_bound: float
    nodes_or_breakpoints: int

    def __post_init__(self):
        if self.gap_bound < 0:
            raise DataError("gap_bound must be >= 0")
        if self.optimal_proved and self.gap_bound != 0:
            raise DataError("a proved optimum must report gap_bound 0")

    def to_dict(self) -> dict:
        return {
            "solver_used": self.solver_used,
            "optimal_proved": self.optimal_proved,
            "lp_bound": self.lp_bound,
            "gap_bound": self.gap_bound,
            "nodes_or_breakpoints": self.nodes_or_breakpoints,
        }


@dataclass(frozen=True)
class CostSavingRequest:
    scores: ScoreMatrix
    registry: ToolRegistry
    p_min: float
    solver: str = "auto"

    def __post_init__(self):
        if not (0.0 <= self.p_min <= 1.0):
            raise InvalidConfigError(f"p_min must be in [0,1], got {self.p_min}")
        if self.solver not in ("exact", "parametric", "auto"):
            raise InvalidConfigError(f"unknown solver {self.solver!r}")


@dataclass(frozen=True)
class Strategy:
    """Dispatch descriptor for route(): which strategy, with its parameter."""

    kind: str
    tool_id: Optional[str] = None
    p_min: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("fixed", "best_performance", "cost_saving"):
            raise InvalidConfigError(f"unknown strategy {self.kind!r}")
        if self.kind == "fixed" and not self.tool_id:
            raise InvalidConfigError("fixed strategy needs a tool_id")
        if self.kind == "cost_saving" and self.p_min is None:
            raise InvalidConfigError("cost_saving strategy needs p_min")

    @classmethod
    def fixed(cls, tool_id: str) -> "Strategy":
        return cls("fixed", tool_id=tool_id)

    @classmethod
    def best_performance(cls) -> "Strategy":
        return cls("best_performance")

    @classmethod
    def cost_saving(cls, p_min: float) -> "Strategy":
        return cls("cost_saving", p_min=p_min)

    def describe(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.tool_id}"
        if self.kind == "cost_saving":
            return f"cost_saving:{self.p_min:g}"
        return "best_performance"


def parse_strategy(text: str, tool_id: Optional[str] = None, p_min: Optional[float] = None) -> Strategy:
    """Parse 'best_performance', 'fixed[:tool]' or 'cost_saving[:p_min]'."""
    head, _, arg = text.partition(":")
    if head == "fixed":
        return Strategy.fixed(arg or tool_id or "")
    if head == "best_performance":
        return Strategy.best_performance()
    if head == "cost_saving":
        if arg:
            try:
                p_min = float(arg)
            except ValueError:
                raise InvalidConfigError(f"bad p_min in strategy {text!r}") from None
        if p_min is None:
            raise InvalidConfigError("cost_saving strategy needs p_min")
        return Strategy.cost_saving(p_min)
    raise InvalidConfigError(f"unknown strategy {text!r}")


def score_target(n: int, p_min: float) -> float:
    """The score-sum threshold for n queries, including the float slack."""
    return n * p_min - _FEAS_EPS_PER_QUERY * max(1, n)


def feasible_score_sum(score_sum: float, n: int, p_min: float) -> bool:
    """The single feasibility predicate every solver and report shares."""
    return score_sum >= score_target(n, p_min)


def _column_arrays(scores: ScoreMatrix, registry: ToolRegistry) -> tuple[np.ndarray, np.ndarray]:
    """Per-column unit costs and registry indices for the matrix columns."""
    costs = np.array([registry.cost_of(t) for t in scores.tool_ids], dtype=np.float64)
    regidx = np.array([registry.index_of(t) for t in scores.tool_ids], dtype=np.int64)
    return costs, regidx


def _rowwise_argmin(primary: np.ndarray, *tiebreaks: np.ndarray) -> np.ndarray:
    """Index of the row-wise minimum of ``primary``, ties resolved by the
    tiebreak keys in order."""
    keys = tuple(np.broadcast_to(k, primary.shape) for k in reversed(tiebreaks))
    return np.lexsort(keys + (primary,), axis=-1)[:, 0]


def _score_sum(scores: np.ndarray, choice: Sequence[int]) -> float:
    total = 0.0
    for row, col in enumerate(choice):
        total += float(scores[row, col])
    return total


def _cost_sum(costs: np.ndarray, choice: Sequence[int]) -> float:
    total = 0.0
    for col in choice:
        total += float(costs[col])
    return total


def _argmax_selection(scores: np.ndarray, costs: np.ndarray, regidx: np.ndarray) -> np.ndarray:
    """Per-row argmax score; ties to the cheaper tool, then the lower index."""
    return _rowwise_argmin(-scores, costs, regidx)


def max_achievable_mean(scores: ScoreMatrix, registry: ToolRegistry) -> float:
    """Mean predicted score when every query takes its argmax tool; the upper
    bound of any cost_saving threshold."""
    if scores.n_queries == 0:
        return 0.0
    costs, regidx = _column_arrays(scores, registry)
    sel = _argmax_selection(scores.scores, costs, regidx)
    return _score_sum(scores.scores, sel) / scores.n_queries


def fixed_tool(scores: ScoreMatrix, registry: ToolRegistry, tool_id: str) -> Assignment:
    """Send every query to one tool."""
    registry.index_of(tool_id)  # raises UnknownToolError for unregistered ids
    if tool_id not in scores.tool_ids:
        raise DataError(f"tool {tool_id!r} has no column in the score matrix")
    col = scores.tool_ids.index(tool_id)
    return Assignment.from_indices(scores, registry, [col] * scores.n_queries)


def best_performance(scores: ScoreMatrix, registry: ToolRegistry) -> Assignment:
    """Per query, pick the tool with the highest predicted score."""
    costs, regidx = _column_arrays(scores, registry)
    sel = _argmax_selection(scores.scores, costs, regidx)
    return Assignment.from_indices(scores, registry, sel)


def _assign_at_lambda(
    scores: np.ndarray, costs: np.ndarray, regidx: np.ndarray, lam: float
) -> np.ndarray:
    """Per-query argmin of (cost - lam * score); ties to higher score, then
    lower cost, then lower index. Matches the limit from above at every
    breakpoint, so sweeping the breakpoints visits every distinct
    assignment."""
    util = costs[None, :] - lam * scores
    return _rowwise_argmin(util, -scores, costs, regidx)


def _breakpoint_candidates(scores: np.ndarray, costs: np.ndarray) -> list[float]:
    """All positive multipliers where some query's argmin can change:
    pairwise crossings (C_a - C_b) / (p_a - p_b), deduplicated."""
    n, m = scores.shape
    vals: list[float] = []
    for a in range(m):
        for b in range(a + 1, m):
            dc = costs[a] - costs[b]
            dp = scores[:, a] - scores[:, b]
            nz = dp != 0.0
            if not np.any(nz):
                continue
            lams = dc / dp[nz]
            vals.extend(float(x) for x in lams[lams > 0.0])
    vals.sort()
    out: list[float] = []
    for v in vals:
        if out and abs(v - out[-1]) <= _DEDUPE_RTOL * max(1.0, abs(out[-1])):
            continue
        out.append(v)
    return out


def _parametric_core(
    scores: np.ndarray,
    costs: np.ndarray,
    regidx: np.ndarray,
    p_min: float,
) -> tuple[np.ndarray, float, float, int]:
    """Shared engine: returns (selection, lam_star, lp_bound, n_evaluated).

    Assumes feasibility was established by the caller (max achievable mean
    >= p_min), which guarantees the sweep ends at a feasible candidate:
    the assignment at the last breakpoint is exactly the per-query argmax.
    When the first feasible candidate is not the first one overall, the
    result is repaired up from the last infeasible assignment, which keeps
    its cost within one query's cost spread of the LP bound.
    """
    n, _ = scores.shape
    target = score_target(n, p_min)
    candidates = [0.0] + _breakpoint_candidates(scores, costs)
    prev: Optional[np.ndarray] = None
    for k, lam in enumerate(candidates):
        sel = _assign_at_lambda(scores, costs, regidx, lam)
        ssum = _score_sum(scores, sel)
        if feasible_score_sum(ssum, n, p_min):
            lp_bound = _dual_value(scores, costs, lam, target)
            if k > 0 and prev is not None:
                sel = _repair_to_target(scores, costs, regidx, prev, p_min)
            return sel, lam, lp_bound, k + 1
        prev = sel
    # Rounding in the breakpoint quotients can leave the last evaluated
    # assignment a hair short of the true limit, so close the sweep with its
    # lam -> infinity endpoint: the plain argmax selection.
    sel = _argmax_selection(scores, costs, regidx)
    if not feasible_score_sum(_score_sum(scores, sel), n, p_min):
        raise AssertionError("sweep ended infeasible despite a feasible argmax assignment")
    lam = candidates[-1]
    lp_bound = _dual_value(scores, costs, lam, target)
    if prev is not None:
        sel = _repair_to_target(scores, costs, regidx, prev, p_min)
    return sel, lam, lp_bound, len(candidates) + 1


def _dual_value(scores: np.ndarray, costs: np.ndarray, lam: float, target: float) -> float:
    """Lagrangian dual at lam: a valid lower bound on any feasible cost."""
    util_min = (costs[None, :] - lam * scores).min(axis=1)
    return float(util_min.sum()) + lam * target


def _repair_to_target(
    scores: np.ndarray,
    costs: np.ndarray,
    regidx: np.ndarray,
    sel: np.ndarray,
    p_min: float,
) -> np.ndarray:
    """Upgrade single queries, best score-gain per cost first, until the
    selection meets the threshold. Every top-ratio upgrade stays on the
    Lagrangian support, which is what bounds the final cost.

    The running sum is recomputed canonically (query order) each round so
    the stopping rule agrees bit for bit with every other feasibility check.
    """
    sel = sel.copy()
    n, m = scores.shape
    while not feasible_score_sum(_score_sum(scores, sel), n, p_min):
        best = None
        best_move = None
        for row in range(n):
            cur = sel[row]
            p0 = scores[row, cur]
            c0 = costs[cur]
            for col in range(m):
                ds = scores[row, col] - p0
                dc = costs[col] - c0
                if ds > 0.0 and dc > 0.0:
                    key = (ds / dc, ds, -row, -regidx[col])
                    if best is None or key > best:
                        best = key
                        best_move = (row, col)
        if best_move is None:
            raise AssertionError("repair ran out of upgrades before reaching the target")
        row, col = best_move
        sel[row] = col
    return sel


def _require_feasible(
    scores: np.ndarray, costs: np.ndarray, regidx: np.ndarray, p_min: float
) -> float:
    """Raise InfeasibleError (with the max achievable mean as certificate)
    when no assignment can reach p_min. Returns the max achievable sum."""
    n = scores.shape[0]
    sel = _argmax_selection(scores, costs, regidx)
    max_sum = _score_sum(scores, sel)
    if not feasible_score_sum(max_sum, n, p_min):
        raise InfeasibleError(p_min, max_sum / n if n else 0.0)
    return max_sum


def cost_saving_parametric(req: CostSavingRequest) -> tuple[Assignment, SolveDiagnostics]:
    """Scalable solver for the cost-saving program.

    Always feasible when any assignment is; cost is at least the reported LP
    bound and exceeds the true optimum by at most max cost minus min cost.
    """
    scores = req.scores
    costs, regidx = _column_arrays(scores, req.registry)
    n = scores.n_queries
    if n == 0:
        assignment = Assignment.from_indices(scores, req.registry, [])
        return assignment, SolveDiagnostics("parametric", True, 0.0, 0.0, 0)
    _require_feasible(scores.scores, costs, regidx, req.p_min)
    sel, lam, lp_bound, evaluated = _parametric_core(scores.scores, costs, regidx, req.p_min)
    assignment = Assignment.from_indices(scores, req.registry, sel)
    proved = lam == 0.0  # the all-cheapest assignment is optimal by itself
    gap = 0.0 if proved else float(costs.max() - costs.min())
    return assignment, SolveDiagnostics("parametric", proved, lp_bound, gap, evaluated)


def cost_saving_exact(
    req: CostSavingRequest, node_budget: Optional[int] = None
) -> tuple[Assignment, SolveDiagnostics]:
    """Branch and bound over per-query tool choices; proves optimality.

    Among cost-equal optima, returns the one with the highest mean predicted
    score, then the lexicographically smallest selection (query order,
    registry index). Admission: by default the instance must have at most
    DEFAULT_EXACT_QUERY_LIMIT queries or at most DEFAULT_EXACT_LEAF_LIMIT
    raw leaves; pass ``node_budget`` to admit bigger instances under an
    explicit node cap instead.
    """
    scores = req.scores
    registry = req.registry
    costs, regidx = _column_arrays(scores, registry)
    n = scores.n_queries
    m = scores.n_tools
    if n == 0:
        assignment = Assignment.from_indices(scores, registry, [])
        return assignment, SolveDiagnostics("exact", True, 0.0, 0.0, 0)

    _require_feasible(scores.scores, costs, regidx, req.p_min)

    if node_budget is None:
        if n > DEFAULT_EXACT_QUERY_LIMIT and m ** n > DEFAULT_EXACT_LEAF_LIMIT:
            raise SizeBudgetExceededError(
                f"{n} queries x {m} tools exceeds the default exact budget; "
                f"pass node_budget or use the parametric solver"
            )
        node_budget = DEFAULT_EXACT_LEAF_LIMIT

    P = scores.scores
    target = score_target(n, req.p_min)

    # Warm start and node bound: the parametric solution is feasible and its
    # multiplier gives a strong Lagrangian lower bound at every node.
    warm_sel, lam, lp_bound, _ = _parametric_core(P, costs, regidx, req.p_min)

    # Suffix aggregates for pruning, indexed by depth (suffix starts at row d).
    min_cost_suffix = np.zeros(n + 1)
    max_score_suffix = np.zeros(n + 1)
    reduced_suffix = np.zeros(n + 1)
    reduced = (costs[None, :] - lam * P).min(axis=1)
    min_cost = costs.min()
    row_max = P.max(axis=1)
    for d in range(n - 1, -1, -1):
        min_cost_suffix[d] = min_cost_suffix[d + 1] + min_cost
        max_score_suffix[d] = max_score_suffix[d + 1] + row_max[d]
        reduced_suffix[d] = reduced_suffix[d + 1] + reduced[d]

    # Children visited in Lagrangian-utility order so the first descent
    # follows the LP-guided path and the lam-bound prune can break early.
    child_order = []
    for row in range(n):
        util = costs - lam * P[row]
        child_order.append(
            sorted(range(m), key=lambda j: (util[j], costs[j], int(regidx[j])))
        )

    inc_sel = [int(c) for c in warm_sel]
    inc_cost = _cost_sum(costs, inc_sel)
    inc_score = _score_sum(P, inc_sel)
    inc_lex = tuple(int(regidx[c]) for c in inc_sel)

    sel = [0] * n
    nodes = 0

    def better_than_incumbent(cost: float, score: float, lex: tuple[int, ...]) -> bool:
        if cost != inc_cost:
            return cost < inc_cost
        if score != inc_score:
            return score > inc_score
        return lex < inc_lex

    def dfs(depth: int, pcost: float, pscore: float) -> None:
        nonlocal nodes, inc_sel, inc_cost, inc_score, inc_lex
        for col in child_order[depth]:
            nodes += 1
            if nodes > node_budget:
                raise SizeBudgetExceededError(
                    f"exact search exceeded the node budget of {node_budget}"
                )
            ncost = pcost + float(costs[col])
            nscore = pscore + float(P[depth, col])
            sel[depth] = col
            if depth == n - 1:
                if feasible_score_sum(nscore, n, req.p_min):
                    lex = tuple(int(regidx[c]) for c in sel)
                    if better_than_incumbent(ncost, nscore, lex):
                        inc_sel = list(sel)
                        inc_cost = ncost
                        inc_score = nscore
                        inc_lex = lex
                continue
            rest = depth + 1
            lb_lam = ncost + float(reduced_suffix[rest]) + lam * (target - nscore)
            if lb_lam > inc_cost + _PRUNE_EPS:
                break  # children are utility-sorted, later ones only get worse
            lb_cost = ncost + float(min_cost_suffix[rest])
            if lb_cost > inc_cost + _PRUNE_EPS:
                continue
            score_ub = nscore + float(max_score_suffix[rest])
            if score_ub < target - _PRUNE_EPS:
                continue
            if max(lb_lam, lb_cost) >= inc_cost - _PRUNE_EPS and score_ub < inc_score - _PRUNE_EPS:
                continue  # can at best tie the cost with a worse score
            dfs(rest, ncost, nscore)

    dfs(0, 0.0, 0.0)
    assignment = Assignment.from_indices(scores, registry, inc_sel)
    return assignment, SolveDiagnostics("exact", True, lp_bound, 0.0, nodes)


def _auto_solver(n: int, m: int) -> str:
    if n <= DEFAULT_EXACT_QUERY_LIMIT or m ** n <= DEFAULT_EXACT_LEAF_LIMIT:
        return "exact"
    return "parametric"


def cost_saving(req: CostSavingRequest) -> tuple[Assignment, SolveDiagnostics]:
    """Dispatch to the requested solver; auto picks exact within budget."""
    solver = req.solver
    if solver == "auto":
        solver = _auto_solver(req.scores.n_queries, req.scores.n_tools)
        req = CostSavingRequest(req.scores, req.registry, req.p_min, solver)
    if solver == "exact":
        return cost_saving_exact(req)
    return cost_saving_parametric(req)


def route(
    scores: ScoreMatrix, registry: ToolRegistry, strategy: Strategy
) -> tuple[Assignment, SolveDiagnostics]:
    """Run one strategy and return the assignment with solve diagnostics.

    fixed and best_performance are their own trivially-proved optima; their
    diagnostics report the assignment cost as the bound.
    """
    if strategy.kind == "fixed":
        assignment = fixed_tool(scores, registry, strategy.tool_id)
        return assignment, SolveDiagnostics("none", True, assignment.total_cost, 0.0, 0)
    if strategy.kind == "best_performance":
        assignment = best_performance(scores, registry)
        return assignment, SolveDiagnostics("none", True, assignment.total_cost, 0.0, 0)
    return cost_saving(CostSavingRequest(scores, registry, strategy.p_min, "auto"))
