"""Domain types shared by every other module: tools, labeled queries, score
matrices and assignments. All types are immutable after construction and safe
to share across threads."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import DataError, MissingLabelError, UnknownToolError


@dataclass(frozen=True)
class ToolSpec:
    """One homogeneous tool: identity plus the cost of a single call."""

    id: str
    display_name: str
    unit_cost: float

    def __post_init__(self):
        if not self.id:
            raise DataError("tool id must be nonempty")
        if not np.isfinite(self.unit_cost) or self.unit_cost < 0:
            raise DataError(f"tool {self.id!r}: unit_cost must be finite and >= 0")


@dataclass(frozen=True)
class ToolRegistry:
    """Ordered collection of tools. The position of a tool in the registry
    defines the tool index used by matrices and solvers."""

    tools: tuple[ToolSpec, ...]

    def __post_init__(self):
        if isinstance(self.tools, list):
            object.__setattr__(self, "tools", tuple(self.tools))
        if len(self.tools) < 1:
            raise DataError("registry needs at least one tool")
        seen = set()
        for t in self.tools:
            if t.id in seen:
                raise DataError(f"duplicate tool id {t.id!r}")
            seen.add(t.id)
        object.__setattr__(self, "_index", {t.id: i for i, t in enumerate(self.tools)})

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.tools)

    def __len__(self) -> int:
        return len(self.tools)

    def __iter__(self) -> Iterator[ToolSpec]:
        return iter(self.tools)

    def __contains__(self, tool_id: str) -> bool:
        return tool_id in self._index

    def index_of(self, tool_id: str) -> int:
        try:
            return self._index[tool_id]
        except KeyError:
            raise UnknownToolError(f"unknown tool {tool_id!r}") from None

    def get(self, tool_id: str) -> ToolSpec:
        return self.tools[self.index_of(tool_id)]

    def cost_of(self, tool_id: str) -> float:
        return self.tools[self.index_of(tool_id)].unit_cost


def default_registry() -> ToolRegistry:
    """The stock four-tool registry: a free non-retrieval baseline plus three
    search engines with their published relative costs."""
    return ToolRegistry(
        (
            ToolSpec("llm-only", "LLM only (no retrieval)", 0.0),
            ToolSpec("quark", "Quark search", 0.33),
            ToolSpec("google", "Google search", 1.0),
            ToolSpec("bing", "Bing search", 2.0),
        )
    )


@dataclass(frozen=True)
class LabeledQuery:
    """A query with the scores each tool achieved on it.

    ``labels`` maps tool id to a score in [0, 1]. The constructor does not
    validate; use :func:`validate_dataset` so that bad rows surface as data,
    not as exceptions mid-pipeline.
    """

    id: str
    query: str
    labels: Mapping[str, float]
    gold: Optional[str] = None


@dataclass(frozen=True)
class Violation:
    query_id: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(f"{v.query_id}: {v.message}" for v in self.violations)


def validate_dataset(queries: Sequence[LabeledQuery], registry: ToolRegistry) -> ValidationReport:
    """Check every dataset invariant and report all violations.

    Violations are data, not faults: this never raises. A dataset is usable
    for training iff the report is ok.
    """
    out: list[Violation] = []
    seen: set[str] = set()
    tool_ids = set(registry.ids)
    for q in queries:
        if not q.id:
            out.append(Violation(q.id, "empty query id"))
        if q.id in seen:
            out.append(Violation(q.id, f"duplicate id {q.id}"))
        seen.add(q.id)
        if not q.query:
            out.append(Violation(q.id, "empty query text"))
        for tid, score in q.labels.items():
            if tid not in tool_ids:
                out.append(Violation(q.id, f"label for unregistered tool {tid}"))
            elif not (isinstance(score, (int, float)) and np.isfinite(score) and 0.0 <= score <= 1.0):
                out.append(Violation(q.id, f"label out of [0,1] for tool {tid}: {score!r}"))
        for tid in registry.ids:
            if tid not in q.labels:
                out.append(Violation(q.id, f"missing label for tool {tid}"))
    return ValidationReport(tuple(out))


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """N x M matrix of scores in [0, 1]: one row per query, one column per
    tool. Column order follows the tool_ids tuple. The array is read-only."""

    query_ids: tuple[str, ...]
    tool_ids: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        qids = tuple(self.query_ids)
        tids = tuple(self.tool_ids)
        arr = np.ascontiguousarray(np.asarray(self.scores, dtype=np.float64))
        if arr.ndim != 2:
            arr = arr.reshape(len(qids), len(tids))
        if arr.shape != (len(qids), len(tids)):
            raise DataError(
                f"score matrix shape {arr.shape} does not match "
                f"{len(qids)} queries x {len(tids)} tools"
            )
        if len(set(qids)) != len(qids):
            raise DataError("duplicate query ids in score matrix")
        if len(set(tids)) != len(tids):
            raise DataError("duplicate tool ids in score matrix")
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
            raise DataError("score matrix entries must be finite and in [0,1]")
        arr.setflags(write=False)
        object.__setattr__(self, "query_ids", qids)
        object.__setattr__(self, "tool_ids", tids)
        object.__setattr__(self, "scores", arr)
        object.__setattr__(self, "_qindex", {q: i for i, q in enumerate(qids)})

    @property
    def n_queries(self) -> int:
        return len(self.query_ids)

    @property
    def n_tools(self) -> int:
        return len(self.tool_ids)

    def row_of(self, query_id: str) -> np.ndarray:
        try:
            return self.scores[self._qindex[query_id]]
        except KeyError:
            raise DataError(f"query {query_id!r} not in score matrix") from None


def label_matrix(queries: Sequence[LabeledQuery], registry: ToolRegistry) -> ScoreMatrix:
    """Assemble the labeled scores into a matrix, columns in registry order.

    Requires a dataset that passes :func:`validate_dataset` with a label for
    every registered tool.
    """
    report = validate_dataset(queries, registry)
    if not report.ok:
        for v in report.violations:
            if v.message.startswith("missing label"):
                raise MissingLabelError(f"query {v.query_id}: {v.message}")
        raise DataError(f"dataset invalid: {report.summary()}")
    rows = np.empty((len(queries), len(registry)), dtype=np.float64)
    for i, q in enumerate(queries):
        for j, tid in enumerate(registry.ids):
            rows[i, j] = q.labels[tid]
    return ScoreMatrix(tuple(q.id for q in queries), registry.ids, rows)


@dataclass(frozen=True)
class Assignment:
    """One tool per query plus the aggregates every caller needs.

    ``selections`` preserves query order. Aggregates are always derived from
    the selection via :meth:`from_indices`, never trusted from outside, so
    recomputing them from raw data reproduces the stored values.
    """

    selections: Mapping[str, str]
    mean_predicted_score: float
    total_cost: float
    average_cost: float

    @classmethod
    def from_indices(
        cls,
        scores: ScoreMatrix,
        registry: ToolRegistry,
        choice: Sequence[int],
    ) -> "Assignment":
        """Build an assignment from per-row column choices.

        Cost and score sums accumulate in query order; solvers rely on this
        exact accumulation when they compare totals.
        """
        if len(choice) != scores.n_queries:
            raise DataError("one tool choice required per query")
        costs = [registry.cost_of(tid) for tid in scores.tool_ids]
        total = 0.0
        ssum = 0.0
        sel: dict[str, str] = {}
        for row, col in enumerate(choice):
            sel[scores.query_ids[row]] = scores.tool_ids[col]
            total += costs[col]
            ssum += float(scores.scores[row, col])
        n = scores.n_queries
        return cls(
            selections=sel,
            mean_predicted_score=ssum / n if n else 0.0,
            total_cost=total,
            average_cost=total / n if n else 0.0,
        )

    @property
    def n(self) -> int:
        return len(self.selections)
