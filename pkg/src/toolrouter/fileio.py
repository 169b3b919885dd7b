"""File formats: tools.json, the .jsonl datasets, model predictions,
assignments, reports and curves. All UTF-8; .jsonl is one object per line."""

from __future__ import annotations

import csv
import json
from typing import Optional, Sequence

import numpy as np

from .assignment import SolveDiagnostics
from .core import (
    Assignment,
    LabeledQuery,
    ScoreMatrix,
    ToolRegistry,
    ToolSpec,
    validate_dataset,
)
from .errors import DataError
from .evaluation import CurvePoint, EvalReport, WinTieLose
from .labeling import ResponseRecord


def _read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected an object per line")
            rows.append(obj)
    return rows


def _write_jsonl(path, rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False))
            fh.write("\n")


def _require(obj: dict, key: str, path, kind=None):
    if key not in obj:
        raise DataError(f"{path}: missing field {key!r} in {obj!r}")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise DataError(f"{path}: field {key!r} has wrong type in {obj!r}")
    return val


def load_tools(path) -> ToolRegistry:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: bad JSON: {exc}") from exc
    if not isinstance(data, list):
        raise DataError(f"{path}: tools file must be a JSON array")
    specs = []
    for obj in data:
        specs.append(
            ToolSpec(
                id=_require(obj, "id", path, str),
                display_name=str(obj.get("display_name", obj["id"])),
                unit_cost=float(_require(obj, "unit_cost", path, (int, float))),
            )
        )
    return ToolRegistry(tuple(specs))


def save_tools(registry: ToolRegistry, path) -> None:
    data = [
        {"id": t.id, "display_name": t.display_name, "unit_cost": t.unit_cost}
        for t in registry
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def load_labeled_queries(path, registry: Optional[ToolRegistry] = None) -> list[LabeledQuery]:
    """Read labels.jsonl. With a registry, reject any invariant violation."""
    out = []
    for obj in _read_jsonl(path):
        labels = _require(obj, "labels", path, dict)
        out.append(
            LabeledQuery(
                id=_require(obj, "id", path, str),
                query=_require(obj, "query", path, str),
                labels={str(k): float(v) for k, v in labels.items()},
                gold=obj.get("gold"),
            )
        )
    if registry is not None:
        report = validate_dataset(out, registry)
        if not report.ok:
            raise DataError(f"{path}: {report.summary()}")
    return out


def save_labeled_queries(queries: Sequence[LabeledQuery], path) -> None:
    rows = []
    for q in queries:
        row: dict = {"id": q.id, "query": q.query}
        if q.gold is not None:
            row["gold"] = q.gold
        row["labels"] = dict(q.labels)
        rows.append(row)
    _write_jsonl(path, rows)


def load_query_triples(path) -> list[tuple[str, str, Optional[str]]]:
    """Read queries.jsonl (id, query, optional gold). labels.jsonl also
    parses, so a labeled file can serve as a query source."""
    return [
        (
            _require(obj, "id", path, str),
            _require(obj, "query", path, str),
            obj.get("gold"),
        )
        for obj in _read_jsonl(path)
    ]


def load_responses(path) -> list[ResponseRecord]:
    return [
        ResponseRecord(
            query_id=_require(obj, "query_id", path, str),
            tool_id=_require(obj, "tool_id", path, str),
            response=_require(obj, "response", path, str),
        )
        for obj in _read_jsonl(path)
    ]


def save_responses(records: Sequence[ResponseRecord], path) -> None:
    _write_jsonl(
        path,
        [
            {"query_id": r.query_id, "tool_id": r.tool_id, "response": r.response}
            for r in records
        ],
    )


def save_predictions(matrix: ScoreMatrix, path) -> None:
    rows = []
    for i, qid in enumerate(matrix.query_ids):
        scores = {tid: float(matrix.scores[i, j]) for j, tid in enumerate(matrix.tool_ids)}
        rows.append({"id": qid, "scores": scores})
    _write_jsonl(path, rows)


def load_predictions(path) -> ScoreMatrix:
    rows = _read_jsonl(path)
    if not rows:
        raise DataError(f"{path}: empty predictions file")
    tool_ids = tuple(_require(rows[0], "scores", path, dict).keys())
    qids = []
    arr = np.empty((len(rows), len(tool_ids)), dtype=np.float64)
    for i, obj in enumerate(rows):
        qids.append(_require(obj, "id", path, str))
        scores = _require(obj, "scores", path, dict)
        if tuple(scores.keys()) != tool_ids:
            raise DataError(f"{path}: row {i + 1} has a different tool set or order")
        arr[i] = [float(scores[t]) for t in tool_ids]
    return ScoreMatrix(tuple(qids), tool_ids, arr)


def save_assignment(assignment: Assignment, scores: ScoreMatrix, path) -> None:
    rows = []
    for qid, tid in assignment.selections.items():
        col = scores.tool_ids.index(tid)
        rows.append(
            {
                "id": qid,
                "tool_id": tid,
                "predicted_score": float(scores.row_of(qid)[col]),
            }
        )
    _write_jsonl(path, rows)


def load_assignment(path, registry: ToolRegistry) -> Assignment:
    """Rebuild an Assignment from assignment.jsonl, recomputing aggregates."""
    rows = _read_jsonl(path)
    sel: dict[str, str] = {}
    total = 0.0
    ssum = 0.0
    for obj in rows:
        qid = _require(obj, "id", path, str)
        tid = _require(obj, "tool_id", path, str)
        if qid in sel:
            raise DataError(f"{path}: duplicate assignment for query {qid!r}")
        sel[qid] = tid
        total += registry.cost_of(tid)
        ssum += float(_require(obj, "predicted_score", path, (int, float)))
    n = len(sel)
    return Assignment(
        selections=sel,
        mean_predicted_score=ssum / n if n else 0.0,
        total_cost=total,
        average_cost=total / n if n else 0.0,
    )


def save_diagnostics(diag: SolveDiagnostics, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(diag.to_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def save_report(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def save_wtl(wtl: WinTieLose, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(wtl.to_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def save_curve_csv(points: Sequence[CurvePoint], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p_min", "average_cost", "accuracy", "feasible"])
        for p in points:
            writer.writerow(
                [
                    repr(p.p_min),
                    "" if p.average_cost is None else repr(p.average_cost),
                    "" if p.accuracy is None else repr(p.accuracy),
                    "true" if p.feasible else "false",
                ]
            )


def load_curve_csv(path) -> list[CurvePoint]:
    points = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            feasible = row["feasible"] == "true"
            points.append(
                CurvePoint(
                    p_min=float(row["p_min"]),
                    average_cost=float(row["average_cost"]) if row["average_cost"] else None,
                    accuracy=float(row["accuracy"]) if row["accuracy"] else None,
                    feasible=feasible,
                )
            )
    return points


def save_world_meta(quality: np.ndarray, tool_ids: Sequence[str], query_topics: dict[str, int], path) -> None:
    meta = {
        "tool_ids": list(tool_ids),
        "quality": [[float(x) for x in row] for row in quality],
        "topic_of_query": dict(query_topics),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
