"""Batch routing over HTTP.

One immutable model serves every request; requests are independent and the
cost_saving constraint applies to the batch inside each request. A single
query routed with cost_saving therefore degenerates to "cheapest tool meeting
the threshold, or 422".
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from . import assignment as asg
from . import predictor as pred
from .core import ToolRegistry
from .errors import InfeasibleError, RouterError


class QueryIn(BaseModel):
    id: str = Field(min_length=1)
    query: str


class RouteRequest(BaseModel):
    queries: list[QueryIn]
    strategy: str
    p_min: Optional[float] = Field(default=None, ge=0.0, le=1.0)


class AssignmentOut(BaseModel):
    id: str
    tool_id: str
    predicted_score: float


class RouteResponse(BaseModel):
    assignments: list[AssignmentOut]
    diagnostics: dict


def create_app(model: pred.RouterModel, registry: ToolRegistry) -> FastAPI:
    for tid in model.tool_ids:
        registry.index_of(tid)  # model and registry must agree up front

    app = FastAPI(title="toolrouter", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/healthz", response_class=PlainTextResponse)
    async def healthz() -> str:
        return "ok"

    @app.get("/v1/tools")
    async def tools() -> list[dict]:
        return [
            {"id": t.id, "display_name": t.display_name, "unit_cost": t.unit_cost}
            for t in registry
        ]

    @app.post("/v1/route", response_model=RouteResponse)
    async def route(body: RouteRequest):
        ids = [q.id for q in body.queries]
        if len(set(ids)) != len(ids):
            return JSONResponse(status_code=400, content={"detail": "duplicate query ids"})
        try:
            strategy = asg.parse_strategy(body.strategy, p_min=body.p_min)
        except RouterError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        matrix = pred.score_matrix(model, [(q.id, q.query) for q in body.queries])
        try:
            result, diag = asg.route(matrix, registry, strategy)
        except InfeasibleError as exc:
            return JSONResponse(
                status_code=422,
                content={
                    "detail": str(exc),
                    "max_achievable_mean": exc.max_achievable_mean,
                },
            )
        except RouterError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        assignments = []
        for qid in ids:
            tid = result.selections[qid]
            col = matrix.tool_ids.index(tid)
            assignments.append(
                AssignmentOut(
                    id=qid,
                    tool_id=tid,
                    predicted_score=float(matrix.row_of(qid)[col]),
                )
            )
        return RouteResponse(assignments=assignments, diagnostics=diag.to_dict())

    return app
