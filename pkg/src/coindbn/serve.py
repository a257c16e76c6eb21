"""HTTP facade over one trained model for interactive what-if queries.

The model is fixed at startup and the service keeps no session state, so
identical requests always produce identical response bytes. Errors are
returned as JSON {error, message}: 400 for domain violations (unknown
variable, evidence on the query, contradictory evidence), 422 for
requests that do not parse.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import dbn
from .errors import DataError, ZeroProbabilityEvidence
from .ingest import DOWN, STATE_NAMES, UP

PLACEHOLDER_PAGE = """<!doctype html>
<html><head><title>coindbn</title></head>
<body><p>UI assets not built. The JSON API is live at
<code>/api/schema</code> and <code>/api/whatif</code>.</p></body></html>
"""


class EvidenceItem(BaseModel):
    slice: int
    variable: str
    state: Literal["Up", "Down"]


class WhatIfRequest(BaseModel):
    evidence: list[EvidenceItem] = []


def model_schema(model: dbn.TwoSliceBn) -> dict:
    """Variables, T, and arc lists exactly as stored in the model file."""
    names = model.variable_names
    prior_arcs = [[p, c] for p, c in model.prior.dag.edge_names()]
    intra, inter = [], []
    trans = model.transition.dag
    offset = len(names)
    for j, name in enumerate(names):
        for parent in trans.parent_sets[offset + j]:
            parent_name = trans.nodes[parent]
            if parent_name.startswith(dbn.PREV_PREFIX):
                inter.append([parent_name[len(dbn.PREV_PREFIX):], name])
            else:
                intra.append([parent_name, name])
    return {
        "variables": list(names),
        "t_slices": model.t_slices,
        "feature_group": model.feature_group,
        "target": model.target_name,
        "arcs": {"prior": prior_arcs, "intra": intra, "inter": inter},
    }


def create_app(model: dbn.TwoSliceBn, *, model_id: str,
               ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="coindbn what-if service", docs_url=None,
                  redoc_url=None)
    network = dbn.unroll(model)
    schema = model_schema(model)
    query = (model.t_slices - 1, model.target_name)

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={
            "error": "MalformedRequest", "message": str(exc.errors())})

    @app.exception_handler(DataError)
    async def domain_error(request: Request, exc: DataError):
        return JSONResponse(status_code=400, content={
            "error": type(exc).__name__, "message": str(exc)})

    @app.exception_handler(ZeroProbabilityEvidence)
    async def impossible_evidence(request: Request,
                                  exc: ZeroProbabilityEvidence):
        return JSONResponse(status_code=400, content={
            "error": type(exc).__name__, "message": str(exc)})

    @app.get("/api/schema")
    def get_schema():
        return schema

    @app.post("/api/whatif")
    def post_whatif(request: WhatIfRequest):
        states: dict[tuple[int, str], int] = {}
        for item in request.evidence:
            key = (item.slice, item.variable)
            if key in states:
                raise DataError(
                    f"duplicate evidence for slice {item.slice} "
                    f"variable {item.variable!r}")
            states[key] = UP if item.state == "Up" else DOWN
        evidence = dbn.Evidence.build(states, query)
        result = dbn.posterior(network, evidence)
        return {
            "probabilities": {"down": result.down, "up": result.up},
            "argmax": STATE_NAMES[result.argmax],
            "model_id": model_id,
            "evidence_echo": [item.model_dump() for item in request.evidence],
        }

    index = Path(ui_dir) / "index.html" if ui_dir else None
    if index is not None and index.exists():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def placeholder():
            return PLACEHOLDER_PAGE

    return app


def load_app(model_path, *, ui_dir: str | None = None) -> FastAPI:
    text = Path(model_path).read_text(encoding="utf-8")
    model = dbn.model_loads(text)
    return create_app(model, model_id=Path(model_path).stem, ui_dir=ui_dir)


def run(model_path, *, port: int, ui_dir: str | None = None) -> int:
    import uvicorn

    app = load_app(model_path, ui_dir=ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="info")
    return 0
