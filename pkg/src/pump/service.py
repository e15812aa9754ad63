"""Stateless HTTP front end.

Every endpoint delegates to `interface.run`, so the service, the CLI, and
direct library calls produce identical documents.  No persistence, no jobs:
each request is computed in full and returned.
"""

from __future__ import annotations

from typing import Any, Literal

from fastapi import FastAPI, Query, Response
from fastapi.middleware.cors import CORSMiddleware

from . import __version__
from .interface import (
    EXIT_VALIDATION,
    RunResult,
    canonical_json,
    info_payload,
    run,
    schema_payload,
)
from .models import RequestEnvelope

_MEDIA = {"json": "application/json", "csv": "text/csv"}


def _respond(result: RunResult) -> Response:
    if result.ok:
        status = 200
    elif result.exit_code == EXIT_VALIDATION:
        status = 400
    elif "error" not in result.payload:
        # A full result document with converged=false is an answer, not a
        # transport failure; only the CLI surfaces the non-zero exit code.
        status = 200
    else:
        status = 422
    return Response(
        content=result.text,
        status_code=status,
        media_type=_MEDIA[result.output],
    )


def create_app() -> FastAPI:
    app = FastAPI(title="pump", version=__version__, docs_url="/api/v1/docs")
    # The browser client is served as static files from any origin; the API
    # is stateless and unauthenticated, so a wide-open policy costs nothing.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    def execute(
        kind: str,
        body: dict[str, Any],
        seed: int | None,
        fmt: str,
        budget_ms: float | None = None,
    ) -> Response:
        env = RequestEnvelope(
            kind=kind, body=body, seed=seed, output=fmt, budget_ms=budget_ms
        )
        return _respond(run(env))

    @app.post("/api/v1/power")
    def power(
        body: dict[str, Any],
        seed: int | None = Query(default=None),
        format: Literal["json", "csv"] = Query(default="json"),
    ) -> Response:
        return execute("power", body, seed, format)

    @app.post("/api/v1/mdes")
    def mdes(
        body: dict[str, Any],
        seed: int | None = Query(default=None),
        format: Literal["json", "csv"] = Query(default="json"),
    ) -> Response:
        return execute("mdes", body, seed, format)

    @app.post("/api/v1/sample")
    def sample(
        body: dict[str, Any],
        seed: int | None = Query(default=None),
        format: Literal["json", "csv"] = Query(default="json"),
    ) -> Response:
        return execute("sample", body, seed, format)

    @app.post("/api/v1/grid")
    def grid(
        body: dict[str, Any],
        seed: int | None = Query(default=None),
        format: Literal["json", "csv"] = Query(default="json"),
        budget_ms: float | None = Query(default=None, ge=0),
    ) -> Response:
        return execute("grid", body, seed, format, budget_ms)

    @app.get("/api/v1/info")
    def info() -> Response:
        return Response(canonical_json(info_payload()), media_type=_MEDIA["json"])

    @app.get("/api/v1/schema")
    def schema() -> Response:
        return Response(canonical_json(schema_payload()), media_type=_MEDIA["json"])

    return app


app = create_app()
