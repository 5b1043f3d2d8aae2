"""HTTP facade over the suite runner.

POST endpoints mirror the CLI subcommands one-to-one; each takes the same run
request and returns the canonical report plus wall timing.  Failures carry a
machine-readable code so thin clients can map them to exit statuses without
parsing prose: "parse" for malformed scenarios or requests, "domain" for
precondition violations, "budget" for exhausted jet budgets.
"""

from __future__ import annotations

import time

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .calibration import calibrate
from .fields import ParseError
from .jets import BudgetError, JetError
from .quadrature import parse_sizes
from .report import build_report, plain
from .scenarios import builtin_scenarios, make, scenario_from_dict, scenario_to_dict
from .suites import SUITE_ORDER, SuiteContext, run_suites

_EMBEDDED_KEYS = ("order", "spatial_degree", "backend", "grid", "base", "suites")


class RunRequest(BaseModel):
    scenario: str | dict
    order: int | None = None
    spatial_degree: int | None = None
    backend: str | None = None
    grid: str | list[int] | None = None
    base: list[str] | None = None
    suites: list[str] | None = None


class RunResponse(BaseModel):
    report: dict
    passed: bool
    seconds: float


def resolve_request(req):
    """Scenario plus effective run configuration (flags beat embedded keys)."""
    doc = req.scenario
    embedded = {}
    if isinstance(doc, str):
        name = doc[len("builtin:"):] if doc.startswith("builtin:") else doc
        sc = make(name)  # ValueError on unknown names
    else:
        embedded = {k: doc[k] for k in _EMBEDDED_KEYS if k in doc}
        sc = scenario_from_dict(doc)

    def pick(attr):
        val = getattr(req, attr)
        return val if val is not None else embedded.get(attr)

    grid = pick("grid")
    if isinstance(grid, str):
        grid = parse_sizes(grid, sc.chart.dim)
    ctx = SuiteContext(
        sc,
        order=pick("order") or 4,
        spatial_degree=pick("spatial_degree"),
        backend=pick("backend"),
        grid_sizes=grid,
        base=pick("base"),
    )
    return ctx, pick("suites")


def _run(req, names):
    ctx, requested = resolve_request(req)
    if names is None:
        names = requested
    t0 = time.perf_counter()
    results = run_suites(ctx, names)
    seconds = time.perf_counter() - t0
    rep = build_report(ctx, results)
    return RunResponse(report=plain(rep.to_dict()), passed=rep.passed,
                       seconds=seconds)


def create_app():
    app = FastAPI(title="ambientkit", version=__version__)

    @app.exception_handler(JetError)
    async def _jet_error(request, exc):
        code = "budget" if isinstance(exc, BudgetError) else "domain"
        return JSONResponse(status_code=400,
                            content={"error": code, "detail": str(exc)})

    @app.exception_handler(ParseError)
    async def _parse_error(request, exc):
        return JSONResponse(status_code=400,
                            content={"error": "parse", "detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(request, exc):
        return JSONResponse(status_code=400,
                            content={"error": "parse", "detail": str(exc)})

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.get("/scenarios")
    async def scenarios():
        return [scenario_to_dict(sc) for sc in builtin_scenarios()]

    @app.get("/calibration")
    async def calibration():
        return plain(calibrate().to_dict())

    def register(name):
        async def runner(req: RunRequest) -> RunResponse:
            return _run(req, [name])

        app.post("/" + name, name=name)(runner)

    for name in SUITE_ORDER:
        register(name)

    @app.post("/verify-all")
    async def verify_all(req: RunRequest) -> RunResponse:
        return _run(req, None)

    return app


app = create_app()
