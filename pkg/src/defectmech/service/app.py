"""FastAPI compute service wrapping the core package.

All endpoints are stateless POSTs: JSON request in, JSON report out.
Error classes map to status codes the thin CLI translates into exit
codes: 400/422 config problems, 409 mathematical obstructions,
500 numerical failures.
"""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import (
    ConfigError,
    DefectmechError,
    DisclinationPresentError,
    NUMERICAL_ERRORS,
    OBSTRUCTION_ERRORS,
)
from . import runners
from . import schemas as S

app = FastAPI(
    title="defectmech service",
    description="Material-uniform bodies with discrete defects: "
    "holonomy, Burgers vectors, symmetry obstruction, elastic energy "
    "minimization and piecewise-flat homogenization experiments.",
    version=__version__,
)


def _error_response(status: int, kind: str, message: str, details=None) -> JSONResponse:
    payload = S.ErrorPayload(kind=kind, message=message, details=details)
    return JSONResponse(status_code=status, content={"error": payload.model_dump()})


_UNION_TAGS = {"disclination", "dislocation", "trivial", "circle", "polygon",
               "conformal"}


def _json_pointer(loc) -> str:
    # drop the leading "body" marker plus union-tag/type-name segments so
    # pointers name actual config keys: ('body','body','disclination',
    # 'alpha') -> /body/alpha
    parts = []
    for p in loc[1:]:
        s = str(p)
        if s in _UNION_TAGS or "[" in s or (s[:1].isupper() and s.isidentifier()):
            continue
        parts.append(s)
    return "/" + "/".join(parts)


@app.exception_handler(RequestValidationError)
async def _on_validation(request: Request, exc: RequestValidationError):
    violations = [
        {"path": _json_pointer(err["loc"]), "message": err["msg"]}
        for err in exc.errors()
    ]
    return _error_response(422, "validation", "config failed schema validation",
                           violations)


@app.exception_handler(DefectmechError)
async def _on_domain_error(request: Request, exc: DefectmechError):
    if isinstance(exc, OBSTRUCTION_ERRORS):
        details = getattr(exc, "report", None) or {"distance": exc.distance}
        return _error_response(409, "obstruction", str(exc), details)
    if isinstance(exc, DisclinationPresentError):
        return _error_response(409, "obstruction", str(exc),
                               {"distance": exc.distance})
    if isinstance(exc, NUMERICAL_ERRORS):
        details = {"energy": getattr(exc, "energy", None)}
        return _error_response(500, "numerical", str(exc), details)
    if isinstance(exc, ConfigError):
        return _error_response(400, "validation", str(exc))
    return _error_response(400, "validation", str(exc))


@app.get("/health", response_model=S.HealthResponse)
def health() -> S.HealthResponse:
    return S.HealthResponse(status="ok", version=__version__)


@app.post("/validate", response_model=S.ValidateResponse)
def validate(req: S.ValidateRequest):
    return runners.run_validate(req)


@app.post("/holonomy", response_model=S.HolonomyResponse)
def holonomy(req: S.HolonomyRequest):
    return runners.run_holonomy(req)


@app.post("/burgers", response_model=S.BurgersResponse)
def burgers(req: S.BurgersRequest):
    return runners.run_burgers(req)


@app.post("/symmetry", response_model=S.SymmetryResponse)
def symmetry(req: S.SymmetryRequest):
    return runners.run_symmetry(req)


@app.post("/minimize", response_model=S.MinimizeResponse)
def minimize_endpoint(req: S.MinimizeRequest):
    return runners.run_minimize(req)


@app.post("/homogenize", response_model=S.HomogenizeResponse)
def homogenize(req: S.HomogenizeRequest):
    return runners.run_homogenize(req)
