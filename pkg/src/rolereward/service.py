"""HTTP scoring service.

Thin wrapper over the library: every endpoint calls the same functions the
in-process API exposes, so batch results match serial library calls exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__, dsl
from .advantages import AdvantageVector, RolloutGroup, group_advantages
from .records import SchemaError, SpecStore, spec_from_json
from .rewards import RewardSpec, ScoringConfig, default_scoring_config
from .schemas import (
    AdvantageGroupRequest,
    AdvantageResponse,
    HealthResponse,
    ReloadResponse,
    ScoreBreakdown,
    ScoreRequest,
    ScoreResponse,
)

logger = logging.getLogger("rolereward.service")


@dataclass
class ServiceSettings:
    spec_store: SpecStore
    scoring: ScoringConfig


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def _resolve_spec(request: ScoreRequest, store: SpecStore) -> RewardSpec:
    if (request.spec is None) == (request.spec_id is None):
        raise ApiError(400, "malformed_request", "provide exactly one of 'spec' and 'spec_id'")
    if request.spec_id is not None:
        spec = store.get(request.spec_id)
        if spec is None:
            raise ApiError(404, "unknown_spec", f"no spec with id {request.spec_id!r}")
        return spec
    try:
        return spec_from_json(request.spec.model_dump(exclude_none=True))
    except SchemaError as exc:
        raise ApiError(400, "invalid_expression" if "expression" in str(exc) else "malformed_request", str(exc)) from exc


def _score_one(request: ScoreRequest, settings: ServiceSettings) -> ScoreResponse:
    from .rewards import accuracy_reward, format_reward

    spec = _resolve_spec(request, settings.spec_store)
    accuracy = accuracy_reward(spec, request.response)
    fmt = format_reward(request.response, settings.scoring.format)
    w_acc, w_fmt = settings.scoring.weights
    total = w_acc * accuracy + w_fmt * fmt
    breakdown = ScoreBreakdown(accuracy=accuracy, format=fmt) if request.include_breakdown else None
    return ScoreResponse(spec_id=spec.id, total=total, breakdown=breakdown)


def create_app(settings: ServiceSettings | None = None) -> FastAPI:
    if settings is None:
        settings = ServiceSettings(spec_store=SpecStore(), scoring=default_scoring_config())
    app = FastAPI(title="rolereward", version=__version__)
    app.state.settings = settings

    @app.exception_handler(ApiError)
    async def handle_api_error(_: Request, exc: ApiError) -> JSONResponse:
        return _error(exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(_: Request, exc: RequestValidationError) -> JSONResponse:
        first = exc.errors()[0] if exc.errors() else {}
        location = ".".join(str(part) for part in first.get("loc", ()))
        detail = first.get("msg", "invalid request")
        return _error(400, "malformed_request", f"{location}: {detail}" if location else detail)

    @app.exception_handler(Exception)
    async def handle_unexpected(_: Request, exc: Exception) -> JSONResponse:
        logger.exception("unhandled error", exc_info=exc)
        return _error(500, "internal_error", "internal error")

    @app.post("/v1/score", response_model=ScoreResponse, response_model_exclude_none=True)
    async def score(request: ScoreRequest) -> ScoreResponse:
        return _score_one(request, settings)

    @app.post("/v1/score_batch", response_model=list[ScoreResponse], response_model_exclude_none=True)
    async def score_batch(requests: list[ScoreRequest]) -> list[ScoreResponse]:
        return [_score_one(request, settings) for request in requests]

    @app.post("/v1/advantages", response_model=AdvantageResponse)
    async def advantages(request: AdvantageGroupRequest) -> AdvantageResponse:
        try:
            group = RolloutGroup(prompt_id=request.prompt_id, rewards=tuple(request.rewards))
        except ValueError as exc:
            raise ApiError(400, "malformed_request", str(exc)) from exc
        if request.epsilon is None:
            vector = group_advantages(group)
        else:
            if not request.epsilon > 0:
                raise ApiError(400, "malformed_request", "epsilon must be positive")
            vector = group_advantages(group, epsilon=request.epsilon)
        return AdvantageResponse(
            prompt_id=vector.prompt_id,
            advantages=list(vector.advantages),
            degenerate=vector.degenerate,
        )

    @app.get("/v1/health", response_model=HealthResponse)
    async def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__, spec_count=len(settings.spec_store))

    @app.post("/v1/reload", response_model=ReloadResponse)
    async def reload() -> ReloadResponse:
        if settings.spec_store.path is None:
            raise ApiError(400, "malformed_request", "service was started without a spec file")
        try:
            count = settings.spec_store.reload()
        except (OSError, SchemaError) as exc:
            raise ApiError(400, "malformed_request", f"reload failed: {exc}") from exc
        return ReloadResponse(spec_count=count)

    return app


def run_service(
    spec_path: str | None = None,
    config_path: str | None = None,
    host: str = "127.0.0.1",
    port: int = 8000,
) -> None:
    """Load the spec store, then bind. Startup failures surface before the
    socket opens."""
    import uvicorn

    from .rewards import load_scoring_config

    store = SpecStore(spec_path)
    scoring = load_scoring_config(config_path) if config_path else default_scoring_config()
    logger.info("loaded %d specs", len(store))
    app = create_app(ServiceSettings(spec_store=store, scoring=scoring))
    uvicorn.run(app, host=host, port=port, log_level="warning")
