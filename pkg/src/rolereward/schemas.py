"""Request/response models for the scoring service."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class SpecPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    type: str
    keyword: str | None = None
    expression: str | None = None
    meta: dict[str, str] = Field(default_factory=dict)


class ScoreRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    spec: SpecPayload | None = None
    spec_id: str | None = None
    response: str
    include_breakdown: bool = True


class ScoreBreakdown(BaseModel):
    accuracy: int
    format: int


class ScoreResponse(BaseModel):
    spec_id: str
    total: float
    breakdown: ScoreBreakdown | None = None


class AdvantageGroupRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prompt_id: str
    rewards: list[float]
    epsilon: float | None = None


class AdvantageResponse(BaseModel):
    prompt_id: str
    advantages: list[float]
    degenerate: bool


class HealthResponse(BaseModel):
    status: str
    version: str
    spec_count: int


class ReloadResponse(BaseModel):
    spec_count: int


class ErrorResponse(BaseModel):
    code: str
    message: str
