"""Synchronous client for the reward scoring service.

The SDK talks to the documented JSON endpoints and nothing else; it does no
local reward computation. A client handle may be shared across threads, each
call is independent. Transport failures and 5xx/429 responses are retried
with exponential backoff; other error responses surface the service's
{code, message} body as a typed exception without retrying.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Sequence

import httpx


class ClientError(Exception):
    """Base class for everything this SDK raises on purpose."""


class TransportError(ClientError):
    """Network-level failure that survived the configured retries."""


class ServiceError(ClientError):
    """Non-2xx response; carries the service's error envelope."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(f"{code} (HTTP {status}): {message}")
        self.status = status
        self.code = code
        self.message = message


class ResponseSchemaError(ClientError):
    """The service answered 2xx but the body did not match the contract."""


class ValidationError(ClientError, ValueError):
    """Client-side rejection; nothing was sent."""


@dataclass(frozen=True)
class ClientConfig:
    base_url: str
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.2

    def __post_init__(self):
        if not self.base_url:
            raise ValidationError("base_url must be a non-empty address")
        if self.timeout <= 0:
            raise ValidationError("timeout must be positive")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be at least 0")
        if self.backoff_base < 0:
            raise ValidationError("backoff_base must be at least 0")


@dataclass(frozen=True)
class ScoreBreakdown:
    spec_id: str
    total: float
    accuracy: int | None = None
    format: int | None = None


@dataclass(frozen=True)
class AdvantageVector:
    prompt_id: str
    advantages: tuple[float, ...]
    degenerate: bool


# (spec-or-id, rollout text): a string refers to a spec already loaded by the
# service, a mapping is an inline spec payload.
ScorePair = "tuple[str | Mapping[str, Any], str]"


def _require_field(obj: Any, key: str, context: str) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise ResponseSchemaError(f"{context}: missing field {key!r} in {obj!r}")
    return obj[key]


class TrainerClient:
    """Shareable handle over one HTTP connection pool."""

    def __init__(
        self,
        config: ClientConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._sleep = sleep
        self._http = httpx.Client(base_url=config.base_url, timeout=config.timeout, transport=transport)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "TrainerClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # transport ----------------------------------------------------------

    def _post(self, path: str, payload: Any) -> Any:
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                response = self._http.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
            else:
                if response.status_code < 500 and response.status_code != 429:
                    return self._parse(response)
                last_error = TransportError(f"HTTP {response.status_code} from {path}")
            if attempt < self.config.max_retries:
                self._sleep(self.config.backoff_base * (2**attempt))
        raise TransportError(
            f"POST {path} failed after {self.config.max_retries + 1} attempts: {last_error}"
        ) from last_error

    def _parse(self, response: httpx.Response) -> Any:
        try:
            body = response.json()
        except ValueError as exc:
            raise ResponseSchemaError(f"non-JSON body from {response.request.url}") from exc
        if response.status_code >= 400:
            if isinstance(body, dict) and "code" in body and "message" in body:
                raise ServiceError(response.status_code, str(body["code"]), str(body["message"]))
            raise ServiceError(response.status_code, "unknown_error", str(body))
        return body

    # operations ----------------------------------------------------------

    def score_batch(self, pairs: Iterable[tuple[str | Mapping[str, Any], str]]) -> list[ScoreBreakdown]:
        """Score rollouts in one request; results come back in input order."""
        requests = []
        for position, pair in enumerate(pairs):
            try:
                spec_or_id, text = pair
            except (TypeError, ValueError):
                raise ValidationError(f"pair {position} must be (spec-or-id, rollout text)") from None
            if not isinstance(text, str):
                raise ValidationError(f"pair {position}: rollout text must be a string")
            if isinstance(spec_or_id, str):
                requests.append({"spec_id": spec_or_id, "response": text})
            elif isinstance(spec_or_id, Mapping):
                requests.append({"spec": dict(spec_or_id), "response": text})
            else:
                raise ValidationError(f"pair {position}: spec must be an id string or a spec object")

        body = self._post("/v1/score_batch", requests)
        if not isinstance(body, list):
            raise ResponseSchemaError(f"score_batch: expected a list, got {type(body).__name__}")
        if len(body) != len(requests):
            raise ResponseSchemaError(f"score_batch: sent {len(requests)} requests, received {len(body)} results")
        results = []
        for entry in body:
            breakdown = entry.get("breakdown") if isinstance(entry, dict) else None
            results.append(
                ScoreBreakdown(
                    spec_id=_require_field(entry, "spec_id", "score_batch"),
                    total=float(_require_field(entry, "total", "score_batch")),
                    accuracy=breakdown.get("accuracy") if breakdown else None,
                    format=breakdown.get("format") if breakdown else None,
                )
            )
        return results

    def advantages(
        self,
        groups: Sequence[tuple[str, Sequence[float]]] | Mapping[str, Sequence[float]],
        epsilon: float | None = None,
        group_size: int | None = None,
    ) -> list[AdvantageVector]:
        """Group-normalized advantages, one vector per group in input order.

        Group sizes are validated locally before anything is sent: every
        group must match `group_size` when given, or the first group's size
        otherwise, and no group may have fewer than two rewards."""
        items = list(groups.items()) if isinstance(groups, Mapping) else list(groups)
        if not items:
            return []
        expected = group_size
        for prompt_id, rewards in items:
            if expected is None:
                expected = len(rewards)
            if len(rewards) != expected:
                raise ValidationError(
                    f"group {prompt_id!r} has {len(rewards)} rewards, expected {expected}"
                )
        if expected is not None and expected < 2:
            raise ValidationError("groups need at least 2 rewards")

        results = []
        for prompt_id, rewards in items:
            payload: dict[str, Any] = {"prompt_id": prompt_id, "rewards": [float(r) for r in rewards]}
            if epsilon is not None:
                payload["epsilon"] = epsilon
            body = self._post("/v1/advantages", payload)
            results.append(
                AdvantageVector(
                    prompt_id=_require_field(body, "prompt_id", "advantages"),
                    advantages=tuple(float(a) for a in _require_field(body, "advantages", "advantages")),
                    degenerate=bool(_require_field(body, "degenerate", "advantages")),
                )
            )
        return results

    def health(self) -> dict:
        return self._get("/v1/health")

    def _get(self, path: str) -> Any:
        try:
            response = self._http.get(path)
        except httpx.HTTPError as exc:
            raise TransportError(f"GET {path} failed: {exc}") from exc
        return self._parse(response)


def score_batch(config: ClientConfig, pairs: Iterable[tuple[str | Mapping[str, Any], str]]) -> list[ScoreBreakdown]:
    """One-shot convenience over a short-lived client."""
    with TrainerClient(config) as client:
        return client.score_batch(pairs)


def advantages(
    config: ClientConfig,
    groups: Sequence[tuple[str, Sequence[float]]] | Mapping[str, Sequence[float]],
    epsilon: float | None = None,
    group_size: int | None = None,
) -> list[AdvantageVector]:
    """One-shot convenience over a short-lived client."""
    with TrainerClient(config) as client:
        return client.advantages(groups, epsilon=epsilon, group_size=group_size)
