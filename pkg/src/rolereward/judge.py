"""Uniform client over external LLM judge services.

One client interface covers keyword extraction, expansion, legitimacy checks,
CoT rewriting and correctness judging; a deterministic mock backend keyed by
prompt hash keeps every pipeline testable offline. Judge output never enters
a pipeline untyped: it always passes through parse_contracted_output.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import string
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol

import httpx

from . import dsl


class JudgeError(Exception):
    pass


class TransportError(JudgeError):
    """Transient transport failure; eligible for retry."""


class RetriesExhaustedError(JudgeError):
    pass


class FixtureMissError(JudgeError):
    def __init__(self, prompt: str):
        digest = fixture_key(prompt)
        super().__init__(f"no fixture for prompt hash {digest} (prompt starts: {prompt[:60]!r})")
        self.prompt = prompt
        self.key = digest


class ContractViolationError(JudgeError):
    """Judge output did not satisfy its declared contract; carries the raw
    text for audit logs."""

    def __init__(self, message: str, raw: str):
        super().__init__(f"{message}: {raw!r}")
        self.raw = raw


class OutputContract(str, Enum):
    FREE_TEXT = "free_text"
    YES_NO = "yes_no"
    DSL_EXPRESSION = "dsl_expression"
    KEYWORD_LIST = "keyword_list"


@dataclass(frozen=True)
class Sampling:
    temperature: float = 0.0
    max_tokens: int = 1024


@dataclass(frozen=True)
class JudgeBackendConfig:
    """Backend selection plus transport knobs. Credentials are named by
    environment variable only; config files never hold secrets."""

    kind: str  # "remote" | "mock"
    endpoint: str = ""
    model: str = ""
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 4
    credentials_env: str = ""
    fixtures_path: str = ""
    strict: bool = True
    default_response: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("remote", "mock"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


def fixture_key(prompt: str) -> str:
    """Stable key for mock fixtures: sha256 of the exact prompt text."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class Backend(Protocol):
    name: str

    def complete(self, prompt: str, sampling: Sampling) -> str: ...


class MockJudgeBackend:
    """Deterministic fixture-backed judge: identical prompts yield identical
    outputs across runs and platforms. A failure plan lets tests script
    transient transport errors."""

    def __init__(
        self,
        fixtures: Mapping[str, str] | None = None,
        *,
        strict: bool = True,
        default_response: str = "",
        failure_plan: Iterable[bool] = (),
    ):
        self.name = "mock"
        self._fixtures = dict(fixtures or {})
        self._strict = strict
        self._default = default_response
        self._failure_plan = list(failure_plan)
        self._calls = 0

    @property
    def call_count(self) -> int:
        return self._calls

    def add_fixture(self, prompt: str, response: str) -> None:
        self._fixtures[fixture_key(prompt)] = response

    def complete(self, prompt: str, sampling: Sampling) -> str:
        self._calls += 1
        if self._failure_plan and self._failure_plan.pop(0):
            raise TransportError("scripted failure")
        key = fixture_key(prompt)
        if key in self._fixtures:
            return self._fixtures[key]
        if self._strict:
            raise FixtureMissError(prompt)
        return self._default


def load_fixtures(path: str | Path) -> dict[str, str]:
    """Fixture file: {"responses": {sha256-hex: text}} and/or
    {"prompts": {prompt text: text}} (hashed at load time)."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    fixtures = dict(data.get("responses", {}))
    for prompt, response in data.get("prompts", {}).items():
        fixtures[fixture_key(prompt)] = response
    return fixtures


class HttpJudgeBackend:
    """JSON-over-HTTP chat-completion backend: posts {model, messages,
    temperature, max_tokens} and reads the first choice's text."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        timeout: float = 30.0,
        api_key: str | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.name = model or endpoint
        self._endpoint = endpoint
        self._model = model
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def complete(self, prompt: str, sampling: Sampling) -> str:
        payload = {
            "model": self._model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": sampling.temperature,
            "max_tokens": sampling.max_tokens,
        }
        try:
            response = self._client.post(self._endpoint, json=payload)
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if response.status_code >= 500 or response.status_code == 429:
            raise TransportError(f"status {response.status_code}")
        if response.status_code != 200:
            raise JudgeError(f"judge endpoint returned status {response.status_code}: {response.text[:200]}")
        try:
            choice = response.json()["choices"][0]
            text = choice["message"]["content"] if "message" in choice else choice["text"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise JudgeError(f"malformed judge response: {response.text[:200]}") from exc
        if not isinstance(text, str):
            raise JudgeError("judge response text is not a string")
        return text


class AuditLog:
    """Append-only JSONL log of every judge exchange; writes are serialized."""

    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._lock = threading.Lock()

    def record(self, backend: str, prompt: str, response: str) -> None:
        line = json.dumps(
            {"backend": backend, "prompt": prompt, "prompt_sha256": fixture_key(prompt), "response": response},
            ensure_ascii=False,
            sort_keys=True,
        )
        with self._lock:
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


class JudgeClient:
    """Shareable judge handle: bounds in-flight requests with a semaphore and
    retries transient failures with jittered exponential backoff (0.5 s base,
    doubling)."""

    def __init__(
        self,
        backend: Backend,
        *,
        max_retries: int = 3,
        max_in_flight: int = 4,
        backoff_base: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
        audit: AuditLog | None = None,
    ):
        self.backend = backend
        self._max_retries = max_retries
        self._sem = threading.BoundedSemaphore(max_in_flight)
        self._backoff_base = backoff_base
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._audit = audit

    @property
    def backend_name(self) -> str:
        return self.backend.name

    def complete(self, prompt: str, sampling: Sampling = Sampling()) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        with self._sem:
            last: TransportError | None = None
            for attempt in range(self._max_retries + 1):
                try:
                    text = self.backend.complete(prompt, sampling)
                except TransportError as exc:
                    last = exc
                    if attempt < self._max_retries:
                        delay = self._backoff_base * (2**attempt) * self._rng.uniform(0.5, 1.5)
                        self._sleep(delay)
                    continue
                if self._audit is not None:
                    self._audit.record(self.backend.name, prompt, text)
                return text
        raise RetriesExhaustedError(f"judge unavailable after {self._max_retries + 1} attempts") from last

    def ask(self, template: "PromptTemplate", sampling: Sampling = Sampling(), **args: str) -> Any:
        """Render a template, complete it, and parse the output under the
        template's contract."""
        raw = self.complete(template.render(**args), sampling)
        return parse_contracted_output(raw, template.contract)


def client_from_config(
    cfg: JudgeBackendConfig,
    *,
    audit: AuditLog | None = None,
    rng: random.Random | None = None,
) -> JudgeClient:
    if cfg.kind == "mock":
        fixtures = load_fixtures(cfg.fixtures_path) if cfg.fixtures_path else {}
        backend: Backend = MockJudgeBackend(fixtures, strict=cfg.strict, default_response=cfg.default_response)
    else:
        api_key = os.environ.get(cfg.credentials_env) if cfg.credentials_env else None
        backend = HttpJudgeBackend(cfg.endpoint, cfg.model, timeout=cfg.timeout, api_key=api_key)
    return JudgeClient(backend, max_retries=cfg.max_retries, max_in_flight=cfg.max_in_flight, audit=audit, rng=rng)


def backend_config_from_file(path: str | Path) -> JudgeBackendConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return JudgeBackendConfig(**data)


@dataclass(frozen=True)
class PromptTemplate:
    """Named template with declared placeholders and an output contract."""

    id: str
    text: str
    contract: OutputContract
    placeholders: frozenset[str] = field(init=False)

    def __post_init__(self) -> None:
        names = set()
        for _, name, _, _ in string.Formatter().parse(self.text):
            if name is None:
                continue
            if not name:
                raise ValueError(f"template {self.id!r} uses a positional placeholder")
            names.add(name)
        object.__setattr__(self, "placeholders", frozenset(names))
        object.__setattr__(self, "contract", OutputContract(self.contract))

    def render(self, **args: str) -> str:
        missing = self.placeholders - args.keys()
        if missing:
            raise ValueError(f"template {self.id!r} missing arguments: {sorted(missing)}")
        return self.text.format(**{k: args[k] for k in self.placeholders})


_PUNCT_STRIP = " \t\r\n。．.，,！!？?、：:；;\"'“”‘’（）()"


def _affirmation_table() -> dict[str, frozenset[str]]:
    global _AFFIRMATION_CACHE
    if _AFFIRMATION_CACHE is None:
        text = resources.files("rolereward.data").joinpath("affirmation_tokens.json").read_text("utf-8")
        data = json.loads(text)
        _AFFIRMATION_CACHE = {
            "affirmative": frozenset(t.casefold() for t in data["affirmative"]),
            "negative": frozenset(t.casefold() for t in data["negative"]),
        }
    return _AFFIRMATION_CACHE


_AFFIRMATION_CACHE: dict[str, frozenset[str]] | None = None


def parse_contracted_output(raw: str, contract: OutputContract) -> Any:
    """Narrow raw judge text to the contract's type; raises
    ContractViolationError (carrying the raw text) otherwise."""
    contract = OutputContract(contract)
    if contract is OutputContract.FREE_TEXT:
        return raw
    if contract is OutputContract.YES_NO:
        token = raw.strip(_PUNCT_STRIP).casefold()
        table = _affirmation_table()
        if token in table["affirmative"]:
            return True
        if token in table["negative"]:
            return False
        raise ContractViolationError("not a yes/no token", raw)
    if contract is OutputContract.DSL_EXPRESSION:
        try:
            return dsl.parse(raw.strip())
        except dsl.ParseError as exc:
            raise ContractViolationError(f"invalid expression ({exc.diagnostic})", raw) from exc
    # keyword_list
    parts = raw.replace("，", ",").replace("、", ",").replace("\n", ",").split(",")
    return [part.strip() for part in parts if part.strip()]
