"""JSONL record codecs and the spec store.

Serialization is canonical (UTF-8, sorted keys, no spacing) so identical
inputs produce byte-identical files regardless of dict construction order.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator

from . import dsl
from .cot import ColdStartInput, ColdStartRecord
from .curation import CuratedRecord, CurationSample, SourceTag
from .evaluation import EvalRecord, Metric
from .rewards import RewardSpec, SpecLabel


class SchemaError(ValueError):
    """A JSONL line that does not match the expected record shape."""

    def __init__(self, message: str, line_number: int | None = None):
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(prefix + message)
        self.line_number = line_number


def dumps_canonical(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, object) pairs; blank lines are skipped."""
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON ({exc.msg})", number) from exc
            if not isinstance(obj, dict):
                raise SchemaError("expected a JSON object", number)
            yield number, obj


def write_jsonl(path: str | Path, objects: Iterable[Any]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for obj in objects:
            handle.write(dumps_canonical(obj))
            handle.write("\n")
            count += 1
    return count


def _require(obj: dict, key: str, kind: type, line: int | None = None) -> Any:
    if key not in obj:
        raise SchemaError(f"missing field {key!r}", line)
    value = obj[key]
    if not isinstance(value, kind):
        raise SchemaError(f"field {key!r} must be {kind.__name__}, got {type(value).__name__}", line)
    return value


# Reward specs ----------------------------------------------------------------


def spec_to_json(spec: RewardSpec) -> dict:
    obj: dict[str, Any] = {"id": spec.id, "type": spec.label.value}
    if spec.label is SpecLabel.STV:
        obj["keyword"] = spec.keyword
    else:
        obj["expression"] = dsl.render(spec.expression)
    if spec.metadata:
        obj["meta"] = dict(spec.metadata)
    return obj


def spec_from_json(obj: dict, line: int | None = None) -> RewardSpec:
    spec_id = _require(obj, "id", str, line)
    label_raw = _require(obj, "type", str, line)
    try:
        label = SpecLabel(label_raw)
    except ValueError:
        raise SchemaError(f"unknown spec type {label_raw!r}", line) from None
    meta = obj.get("meta") or {}
    if not isinstance(meta, dict):
        raise SchemaError("field 'meta' must be an object", line)
    try:
        if label is SpecLabel.STV:
            return RewardSpec(id=spec_id, label=label, keyword=_require(obj, "keyword", str, line), metadata=meta)
        expression = dsl.parse(_require(obj, "expression", str, line))
        return RewardSpec(id=spec_id, label=label, expression=expression, metadata=meta)
    except dsl.ParseError as exc:
        raise SchemaError(f"invalid expression: {exc}", line) from exc
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(str(exc), line) from exc


# Curation records -------------------------------------------------------------


def curated_to_json(record: CuratedRecord) -> dict:
    sample = record.sample
    obj = spec_to_json(record.spec)
    obj.update(
        {
            "question": sample.question,
            "dialogue": [list(turn) for turn in sample.dialogue_history],
            "profile": sample.character_profile,
        }
    )
    meta = dict(obj.get("meta") or {})
    meta["source"] = sample.source.value
    meta["audit"] = [decision.to_json() for decision in record.audit]
    obj["meta"] = meta
    return obj


def sample_from_json(obj: dict, line: int | None = None) -> CurationSample:
    dialogue_raw = obj.get("dialogue", [])
    if not isinstance(dialogue_raw, list):
        raise SchemaError("field 'dialogue' must be a list", line)
    dialogue = []
    for turn in dialogue_raw:
        if not (isinstance(turn, (list, tuple)) and len(turn) == 2 and all(isinstance(x, str) for x in turn)):
            raise SchemaError("dialogue turns must be [speaker, utterance] string pairs", line)
        dialogue.append((turn[0], turn[1]))
    references = obj.get("references", [])
    keywords = obj.get("candidate_keywords", [])
    probes = obj.get("probe_responses", [])
    for name, value in (("references", references), ("candidate_keywords", keywords), ("probe_responses", probes)):
        if not (isinstance(value, list) and all(isinstance(x, str) for x in value)):
            raise SchemaError(f"field {name!r} must be a list of strings", line)
    try:
        return CurationSample(
            id=_require(obj, "id", str, line),
            character_profile=obj.get("profile", ""),
            dialogue_history=tuple(dialogue),
            question=_require(obj, "question", str, line),
            references=tuple(references),
            candidate_keywords=tuple(keywords),
            source=obj.get("source", SourceTag.GENERAL.value),
            probe_responses=tuple(probes),
        )
    except ValueError as exc:
        raise SchemaError(str(exc), line) from exc


# Cold-start records ------------------------------------------------------------


def cold_start_input_from_json(obj: dict, line: int | None = None) -> ColdStartInput:
    dialogue_raw = obj.get("dialogue", [])
    if not isinstance(dialogue_raw, list):
        raise SchemaError("field 'dialogue' must be a list", line)
    dialogue = []
    for turn in dialogue_raw:
        if not (isinstance(turn, (list, tuple)) and len(turn) == 2 and all(isinstance(x, str) for x in turn)):
            raise SchemaError("dialogue turns must be [speaker, utterance] string pairs", line)
        dialogue.append((turn[0], turn[1]))
    return ColdStartInput(
        id=_require(obj, "id", str, line),
        character_profile=obj.get("profile", ""),
        dialogue_history=tuple(dialogue),
        question=_require(obj, "question", str, line),
        cot=_require(obj, "cot", str, line),
        response=obj.get("response", ""),
    )


def cold_start_to_json(record: ColdStartRecord) -> dict:
    return {
        "id": record.id,
        "system": record.system,
        "messages": [dict(message) for message in record.messages],
        "target": record.target,
        "provenance": dict(record.provenance),
    }


# Evaluation records -------------------------------------------------------------


def eval_record_from_json(obj: dict, line: int | None = None) -> EvalRecord:
    metric_raw = _require(obj, "metric", str, line)
    try:
        metric = Metric(metric_raw)
    except ValueError:
        raise SchemaError(f"unknown metric {metric_raw!r}", line) from None
    return EvalRecord(
        id=_require(obj, "id", str, line),
        metric=metric,
        objective=obj.get("objective", ""),
        reference=obj.get("reference", ""),
        response=_require(obj, "response", str, line),
    )


# Spec store ----------------------------------------------------------------------


class SpecStore:
    """Reward specs indexed by id, reloadable without dropping reads."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._specs: dict[str, RewardSpec] = {}
        self._lock = threading.Lock()
        if self._path is not None:
            self.reload()

    @property
    def path(self) -> Path | None:
        return self._path

    def reload(self) -> int:
        if self._path is None:
            raise ValueError("spec store has no backing file")
        fresh: dict[str, RewardSpec] = {}
        for number, obj in read_jsonl(self._path):
            spec = spec_from_json(obj, number)
            if spec.id in fresh:
                raise SchemaError(f"duplicate spec id {spec.id!r}", number)
            fresh[spec.id] = spec
        with self._lock:
            self._specs = fresh
        return len(fresh)

    def get(self, spec_id: str) -> RewardSpec | None:
        with self._lock:
            return self._specs.get(spec_id)

    def add(self, spec: RewardSpec) -> None:
        with self._lock:
            self._specs[spec.id] = spec

    def __len__(self) -> int:
        with self._lock:
            return len(self._specs)

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._specs)
