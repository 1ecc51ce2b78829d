"""Rule-based accuracy and format rewards over think-tagged rollouts.

All functions here are pure and total: every string, including empty,
whitespace-only and tag-only input, scores to 0 or 1. Malformed rollouts are
values, not errors, because malformed output must score 0.
"""

from __future__ import annotations

import functools
import json
import math
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from . import dsl

OPEN_TAG = "<think>"
CLOSE_TAG = "</think>"

# CJK Unified Ideographs plus Extension A; punctuation deliberately excluded.
DEFAULT_CJK_RANGES: tuple[tuple[int, int], ...] = ((0x3400, 0x4DBF), (0x4E00, 0x9FFF))


class SpecLabel(str, Enum):
    STV = "STV"
    MTDP = "MTDP"


def normalize_for_match(text: str) -> str:
    """NFC plus case folding; folding only affects cased (non-CJK) scripts."""
    return unicodedata.normalize("NFC", text).casefold()


@dataclass(frozen=True)
class RewardSpec:
    """Per-sample verification contract: an STV keyword or an MTDP expression."""

    id: str
    label: SpecLabel
    keyword: str | None = None
    expression: dsl.Expr | None = None
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        label = SpecLabel(self.label)
        object.__setattr__(self, "label", label)
        if label is SpecLabel.STV:
            if self.keyword is None or self.expression is not None:
                raise ValueError(f"spec {self.id!r}: STV requires keyword and no expression")
            if not unicodedata.normalize("NFC", self.keyword).strip():
                raise ValueError(f"spec {self.id!r}: keyword empty after normalization")
        else:
            if self.expression is None or self.keyword is not None:
                raise ValueError(f"spec {self.id!r}: MTDP requires expression and no keyword")
            dsl.validate(self.expression)


@dataclass(frozen=True)
class ModelResponse:
    """A rollout split into think and answer segments.

    If well_formed, raw == OPEN_TAG + think + CLOSE_TAG + answer and raw
    contains exactly one of each tag.
    """

    raw: str
    think: str
    answer: str
    well_formed: bool


def parse_response(raw: str) -> ModelResponse:
    """Split a rollout on the think tags. Well-formed means: exactly one open
    and one close tag, the rollout starts with the open tag, and both segments
    are non-empty after trimming."""
    if (
        raw.count(OPEN_TAG) == 1
        and raw.count(CLOSE_TAG) == 1
        and raw.startswith(OPEN_TAG)
    ):
        close = raw.index(CLOSE_TAG)
        think = raw[len(OPEN_TAG) : close]
        answer = raw[close + len(CLOSE_TAG) :]
        if think.strip() and answer.strip():
            return ModelResponse(raw=raw, think=think, answer=answer, well_formed=True)
    return ModelResponse(raw=raw, think="", answer="", well_formed=False)


@dataclass(frozen=True)
class FormatConfig:
    """Format-reward knobs: the special vocabulary, the strict Chinese-ratio
    threshold and the per-token repetition cap."""

    special_vocab: frozenset[str]
    chinese_ratio_threshold: float = 0.70
    max_special_repeat: int = 3
    cjk_ranges: tuple[tuple[int, int], ...] = DEFAULT_CJK_RANGES

    def __post_init__(self) -> None:
        object.__setattr__(self, "special_vocab", frozenset(self.special_vocab))
        object.__setattr__(self, "cjk_ranges", tuple(tuple(r) for r in self.cjk_ranges))
        if not 0 < self.chinese_ratio_threshold < 1:
            raise ValueError("chinese_ratio_threshold must be in (0, 1)")
        if self.max_special_repeat < 1:
            raise ValueError("max_special_repeat must be >= 1")
        if any(not token for token in self.special_vocab):
            raise ValueError("special_vocab entries must be non-empty")
        prev_hi = -1
        for lo, hi in self.cjk_ranges:
            if lo > hi or lo <= prev_hi:
                raise ValueError("cjk_ranges must be sorted and non-overlapping")
            prev_hi = hi


@dataclass(frozen=True)
class RewardBreakdown:
    """Scalar training reward with its {0,1} components."""

    accuracy: int
    format: int
    total: float
    spec_id: str


@functools.lru_cache(maxsize=16)
def _cjk_pattern(ranges: tuple[tuple[int, int], ...]) -> re.Pattern[str]:
    cls = "".join(f"{re.escape(chr(lo))}-{re.escape(chr(hi))}" for lo, hi in ranges)
    return re.compile(f"[{cls}]")


def chinese_ratio(text: str, ranges: tuple[tuple[int, int], ...] = DEFAULT_CJK_RANGES) -> float:
    """CJK codepoints over non-whitespace codepoints; 0 for empty or
    all-whitespace input."""
    non_ws = sum(len(chunk) for chunk in text.split())
    if non_ws == 0:
        return 0.0
    cjk = len(_cjk_pattern(tuple(tuple(r) for r in ranges)).findall(text))
    return cjk / non_ws


def special_vocab_ok(response: ModelResponse, cfg: FormatConfig) -> bool:
    """False when the trimmed answer is exactly a special token, or any special
    token occurs more than max_special_repeat times (non-overlapping) in raw."""
    if response.answer.strip() in cfg.special_vocab:
        return False
    for token in cfg.special_vocab:
        if response.raw.count(token) > cfg.max_special_repeat:
            return False
    return True


def accuracy_reward(spec: RewardSpec, response_text: str) -> int:
    """1 iff the response passes its verification contract: STV keyword
    containment (NFC + casefold) or MTDP expression truth."""
    if spec.label is SpecLabel.STV:
        assert spec.keyword is not None
        hit = normalize_for_match(spec.keyword) in normalize_for_match(response_text)
        return 1 if hit else 0
    assert spec.expression is not None
    return 1 if dsl.evaluate(spec.expression, response_text) else 0


def format_reward(raw: str, cfg: FormatConfig | None = None) -> int:
    """1 iff the rollout is well-formed, its de-tagged Chinese ratio strictly
    exceeds the threshold, and the special-vocab checks pass."""
    if cfg is None:
        cfg = default_format_config()
    response = parse_response(raw)
    if not response.well_formed:
        return 0
    detagged = raw.replace(OPEN_TAG, "").replace(CLOSE_TAG, "")
    if not chinese_ratio(detagged, cfg.cjk_ranges) > cfg.chinese_ratio_threshold:
        return 0
    if not special_vocab_ok(response, cfg):
        return 0
    return 1


def total_reward(
    spec: RewardSpec,
    raw: str,
    cfg: FormatConfig | None = None,
    weights: tuple[float, float] = (1.0, 1.0),
) -> RewardBreakdown:
    """Weighted sum of the two {0,1} components; weights default to (1, 1)."""
    w_acc, w_fmt = weights
    if not (math.isfinite(w_acc) and math.isfinite(w_fmt)) or w_acc < 0 or w_fmt < 0:
        raise ValueError("weights must be finite and non-negative")
    acc = accuracy_reward(spec, raw)
    fmt = format_reward(raw, cfg)
    return RewardBreakdown(accuracy=acc, format=fmt, total=w_acc * acc + w_fmt * fmt, spec_id=spec.id)


@dataclass(frozen=True)
class ScoringConfig:
    """FormatConfig plus the reward combination weights, as loaded from a
    config file (keys: special_vocab, chinese_ratio_threshold,
    max_special_repeat, cjk_ranges, weights)."""

    format: FormatConfig
    weight_accuracy: float = 1.0
    weight_format: float = 1.0

    @property
    def weights(self) -> tuple[float, float]:
        return (self.weight_accuracy, self.weight_format)


def _parse_range(value: Any) -> tuple[int, int]:
    if isinstance(value, str):
        lo, _, hi = value.partition("-")
        return (int(lo, 16), int(hi, 16))
    lo, hi = value
    return (int(lo), int(hi))


def scoring_config_from_dict(data: Mapping[str, Any]) -> ScoringConfig:
    defaults = _default_config_data()
    vocab = data.get("special_vocab", defaults["special_vocab"])
    ranges = tuple(_parse_range(r) for r in data.get("cjk_ranges", defaults["cjk_ranges"]))
    fmt = FormatConfig(
        special_vocab=frozenset(vocab),
        chinese_ratio_threshold=float(data.get("chinese_ratio_threshold", defaults["chinese_ratio_threshold"])),
        max_special_repeat=int(data.get("max_special_repeat", defaults["max_special_repeat"])),
        cjk_ranges=ranges,
    )
    weights = data.get("weights", defaults["weights"])
    return ScoringConfig(
        format=fmt,
        weight_accuracy=float(weights["accuracy"]),
        weight_format=float(weights["format"]),
    )


def load_scoring_config(path: str | Path) -> ScoringConfig:
    with open(path, encoding="utf-8") as fh:
        return scoring_config_from_dict(json.load(fh))


@functools.lru_cache(maxsize=1)
def _default_config_data() -> dict[str, Any]:
    text = resources.files("rolereward.data").joinpath("format_config.json").read_text("utf-8")
    return json.loads(text)


@functools.lru_cache(maxsize=1)
def default_scoring_config() -> ScoringConfig:
    data = _default_config_data()
    ranges = tuple(_parse_range(r) for r in data["cjk_ranges"])
    fmt = FormatConfig(
        special_vocab=frozenset(data["special_vocab"]),
        chinese_ratio_threshold=float(data["chinese_ratio_threshold"]),
        max_special_repeat=int(data["max_special_repeat"]),
        cjk_ranges=ranges,
    )
    return ScoringConfig(
        format=fmt,
        weight_accuracy=float(data["weights"]["accuracy"]),
        weight_format=float(data["weights"]["format"]),
    )


def default_format_config() -> FormatConfig:
    return default_scoring_config().format
