"""Cold-start data refinement: bracket-annotation stripping, length
compression, persona style adaptation and response regeneration.

Every accepted record renders as '<think>' + reasoning + '</think>' + answer
and must score 1 under the format reward before it is emitted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

from .judge import JudgeClient, PromptTemplate
from .rewards import CLOSE_TAG, OPEN_TAG, FormatConfig, format_reward
from .templates import DEFAULT_TEMPLATES, get_template, render_history

COMPRESS_THRESHOLD = 500  # reasoning longer than this gets compressed

_BRACKET_PAIRS = {"（": "）", "(": ")", "【": "】", "[": "]"}
_CLOSERS = set(_BRACKET_PAIRS.values())
_CJK_RE = re.compile(r"[㐀-䶿一-鿿]")


@dataclass(frozen=True)
class StripResult:
    text: str
    unbalanced: bool


def strip_meta_annotations(text: str) -> StripResult:
    """Remove outermost parenthesized/bracketed spans (（）, (), 【】, []).

    Unbalanced bracketing returns the input unchanged with a warning flag so
    a malformed annotation never silently loses narrative text. Idempotent:
    balanced output contains no bracket characters at all.
    """
    spans: list[tuple[int, int]] = []
    stack: list[tuple[str, int]] = []
    for index, char in enumerate(text):
        if char in _BRACKET_PAIRS:
            stack.append((char, index))
        elif char in _CLOSERS:
            if not stack or _BRACKET_PAIRS[stack[-1][0]] != char:
                return StripResult(text, True)
            opener, start = stack.pop()
            if not stack:  # only outermost spans are removed
                spans.append((start, index + 1))
    if stack:
        return StripResult(text, True)
    if not spans:
        return StripResult(text, False)
    pieces = []
    cursor = 0
    for start, end in spans:
        pieces.append(text[:start] if cursor == 0 else text[cursor:start])
        cursor = end
    pieces.append(text[cursor:])
    joined = "".join(pieces)
    return StripResult(re.sub(r"\s{2,}", " ", joined).strip(), False)


def token_count(text: str) -> int:
    """Length heuristic: each CJK character counts once, remaining text
    counts by whitespace-split segments."""
    return len(_CJK_RE.findall(text)) + len(_CJK_RE.sub(" ", text).split())


@dataclass(frozen=True)
class RefineOutcome:
    text: str
    warnings: tuple[str, ...] = ()


def compress_cot(
    cot: str,
    judge: JudgeClient,
    threshold: int = COMPRESS_THRESHOLD,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> RefineOutcome:
    """Shorten reasoning that exceeds the token threshold. The judge output
    is only adopted when it is actually shorter."""
    if token_count(cot) <= threshold:
        return RefineOutcome(cot)
    compressed = judge.ask(get_template("cot_compress", templates or DEFAULT_TEMPLATES), cot=cot)
    if not compressed.strip() or token_count(compressed) >= token_count(cot):
        return RefineOutcome(cot, ("compression did not shorten the reasoning; keeping the original",))
    return RefineOutcome(compressed)


def style_adapt(
    cot: str,
    profile: str,
    judge: JudgeClient,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> RefineOutcome:
    """Rewrite reasoning in the character's first-person voice. Re-checks for
    bracketed annotations the judge may have reintroduced: one retry with an
    explicit instruction, then a local strip as the fallback."""
    if not cot.strip():
        return RefineOutcome(cot)
    template = get_template("cot_style", templates or DEFAULT_TEMPLATES)
    adapted = judge.ask(template, profile=profile, cot=cot)
    warnings: list[str] = []
    if _has_bracket(adapted):
        retry = PromptTemplate(
            id=template.id + "_retry",
            text=template.text + "\n\n输出中不要包含任何括号注释。",
            contract=template.contract,
        )
        adapted = judge.ask(retry, profile=profile, cot=cot)
        if _has_bracket(adapted):
            stripped = strip_meta_annotations(adapted)
            adapted = stripped.text
            warnings.append("style adaptation kept bracketed annotations after a retry; stripped locally")
    if not adapted.strip():
        return RefineOutcome(cot, ("style adaptation produced empty text; keeping the original",))
    return RefineOutcome(adapted, tuple(warnings))


def _has_bracket(text: str) -> bool:
    return any(char in text for char in "（）()【】[]")


def regenerate_response(
    history: str,
    cot: str,
    judge: JudgeClient,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> str:
    """Continue from the refined reasoning to a spoken reply."""
    return judge.ask(get_template("cot_continue", templates or DEFAULT_TEMPLATES), history=history, cot=cot)


@dataclass(frozen=True)
class ColdStartInput:
    id: str
    character_profile: str
    dialogue_history: tuple[tuple[str, str], ...]
    question: str
    cot: str
    response: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "dialogue_history", tuple(tuple(turn) for turn in self.dialogue_history))


@dataclass(frozen=True)
class ColdStartRecord:
    id: str
    system: str
    messages: tuple[dict[str, str], ...]
    target: str
    provenance: dict[str, str] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ColdStartRejection:
    id: str
    stage: str
    detail: str


def build_cold_start_record(
    item: ColdStartInput,
    judge: JudgeClient,
    *,
    format_config: FormatConfig | None = None,
    compress_threshold: int = COMPRESS_THRESHOLD,
    token_cap: int | None = None,
    templates: Mapping[str, PromptTemplate] | None = None,
    backend_name: str = "",
) -> ColdStartRecord | ColdStartRejection:
    """Full refinement chain for one training example.

    Strip annotations, compress over-long reasoning, adapt to the persona
    voice, regenerate the reply, then gate on the format reward of the
    rendered target. `token_cap` (default: the compression threshold) drops
    records whose reasoning stays over budget even after compression.
    """
    templates = templates or DEFAULT_TEMPLATES
    warnings: list[str] = []

    stripped = strip_meta_annotations(item.cot)
    if stripped.unbalanced:
        warnings.append("unbalanced brackets in the source reasoning; kept verbatim")
    cot = stripped.text
    if not cot.strip():
        return ColdStartRejection(item.id, "strip", "reasoning is empty after annotation stripping")

    outcome = compress_cot(cot, judge, threshold=compress_threshold, templates=templates)
    warnings.extend(outcome.warnings)
    cot = outcome.text

    cap = compress_threshold if token_cap is None else token_cap
    if token_count(cot) > cap:
        return ColdStartRejection(item.id, "length", f"reasoning still over {cap} tokens after compression")

    outcome = style_adapt(cot, item.character_profile, judge, templates=templates)
    warnings.extend(outcome.warnings)
    cot = outcome.text

    history = render_history(item.dialogue_history)
    answer = regenerate_response(history, cot, judge, templates=templates)
    if not answer.strip():
        return ColdStartRejection(item.id, "regenerate", "regenerated reply is empty")

    target = f"{OPEN_TAG}{cot}{CLOSE_TAG}{answer}"
    if format_reward(target, format_config) != 1:
        return ColdStartRejection(item.id, "format", "rendered target fails the format reward")

    messages = tuple(
        {"role": "user" if speaker == "user" else "assistant", "content": utterance}
        for speaker, utterance in item.dialogue_history
    ) + ({"role": "user", "content": item.question},)
    return ColdStartRecord(
        id=item.id,
        system=item.character_profile,
        messages=messages,
        target=target,
        provenance={"backend": backend_name, "templates": "cot_compress,cot_style,cot_continue"},
        warnings=tuple(warnings),
    )
