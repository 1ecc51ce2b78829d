"""Data-production workflows: single-keyword validation, multi-keyword
expression mining, hard-sample filtering and distribution balancing.

Both pipelines turn raw dialogue samples into reward-spec-labeled records and
emit an audit trail of every filter decision, so an accepted record can be
re-checked post hoc without the judge.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Any, Callable, Iterable, Mapping, Sequence

from . import dsl
from .judge import JudgeClient, JudgeError, PromptTemplate
from .rewards import RewardSpec, SpecLabel, accuracy_reward, normalize_for_match
from .templates import DEFAULT_TEMPLATES, get_template, render_history

CONSISTENCY_PROBE_COUNT = 10
CONSISTENCY_THRESHOLD = 0.70  # strict: agreement must exceed this


class QuestionType(str, Enum):
    WH = "WH"
    POLAR = "Polar"
    ALTERNATIVE = "Alternative"
    OTHER = "Other"


class SourceTag(str, Enum):
    BENCHMARK = "benchmark"
    GENERAL = "general"


class CurationPipelineError(Exception):
    """Judge/transport failure inside a pipeline, tagged with the sample id."""

    def __init__(self, sample_id: str, cause: Exception):
        super().__init__(f"sample {sample_id!r}: {cause}")
        self.sample_id = sample_id
        self.cause = cause


class InfeasibleTargetsError(ValueError):
    def __init__(self, buckets: Sequence[str], reason: str):
        super().__init__(f"infeasible balance targets ({reason}): {', '.join(buckets)}")
        self.buckets = list(buckets)


@dataclass(frozen=True)
class CurationSample:
    """Raw dialogue sample entering a curation pipeline."""

    id: str
    character_profile: str
    dialogue_history: tuple[tuple[str, str], ...]
    question: str
    references: tuple[str, ...] = ()
    candidate_keywords: tuple[str, ...] = ()
    source: SourceTag = SourceTag.GENERAL
    probe_responses: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "dialogue_history", tuple(tuple(turn) for turn in self.dialogue_history))
        object.__setattr__(self, "references", tuple(self.references))
        object.__setattr__(self, "candidate_keywords", tuple(self.candidate_keywords))
        object.__setattr__(self, "probe_responses", tuple(self.probe_responses))
        object.__setattr__(self, "source", SourceTag(self.source))
        if self.source is SourceTag.BENCHMARK and not self.dialogue_history:
            raise ValueError(f"sample {self.id!r}: benchmark samples need a dialogue history")
        if any(not ref for ref in self.references):
            raise ValueError(f"sample {self.id!r}: references must be non-empty")


@dataclass(frozen=True)
class CurationDecision:
    outcome: str  # "accepted" | "rejected"
    stage: str
    detail: str = ""

    def __post_init__(self) -> None:
        if self.outcome not in ("accepted", "rejected"):
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if self.outcome == "rejected" and not self.stage:
            raise ValueError("rejected decisions must name a stage")

    @property
    def accepted(self) -> bool:
        return self.outcome == "accepted"

    def to_json(self) -> dict[str, str]:
        return {"outcome": self.outcome, "stage": self.stage, "detail": self.detail}


@dataclass(frozen=True)
class CuratedRecord:
    """Pipeline output: a reward spec plus the sample context and audit trail."""

    sample: CurationSample
    spec: RewardSpec
    audit: tuple[CurationDecision, ...]


_RULES_CACHE: dict[str, Any] | None = None


def question_rules() -> dict[str, Any]:
    global _RULES_CACHE
    if _RULES_CACHE is None:
        text = resources.files("rolereward.data").joinpath("question_rules.json").read_text("utf-8")
        _RULES_CACHE = json.loads(text)
    return _RULES_CACHE


def classify_question(question: str, rules: Mapping[str, Any] | None = None) -> QuestionType:
    """Deterministic rule-table classification; precedence
    Alternative > Polar > WH > Other."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    table = question_rules() if rules is None else rules
    lowered = question.casefold()
    words = re.findall(r"[a-z']+", lowered)

    if any(marker in question for marker in table["alternative_markers_zh"]):
        return QuestionType.ALTERNATIVE
    if table["alternative_word_en"] in words:
        return QuestionType.ALTERNATIVE

    core = question.rstrip(" \t\r\n？?。．.！!…~～”\"'）)")
    if any(core.endswith(suffix) for suffix in table["polar_final_zh"]):
        return QuestionType.POLAR
    if any(re.search(pattern, question) for pattern in table["a_not_a_patterns"]):
        return QuestionType.POLAR
    if words and words[0] in table["aux_first_en"]:
        return QuestionType.POLAR

    if any(marker in question for marker in table["wh_markers_zh"]):
        return QuestionType.WH
    if words and words[0] in table["wh_first_en"]:
        return QuestionType.WH

    return QuestionType.OTHER


def dedupe_keywords(keywords: Iterable[str]) -> list[str]:
    """Order-preserving dedup on the match normalization (NFC + casefold)."""
    seen: dict[str, str] = {}
    for keyword in keywords:
        keyword = keyword.strip()
        if not keyword:
            continue
        key = normalize_for_match(keyword)
        if key not in seen:
            seen[key] = keyword
    return list(seen.values())


def enforce_cardinality(keywords: Sequence[str]) -> str | CurationDecision:
    """Exactly one keyword survives, or the sample is rejected."""
    deduped = dedupe_keywords(keywords)
    if len(deduped) == 1:
        return deduped[0]
    return CurationDecision("rejected", "cardinality", f"{len(deduped)} keywords after dedup, need exactly 1")


def multiref_verify(keyword: str, references: Sequence[str]) -> bool:
    """True iff the normalized keyword appears in every reference."""
    if not keyword.strip():
        raise ValueError("keyword must be non-empty")
    if not references:
        raise ValueError("at least one reference is required")
    needle = normalize_for_match(keyword)
    return all(needle in normalize_for_match(ref) for ref in references)


def _wrap_judge_errors(sample_id: str):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, JudgeError):
                raise CurationPipelineError(sample_id, exc) from exc
            return False

    return _Ctx()


def stv_curate(
    sample: CurationSample,
    judge: JudgeClient,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> CuratedRecord | CurationDecision:
    """Single-keyword pipeline: WH filter, judge extraction, judge entity
    check, cardinality, multi-reference verification."""
    templates = templates or DEFAULT_TEMPLATES
    trail: list[CurationDecision] = []

    qtype = classify_question(sample.question)
    if qtype is not QuestionType.WH:
        return CurationDecision("rejected", "question_type", f"classified {qtype.value}")
    trail.append(CurationDecision("accepted", "question_type", qtype.value))

    with _wrap_judge_errors(sample.id):
        keywords = judge.ask(
            get_template("stv_extract", templates),
            question=sample.question,
            references="\n".join(sample.references),
        )
    keywords = dedupe_keywords(keywords)
    if not keywords:
        return CurationDecision("rejected", "extraction", "judge extracted no keywords")
    trail.append(CurationDecision("accepted", "extraction", ", ".join(keywords)))

    nominal: list[str] = []
    with _wrap_judge_errors(sample.id):
        for keyword in keywords:
            if judge.ask(get_template("entity_check", templates), keyword=keyword, question=sample.question):
                nominal.append(keyword)
    if not nominal:
        return CurationDecision("rejected", "entity_type", "no keyword passed the entity check")
    trail.append(CurationDecision("accepted", "entity_type", ", ".join(nominal)))

    chosen = enforce_cardinality(nominal)
    if isinstance(chosen, CurationDecision):
        return chosen
    trail.append(CurationDecision("accepted", "cardinality", chosen))

    if not sample.references:
        return CurationDecision("rejected", "multiref", "no references available")
    if not multiref_verify(chosen, sample.references):
        return CurationDecision("rejected", "multiref", f"keyword {chosen!r} missing from a reference")
    trail.append(CurationDecision("accepted", "multiref", f"{len(sample.references)} references"))

    spec = RewardSpec(id=sample.id, label=SpecLabel.STV, keyword=chosen)
    return CuratedRecord(sample=sample, spec=spec, audit=tuple(trail))


def expand_keywords(
    keywords: Sequence[str],
    judge: JudgeClient,
    question: str = "",
    templates: Mapping[str, PromptTemplate] | None = None,
) -> list[str]:
    """Judge-driven variant expansion; originals are retained, output deduped."""
    if not keywords:
        return []
    variants = judge.ask(
        get_template("expand", templates or DEFAULT_TEMPLATES),
        keywords=", ".join(keywords),
        question=question,
    )
    return dedupe_keywords(list(keywords) + list(variants))


def filter_legitimacy(
    variants: Sequence[str],
    context: str,
    judge: JudgeClient,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> list[str]:
    """Keep only variants the judge affirms as contextually relevant."""
    template = get_template("legitimacy", templates or DEFAULT_TEMPLATES)
    return [v for v in variants if judge.ask(template, keyword=v, context=context)]


def generate_expression(
    variants: Sequence[str],
    judge: JudgeClient,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> dsl.Expr | CurationDecision:
    """Ask the judge for a verification expression; every literal must come
    from the variant list."""
    from .judge import ContractViolationError

    try:
        expr = judge.ask(
            get_template("gen_expression", templates or DEFAULT_TEMPLATES),
            variants=", ".join(variants),
        )
    except ContractViolationError as exc:
        return CurationDecision("rejected", "expression_parse", str(exc))
    allowed = {normalize_for_match(v) for v in variants}
    for literal in dsl.literals(expr):
        if normalize_for_match(literal) not in allowed:
            return CurationDecision("rejected", "foreign_literal", f"literal {literal!r} not in the variant list")
    return expr


def consistency_validate(
    expr: dsl.Expr,
    judge: JudgeClient,
    probe_responses: Sequence[str],
    question: str = "",
    keywords: str = "",
    templates: Mapping[str, PromptTemplate] | None = None,
) -> tuple[bool, int]:
    """Compare expression verdicts against judge verdicts on the probe
    responses; retain iff agreement strictly exceeds 70%. Returns
    (retain, agreement count)."""
    if len(probe_responses) != CONSISTENCY_PROBE_COUNT:
        raise ValueError(f"need exactly {CONSISTENCY_PROBE_COUNT} probe responses, got {len(probe_responses)}")
    template = get_template("probe_judge", templates or DEFAULT_TEMPLATES)
    agreements = 0
    for probe in probe_responses:
        expr_verdict = dsl.evaluate(expr, probe)
        judge_verdict = judge.ask(template, question=question, keywords=keywords, response=probe)
        if expr_verdict == judge_verdict:
            agreements += 1
    return (agreements / len(probe_responses) > CONSISTENCY_THRESHOLD, agreements)


def mtdp_curate(
    sample: CurationSample,
    judge: JudgeClient,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> CuratedRecord | CurationDecision:
    """Multi-keyword pipeline: expansion, legitimacy filter, expression
    generation, probe-consistency validation."""
    templates = templates or DEFAULT_TEMPLATES
    trail: list[CurationDecision] = []

    keywords = list(sample.candidate_keywords)
    if not keywords:
        with _wrap_judge_errors(sample.id):
            keywords = dedupe_keywords(
                judge.ask(
                    get_template("stv_extract", templates),
                    question=sample.question,
                    references="\n".join(sample.references),
                )
            )
    if not keywords:
        return CurationDecision("rejected", "extraction", "no candidate keywords")
    trail.append(CurationDecision("accepted", "extraction", ", ".join(keywords)))

    with _wrap_judge_errors(sample.id):
        variants = expand_keywords(keywords, judge, question=sample.question, templates=templates)
    trail.append(CurationDecision("accepted", "expansion", ", ".join(variants)))

    with _wrap_judge_errors(sample.id):
        legitimate = filter_legitimacy(variants, sample.question, judge, templates=templates)
    if not legitimate:
        return CurationDecision("rejected", "legitimacy", "no variant judged relevant")
    trail.append(CurationDecision("accepted", "legitimacy", ", ".join(legitimate)))

    with _wrap_judge_errors(sample.id):
        expr = generate_expression(legitimate, judge, templates=templates)
    if isinstance(expr, CurationDecision):
        return expr
    trail.append(CurationDecision("accepted", "expression", dsl.render(expr)))

    if len(sample.probe_responses) != CONSISTENCY_PROBE_COUNT:
        return CurationDecision(
            "rejected", "probes", f"need exactly {CONSISTENCY_PROBE_COUNT} probe responses, got {len(sample.probe_responses)}"
        )
    with _wrap_judge_errors(sample.id):
        retained, agreements = consistency_validate(
            expr,
            judge,
            sample.probe_responses,
            question=sample.question,
            keywords=", ".join(legitimate),
            templates=templates,
        )
    if not retained:
        return CurationDecision(
            "rejected", "consistency", f"{agreements}/{CONSISTENCY_PROBE_COUNT} agreement is not over {CONSISTENCY_THRESHOLD:.0%}"
        )
    trail.append(CurationDecision("accepted", "consistency", f"{agreements}/{CONSISTENCY_PROBE_COUNT}"))

    spec = RewardSpec(id=sample.id, label=SpecLabel.MTDP, expression=expr)
    return CuratedRecord(sample=sample, spec=spec, audit=tuple(trail))


def hard_sample_filter(
    sample: CurationSample,
    baseline: JudgeClient,
    checker: RewardSpec | JudgeClient,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> bool:
    """Generate the baseline model's answer and keep the sample iff that
    answer is incorrect (challenging data)."""
    templates = templates or DEFAULT_TEMPLATES
    with _wrap_judge_errors(sample.id):
        answer = baseline.ask(
            get_template("baseline_answer", templates),
            profile=sample.character_profile,
            history=render_history(sample.dialogue_history),
            question=sample.question,
        )
        if isinstance(checker, RewardSpec):
            correct = accuracy_reward(checker, answer) == 1
        else:
            correct = checker.ask(
                get_template("hard_check", templates),
                question=sample.question,
                answer=answer,
                references="\n".join(sample.references),
            )
    return not correct


def generate_question(
    sample: CurationSample,
    judge: JudgeClient,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> str:
    """Template invocation producing a question for profile-only samples;
    quality is owned by the configured backend."""
    with _wrap_judge_errors(sample.id):
        return judge.ask(
            get_template("gen_question", templates or DEFAULT_TEMPLATES),
            profile=sample.character_profile,
            history=render_history(sample.dialogue_history),
        )


# Distribution balancing ------------------------------------------------------

HISTORY_BUCKETS = (("short", 0, 4), ("medium", 5, 12), ("long", 13, None))


def history_length_bucket(turns: int) -> str:
    for name, lo, hi in HISTORY_BUCKETS:
        if turns >= lo and (hi is None or turns <= hi):
            return name
    return HISTORY_BUCKETS[-1][0]


def default_bucket(record: CuratedRecord) -> str:
    """Joint history-length x question-type bucket key, e.g. "short|WH"."""
    hist = history_length_bucket(len(record.sample.dialogue_history))
    qtype = classify_question(record.sample.question).value
    return f"{hist}|{qtype}"


def _largest_remainder(n: int, targets: Mapping[str, float]) -> dict[str, int]:
    quotas = {bucket: n * share for bucket, share in targets.items()}
    take = {bucket: int(quota) for bucket, quota in quotas.items()}
    leftover = n - sum(take.values())
    by_remainder = sorted(quotas, key=lambda b: (-(quotas[b] - take[b]), b))
    for bucket in by_remainder[:leftover]:
        take[bucket] += 1
    return take


def balance_distribution(
    records: Sequence[Any],
    targets: Mapping[str, float],
    bucket_of: Callable[[Any], str] = default_bucket,
    *,
    seed: int = 0,
    tolerance: float = 0.05,
) -> list[Any]:
    """Seeded subsampling so bucket proportions land within tolerance of the
    targets. Never fabricates records; keeps input order. Targets equal to the
    empirical distribution are a fixed point (output == input)."""
    total_share = sum(targets.values())
    if total_share <= 0:
        raise InfeasibleTargetsError(sorted(targets), "target proportions sum to zero")
    shares = {bucket: share / total_share for bucket, share in targets.items() if share > 0}

    by_bucket: dict[str, list[int]] = {}
    for index, record in enumerate(records):
        by_bucket.setdefault(bucket_of(record), []).append(index)

    empty = sorted(bucket for bucket in shares if not by_bucket.get(bucket))
    if empty:
        raise InfeasibleTargetsError(empty, "nonzero mass demanded from empty buckets")

    counts = {bucket: len(by_bucket.get(bucket, ())) for bucket in shares}
    for n in range(len(records), 0, -1):
        take = _largest_remainder(n, shares)
        if all(take[bucket] <= counts[bucket] for bucket in shares):
            break
    else:
        raise InfeasibleTargetsError(sorted(shares), "no feasible sample size")

    off_target = sorted(bucket for bucket in shares if abs(take[bucket] / n - shares[bucket]) > tolerance)
    if off_target:
        raise InfeasibleTargetsError(off_target, f"proportions deviate more than {tolerance} at n={n}")

    rng = random.Random(seed)
    selected: list[int] = []
    for bucket in sorted(shares):
        indices = by_bucket[bucket]
        wanted = take[bucket]
        selected.extend(indices if wanted >= len(indices) else rng.sample(indices, wanted))
    return [records[i] for i in sorted(selected)]
