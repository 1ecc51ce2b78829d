"""Judge-scored evaluation over six role-play metrics, with exact decimal
accuracy reporting and reasoning-length statistics."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Iterable, Mapping

from .cot import token_count
from .judge import JudgeClient, PromptTemplate
from .rewards import parse_response
from .templates import DEFAULT_TEMPLATES, get_template


class Metric(str, Enum):
    SBK = "SBK"  # grounding in the scripted knowledge
    CM = "CM"  # memory of the prior conversation
    SCK = "SCK"  # staying inside the character's knowledge boundary
    RCB = "RCB"  # refusing questions beyond that boundary
    TA = "TA"  # answering in the character's tone
    TS = "TS"  # keeping that tone under pressure


_TEMPLATE_BY_METRIC = {
    Metric.SBK: "eval_sbk",
    Metric.CM: "eval_cm",
    Metric.SCK: "eval_sck",
    Metric.RCB: "eval_rcb",
    Metric.TA: "eval_ta",
    Metric.TS: "eval_ts",
}


@dataclass(frozen=True)
class EvalRecord:
    id: str
    metric: Metric
    objective: str
    reference: str
    response: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "metric", Metric(self.metric))


@dataclass(frozen=True)
class MetricReport:
    metric: Metric
    correct: int
    total: int
    unevaluated: int
    accuracy_percent: Decimal

    def to_json(self) -> dict:
        return {
            "metric": self.metric.value,
            "correct": self.correct,
            "total": self.total,
            "unevaluated": self.unevaluated,
            "accuracy_percent": str(self.accuracy_percent),
        }


def judge_correctness(
    record: EvalRecord,
    judge: JudgeClient,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> bool:
    """One yes/no verdict for one record. Contract violations propagate; the
    driver decides whether to count the record as unevaluated."""
    template = get_template(_TEMPLATE_BY_METRIC[record.metric], templates or DEFAULT_TEMPLATES)
    return judge.ask(
        template,
        objective=record.objective,
        reference=record.reference,
        response=record.response,
    )


def metric_accuracy(correct: int, total: int) -> Decimal:
    """Percentage with exact decimal rounding, half away from zero, two
    places (81 of 92 reports 88.04)."""
    if total < 0 or correct < 0 or correct > total:
        raise ValueError(f"invalid tally {correct}/{total}")
    if total == 0:
        raise ValueError("no evaluated records")
    percent = Decimal(correct) * 100 / Decimal(total)
    return percent.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def evaluate_records(
    records: Iterable[EvalRecord],
    judge: JudgeClient,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> list[MetricReport]:
    """Score every record and aggregate per metric. Records whose verdict
    cannot be obtained are excluded from the accuracy and counted."""
    from .judge import JudgeError

    tallies: dict[Metric, list[int]] = {}  # [correct, total, unevaluated]
    for record in records:
        tally = tallies.setdefault(record.metric, [0, 0, 0])
        try:
            verdict = judge_correctness(record, judge, templates)
        except JudgeError:
            tally[2] += 1
            continue
        tally[0] += int(verdict)
        tally[1] += 1

    reports = []
    for metric in Metric:
        if metric not in tallies:
            continue
        correct, total, unevaluated = tallies[metric]
        if total == 0:
            reports.append(MetricReport(metric, 0, 0, unevaluated, Decimal("0.00")))
        else:
            reports.append(MetricReport(metric, correct, total, unevaluated, metric_accuracy(correct, total)))
    return reports


@dataclass(frozen=True)
class CotLengthStats:
    count: int
    malformed: int
    mean: float | None
    median: float | None

    def to_json(self) -> dict:
        return {"count": self.count, "malformed": self.malformed, "mean": self.mean, "median": self.median}


def cot_length_stats(raw_responses: Iterable[str]) -> CotLengthStats:
    """Token-length statistics of the reasoning segments. Responses without a
    well-formed reasoning block are excluded and counted."""
    lengths: list[int] = []
    malformed = 0
    for raw in raw_responses:
        parsed = parse_response(raw)
        if not parsed.well_formed:
            malformed += 1
            continue
        lengths.append(token_count(parsed.think))
    if not lengths:
        return CotLengthStats(0, malformed, None, None)
    return CotLengthStats(len(lengths), malformed, statistics.fmean(lengths), statistics.median(lengths))


def render_report_json(reports: Iterable[MetricReport]) -> dict:
    return {"metrics": [report.to_json() for report in reports]}


def render_report_table(reports: Iterable[MetricReport]) -> str:
    """Aligned plain-text table, one metric per row."""
    rows = [("metric", "correct", "total", "unevaluated", "accuracy")]
    for report in reports:
        rows.append(
            (
                report.metric.value,
                str(report.correct),
                str(report.total),
                str(report.unevaluated),
                f"{report.accuracy_percent}%" if report.total else "n/a",
            )
        )
    widths = [max(len(row[col]) for row in rows) for col in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines)
