"""Command-line entry points.

Thin client over the library and the HTTP service. Expected data rejections
(filtered samples, degenerate groups) exit 0 with a summary; operational
faults (missing fixtures, schema violations) exit nonzero with the cause.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .advantages import DEFAULT_EPSILON, DEFAULT_GROUP_SIZE, IncompleteGroupError, RolloutGroup, group_advantages
from .judge import (
    AuditLog,
    FixtureMissError,
    JudgeBackendConfig,
    JudgeClient,
    JudgeError,
    backend_config_from_file,
    client_from_config,
)
from .records import (
    SchemaError,
    SpecStore,
    cold_start_to_json,
    cold_start_input_from_json,
    curated_to_json,
    dumps_canonical,
    eval_record_from_json,
    read_jsonl,
    sample_from_json,
    spec_from_json,
    write_jsonl,
)
from .rewards import accuracy_reward, default_scoring_config, format_reward, load_scoring_config


def _fail(message: str, code: int = 1) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _make_judge(backend: str | None, strict_mock: bool, audit_log: str | None, seed: int) -> JudgeClient:
    import random

    audit = AuditLog(audit_log) if audit_log else None
    if backend is None:
        config = JudgeBackendConfig(kind="mock", strict=strict_mock)
    else:
        config = backend_config_from_file(backend)
        if strict_mock and config.kind == "mock":
            config = JudgeBackendConfig(
                kind="mock",
                fixtures_path=config.fixtures_path,
                strict=True,
                max_retries=config.max_retries,
                max_in_flight=config.max_in_flight,
            )
    return client_from_config(config, audit=audit, rng=random.Random(seed))


def _scoring(config: str | None):
    return load_scoring_config(config) if config else default_scoring_config()


@click.group()
@click.version_option(__version__, prog_name="rolereward")
def main() -> None:
    """Reward scoring and dataset curation for role-playing agents."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--specs", "specs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def score(input_path: str, specs_path: str, output_path: str | None, config_path: str | None) -> None:
    """Score JSONL rollouts ({"spec_id", "response"}) against a spec file."""
    try:
        store = SpecStore(specs_path)
        scoring = _scoring(config_path)
        results = []
        for number, obj in read_jsonl(input_path):
            spec_id = obj.get("spec_id")
            if not isinstance(spec_id, str):
                raise SchemaError("missing field 'spec_id'", number)
            response = obj.get("response")
            if not isinstance(response, str):
                raise SchemaError("missing field 'response'", number)
            spec = store.get(spec_id)
            if spec is None:
                raise SchemaError(f"unknown spec id {spec_id!r}", number)
            accuracy = accuracy_reward(spec, response)
            fmt = format_reward(response, scoring.format)
            w_acc, w_fmt = scoring.weights
            results.append(
                {
                    "spec_id": spec_id,
                    "accuracy": accuracy,
                    "format": fmt,
                    "total": w_acc * accuracy + w_fmt * fmt,
                }
            )
    except (SchemaError, OSError, ValueError) as exc:
        _fail(str(exc))
    if output_path:
        write_jsonl(output_path, results)
    else:
        for result in results:
            click.echo(dumps_canonical(result))
    click.echo(f"scored {len(results)} responses", err=True)


def _run_curation(pipeline_name: str, input_path, output_path, backend, seed, strict_mock, audit_log, balance, baseline_backend):
    from . import curation

    judge = _make_judge(backend, strict_mock, audit_log, seed)
    pipeline = curation.stv_curate if pipeline_name == "stv" else curation.mtdp_curate
    accepted = []
    rejected = 0
    rejected_by_stage: dict[str, int] = {}
    try:
        for number, obj in read_jsonl(input_path):
            sample = sample_from_json(obj, number)
            result = pipeline(sample, judge)
            if isinstance(result, curation.CurationDecision):
                rejected += 1
                rejected_by_stage[result.stage] = rejected_by_stage.get(result.stage, 0) + 1
                continue
            accepted.append(result)
        if baseline_backend:
            baseline = _make_judge(baseline_backend, strict_mock, audit_log, seed)
            kept = []
            for record in accepted:
                if curation.hard_sample_filter(record.sample, baseline, record.spec):
                    kept.append(record)
                else:
                    rejected += 1
                    rejected_by_stage["hard_sample"] = rejected_by_stage.get("hard_sample", 0) + 1
            accepted = kept
        if balance:
            with open(balance, encoding="utf-8") as handle:
                targets = json.load(handle)
            accepted = curation.balance_distribution(accepted, targets, seed=seed)
    except FixtureMissError as exc:
        _fail(f"no fixture for prompt (sha256 {exc.key}); add it to the fixtures file or run without --strict-mock")
    except curation.CurationPipelineError as exc:
        hint = "; add it to the fixtures file or run without --strict-mock" if isinstance(exc.cause, FixtureMissError) else ""
        _fail(f"{exc}{hint}")
    except (JudgeError, curation.InfeasibleTargetsError, SchemaError, OSError) as exc:
        _fail(str(exc))
    write_jsonl(output_path, (curated_to_json(record) for record in accepted))
    click.echo(f"accepted {len(accepted)}, rejected {rejected}", err=True)
    for stage in sorted(rejected_by_stage):
        click.echo(f"  rejected at {stage}: {rejected_by_stage[stage]}", err=True)


_CURATE_OPTIONS = [
    click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False)),
    click.option("--backend", "backend", type=click.Path(exists=True, dir_okay=False)),
    click.option("--seed", default=0, show_default=True, type=int),
    click.option("--strict-mock", is_flag=True, default=False),
    click.option("--audit-log", "audit_log", type=click.Path(dir_okay=False)),
    click.option("--balance", type=click.Path(exists=True, dir_okay=False), help="JSON file of bucket proportions."),
    click.option("--baseline-backend", type=click.Path(exists=True, dir_okay=False), help="Keep only samples this backend answers incorrectly."),
]


def _with_curate_options(command):
    for option in reversed(_CURATE_OPTIONS):
        command = option(command)
    return command


@main.command("curate-stv")
@_with_curate_options
def curate_stv(input_path, output_path, backend, seed, strict_mock, audit_log, balance, baseline_backend) -> None:
    """Run the single-keyword curation pipeline."""
    _run_curation("stv", input_path, output_path, backend, seed, strict_mock, audit_log, balance, baseline_backend)


@main.command("curate-mtdp")
@_with_curate_options
def curate_mtdp(input_path, output_path, backend, seed, strict_mock, audit_log, balance, baseline_backend) -> None:
    """Run the multi-keyword expression curation pipeline."""
    _run_curation("mtdp", input_path, output_path, backend, seed, strict_mock, audit_log, balance, baseline_backend)


@main.command("refine-cot")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
@click.option("--backend", "backend", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--strict-mock", is_flag=True, default=False)
@click.option("--audit-log", "audit_log", type=click.Path(dir_okay=False))
def refine_cot(input_path, output_path, backend, seed, strict_mock, audit_log) -> None:
    """Refine reasoning traces into cold-start training records."""
    from .cot import ColdStartRejection, build_cold_start_record

    judge = _make_judge(backend, strict_mock, audit_log, seed)
    records = []
    rejected: dict[str, int] = {}
    try:
        for number, obj in read_jsonl(input_path):
            item = cold_start_input_from_json(obj, number)
            result = build_cold_start_record(item, judge, backend_name=backend or "mock")
            if isinstance(result, ColdStartRejection):
                rejected[result.stage] = rejected.get(result.stage, 0) + 1
                continue
            records.append(result)
    except FixtureMissError as exc:
        _fail(f"no fixture for prompt (sha256 {exc.key}); add it to the fixtures file or run without --strict-mock")
    except (JudgeError, SchemaError, OSError) as exc:
        _fail(str(exc))
    write_jsonl(output_path, (cold_start_to_json(record) for record in records))
    click.echo(f"refined {len(records)}, rejected {sum(rejected.values())}", err=True)
    for stage in sorted(rejected):
        click.echo(f"  rejected at {stage}: {rejected[stage]}", err=True)


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", type=click.Path(dir_okay=False))
@click.option("--group-size", default=DEFAULT_GROUP_SIZE, show_default=True, type=int)
@click.option("--epsilon", default=DEFAULT_EPSILON, show_default=True, type=float)
def advantages(input_path, output_path, group_size, epsilon) -> None:
    """Compute group-normalized advantages from JSONL rewards
    ({"prompt_id", "reward"} rows or {"prompt_id", "rewards"} groups)."""
    if group_size < 2:
        _fail("--group-size must be at least 2")
    results = []
    try:
        pending: dict[str, list[float]] = {}
        order: list[str] = []
        for number, obj in read_jsonl(input_path):
            prompt_id = obj.get("prompt_id")
            if not isinstance(prompt_id, str):
                raise SchemaError("missing field 'prompt_id'", number)
            if "rewards" in obj:
                rewards = obj["rewards"]
                if not (isinstance(rewards, list) and all(isinstance(r, (int, float)) for r in rewards)):
                    raise SchemaError("field 'rewards' must be a list of numbers", number)
                if len(rewards) != group_size:
                    raise SchemaError(f"group {prompt_id!r} has {len(rewards)} rewards, expected {group_size}", number)
                if prompt_id not in pending:
                    order.append(prompt_id)
                pending[prompt_id] = [float(r) for r in rewards]
                continue
            reward = obj.get("reward")
            if not isinstance(reward, (int, float)):
                raise SchemaError("missing field 'reward'", number)
            if prompt_id not in pending:
                order.append(prompt_id)
                pending[prompt_id] = []
            pending[prompt_id].append(float(reward))
        for prompt_id in order:
            rewards = pending[prompt_id]
            if len(rewards) != group_size:
                raise IncompleteGroupError(prompt_id, len(rewards), group_size)
            vector = group_advantages(RolloutGroup(prompt_id=prompt_id, rewards=tuple(rewards)), epsilon=epsilon)
            results.append(
                {
                    "prompt_id": prompt_id,
                    "advantages": list(vector.advantages),
                    "degenerate": vector.degenerate,
                }
            )
    except (SchemaError, IncompleteGroupError, ValueError, OSError) as exc:
        _fail(str(exc))
    if output_path:
        write_jsonl(output_path, results)
    else:
        for result in results:
            click.echo(dumps_canonical(result))
    degenerate = sum(1 for r in results if r["degenerate"])
    click.echo(f"computed {len(results)} groups ({degenerate} degenerate)", err=True)


@main.command("eval")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", type=click.Path(dir_okay=False))
@click.option("--backend", "backend", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--strict-mock", is_flag=True, default=False)
@click.option("--audit-log", "audit_log", type=click.Path(dir_okay=False))
def eval_command(input_path, output_path, backend, seed, strict_mock, audit_log) -> None:
    """Judge responses across the six role-play metrics and report accuracy."""
    from .evaluation import evaluate_records, render_report_json, render_report_table

    judge = _make_judge(backend, strict_mock, audit_log, seed)
    try:
        records = [eval_record_from_json(obj, number) for number, obj in read_jsonl(input_path)]
        reports = evaluate_records(records, judge)
    except FixtureMissError as exc:
        _fail(f"no fixture for prompt (sha256 {exc.key}); add it to the fixtures file or run without --strict-mock")
    except (JudgeError, SchemaError, OSError) as exc:
        _fail(str(exc))
    if output_path:
        with open(output_path, "w", encoding="utf-8") as handle:
            handle.write(dumps_canonical(render_report_json(reports)))
            handle.write("\n")
    click.echo(render_report_table(reports))


@main.command()
@click.option("--specs", "specs_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(specs_path, config_path, host, port) -> None:
    """Start the HTTP scoring service."""
    from .service import run_service

    try:
        run_service(specs_path, config_path, host=host, port=port)
    except (SchemaError, OSError, ValueError) as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
