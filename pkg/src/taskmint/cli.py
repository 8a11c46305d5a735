"""Operator commands: synth, teach, rollout, judge, stats, validate, serve.

Every command reads the shared key=value config file (flags override it),
parallelizes over records up to a jobs cap, and writes output files
atomically, so rerunning with identical inputs rewrites identical outputs
under stub backends. Exit codes: 0 success, 1 partial (some records failed),
2 usage or config error.
"""

from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from .config import EngineConfig, load_config
from .errors import ConfigError, ParseError, TaskmintError, UnparseableRubric
from .gateway import LLMGateway, build_gateway
from .mockenv import MapStore, MockEnvironment
from .reward import JudgeAudit, RewardJudge, repeat_scores
from .rollout import run_episode
from .rubric import collect_teacher_trajectories, coverage_filter, extract_rubric
from .serde import (
    coverage_report_to_obj,
    dump_line,
    load_records,
    persona_from_obj,
    rejection_to_obj,
    reward_report_to_obj,
    rubric_from_obj,
    rubric_to_obj,
    task_from_obj,
    task_to_obj,
    trajectory_from_obj,
    trajectory_to_obj,
    write_records,
)
from .stats import format_stats, stats_from_dir
from .synthesis import Synthesizer, load_personas
from .types import RejectionRecord, SynthTask

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_USAGE)


def _load_engine(config_path: str | None) -> tuple[EngineConfig, LLMGateway]:
    try:
        cfg = load_config(config_path)
        return cfg, build_gateway(cfg)
    except ConfigError as e:
        _fail(str(e))
        raise AssertionError("unreachable")


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        _fail(f"file not found: {p}")
    return p


@click.group()
@click.option("--config", "config_path", type=str, default=None, help="Path to the key=value config file.")
@click.option("--verbose", is_flag=True, help="Log at DEBUG level.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, verbose: bool) -> None:
    """Synthesize tool-use tasks, run them in mock environments, score them."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@main.command()
@click.option("--personas", "personas_path", required=True, type=str, help="Line-delimited persona records.")
@click.option("--out", "out_dir", required=True, type=str, help="Output directory.")
@click.option("--limit", type=int, default=0, help="Synthesize at most N personas (0 = all).")
@click.option("--jobs", type=int, default=0, help="Parallel workers (0 = config value).")
@click.pass_context
def synth(ctx: click.Context, personas_path: str, out_dir: str, limit: int, jobs: int) -> None:
    """Synthesize tasks from personas; writes tasks, rejections, and a token summary."""
    cfg, gateway = _load_engine(ctx.obj["config_path"])
    path = _require_file(personas_path)
    parse_errors: list[ParseError] = []
    with open(path, "r", encoding="utf-8") as fh:
        personas = list(load_personas(fh, lenient=True, errors=parse_errors))
    for err in parse_errors:
        click.echo(f"warning: {path}: {err}", err=True)
    if limit > 0:
        personas = personas[:limit]

    synthesizer = Synthesizer(cfg, gateway)
    workers = jobs if jobs > 0 else cfg.jobs
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        outcomes = list(pool.map(synthesizer.synth_pipeline, personas))

    tasks = [o.result for o in outcomes if isinstance(o.result, SynthTask)]
    rejections = [o.result for o in outcomes if isinstance(o.result, RejectionRecord)]
    total_tokens = sum(o.tokens_spent for o in outcomes)

    out = Path(out_dir)
    write_records(out / "tasks.jsonl", tasks, task_to_obj)
    write_records(out / "rejections.jsonl", rejections, rejection_to_obj)
    summary = {
        "personas": len(personas),
        "accepted": len(tasks),
        "rejected": len(rejections),
        "malformed_persona_lines": len(parse_errors),
        "total_tokens": total_tokens,
        "avg_tokens_per_task": round(total_tokens / len(outcomes), 4) if outcomes else 0.0,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    click.echo(f"accepted {len(tasks)}/{len(personas)} tasks, {total_tokens} tokens -> {out}")
    sys.exit(EXIT_OK if tasks else EXIT_PARTIAL)


@main.command()
@click.option("--tasks", "tasks_path", required=True, type=str, help="Tasks file from synth.")
@click.option("--k", type=int, default=0, help="Teacher demonstrations per task (0 = config value).")
@click.option("--threshold", type=float, default=0.0, help="Coverage keep threshold (0 = config value).")
@click.option("--out", "out_dir", required=True, type=str)
@click.option("--jobs", type=int, default=0)
@click.pass_context
def teach(ctx: click.Context, tasks_path: str, k: int, threshold: float, out_dir: str, jobs: int) -> None:
    """Collect teacher rollouts, build rubrics, and drop low-coverage tasks."""
    cfg, gateway = _load_engine(ctx.obj["config_path"])
    if k > 0:
        cfg.teacher_demos = k
    if threshold > 0:
        cfg.coverage_threshold = threshold
    tasks = _load_or_usage(tasks_path, task_from_obj)

    env = MockEnvironment(cfg, gateway, MapStore())

    def teach_one(task: SynthTask) -> dict:
        trajectories = collect_teacher_trajectories(env, gateway, task)
        keep, report = coverage_filter(cfg, gateway, task.workflow, trajectories, task.task_id)
        entry: dict = {"task": task, "trajectories": trajectories, "coverage": report, "rubric": None, "drop_reason": None}
        if not keep:
            entry["drop_reason"] = f"best coverage {report.best_coverage_fraction} below threshold {cfg.coverage_threshold}"
            return entry
        try:
            entry["rubric"] = extract_rubric(cfg, gateway, task.workflow, trajectories, task.forbidden, task.task_id)
        except UnparseableRubric as e:
            entry["drop_reason"] = str(e)
        return entry

    workers = jobs if jobs > 0 else cfg.jobs
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(teach_one, tasks))

    out = Path(out_dir)
    write_records(
        out / "trajectories.jsonl",
        [t for r in results for t in r["trajectories"]],
        trajectory_to_obj,
    )
    write_records(out / "rubrics.jsonl", [r["rubric"] for r in results if r["rubric"] is not None], rubric_to_obj)
    write_records(out / "coverage.jsonl", [r["coverage"] for r in results], coverage_report_to_obj)
    write_records(
        out / "dropped.jsonl",
        [{"task_id": r["task"].task_id, "reason": r["drop_reason"]} for r in results if r["drop_reason"]],
        lambda x: x,
    )
    write_records(out / "maps.jsonl", list(env.map_store.all_maps().values()), lambda m: m.to_obj())
    kept = sum(1 for r in results if r["rubric"] is not None)
    click.echo(f"kept {kept}/{len(tasks)} tasks -> {out}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--tasks", "tasks_path", required=True, type=str)
@click.option("--out", "out_dir", required=True, type=str)
@click.option("--n", type=int, default=1, help="Episodes per task.")
@click.option("--group", type=str, default="rollout", help="Rollout group prefix; episodes of one task share a map.")
@click.option("--jobs", type=int, default=0)
@click.pass_context
def rollout(ctx: click.Context, tasks_path: str, out_dir: str, n: int, group: str, jobs: int) -> None:
    """Run policy episodes against the mock environment."""
    cfg, gateway = _load_engine(ctx.obj["config_path"])
    tasks = _load_or_usage(tasks_path, task_from_obj)
    env = MockEnvironment(cfg, gateway, MapStore())

    def roll_one(task: SynthTask) -> list:
        scope = f"{group}-{task.task_id}"
        return [run_episode(env, gateway, task, cfg.policy_model, scope=scope) for _ in range(n)]

    workers = jobs if jobs > 0 else cfg.jobs
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        batches = list(pool.map(roll_one, tasks))

    out = Path(out_dir)
    write_records(out / "trajectories.jsonl", [t for batch in batches for t in batch], trajectory_to_obj)
    write_records(out / "maps.jsonl", list(env.map_store.all_maps().values()), lambda m: m.to_obj())
    click.echo(f"rolled out {sum(len(b) for b in batches)} episodes -> {out}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--trajectories", "trajectories_path", required=True, type=str)
@click.option("--rubrics", "rubrics_path", required=True, type=str)
@click.option("--repeats", type=int, default=1, help="Score each trajectory R times and report variance.")
@click.option("--out", "out_dir", required=True, type=str)
@click.pass_context
def judge(ctx: click.Context, trajectories_path: str, rubrics_path: str, repeats: int, out_dir: str) -> None:
    """Score trajectories against their rubrics; writes reward reports."""
    cfg, gateway = _load_engine(ctx.obj["config_path"])
    trajectories = _load_or_usage(trajectories_path, trajectory_from_obj)
    rubrics = {r.task_id: r for r in _load_or_usage(rubrics_path, rubric_from_obj)}
    judge_impl = RewardJudge(cfg, gateway)

    rewards: list[dict] = []
    variances: list[dict] = []
    transcripts: list[dict] = []
    failures = 0
    for index, trajectory in enumerate(trajectories):
        rubric = rubrics.get(trajectory.task_id)
        if rubric is None:
            click.echo(f"warning: no rubric for task {trajectory.task_id} (record {index}); skipping", err=True)
            failures += 1
            continue
        if repeats <= 1:
            audit = JudgeAudit()
            report = judge_impl.compute_reward(trajectory, rubric, audit)
            reports, audits, variance = [report], [audit], 0.0
        else:
            reports, audits, variance = repeat_scores(judge_impl, trajectory, rubric, repeats)
        for repeat, (report, audit) in enumerate(zip(reports, audits)):
            rewards.append({"task_id": trajectory.task_id, "index": index, "repeat": repeat, **reward_report_to_obj(report)})
            transcripts.append({"task_id": trajectory.task_id, "index": index, "repeat": repeat, "calls": audit.to_objs()})
        if repeats > 1:
            mean = sum(float(r.reward) for r in reports) / len(reports)
            variances.append({"task_id": trajectory.task_id, "index": index, "mean": mean, "variance": variance})

    out = Path(out_dir)
    write_records(out / "rewards.jsonl", rewards, lambda x: x)
    write_records(out / "judge_transcripts.jsonl", transcripts, lambda x: x)
    if repeats > 1:
        write_records(out / "variance.jsonl", variances, lambda x: x)
    click.echo(f"scored {len(trajectories) - failures}/{len(trajectories)} trajectories -> {out}")
    sys.exit(EXIT_PARTIAL if failures else EXIT_OK)


@main.command()
@click.option("--dir", "corpus_dir", required=True, type=str, help="Corpus directory with jsonl outputs.")
def stats(corpus_dir: str) -> None:
    """Print the corpus statistics report."""
    p = Path(corpus_dir)
    if not p.is_dir():
        _fail(f"not a directory: {p}")
    click.echo(format_stats(stats_from_dir(p)))
    sys.exit(EXIT_OK)


@main.command()
@click.argument("path", type=str)
@click.option("--kind", type=click.Choice(["tasks", "personas", "trajectories", "rubrics"]), default="tasks")
def validate(path: str, kind: str) -> None:
    """Validate a record file; reports the first error of each bad line."""
    p = _require_file(path)
    from_obj = {
        "tasks": task_from_obj,
        "personas": persona_from_obj,
        "trajectories": trajectory_from_obj,
        "rubrics": rubric_from_obj,
    }[kind]
    bad = 0
    total = 0
    with open(p, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            total += 1
            try:
                from_obj(json.loads(line))
            except (json.JSONDecodeError, TaskmintError) as e:
                bad += 1
                click.echo(f"{p}:{lineno}: {e}", err=True)
    click.echo(f"{total - bad}/{total} records valid")
    sys.exit(EXIT_PARTIAL if bad else EXIT_OK)


@main.command()
@click.option("--snapshot-dir", type=str, default="", help="Write sessions and maps here on shutdown.")
@click.pass_context
def serve(ctx: click.Context, snapshot_dir: str) -> None:
    """Start the rollout service."""
    from .service import ServiceState, create_app

    cfg, gateway = _load_engine(ctx.obj["config_path"])
    state = ServiceState(cfg, gateway)
    app = create_app(state)
    import uvicorn

    try:
        uvicorn.run(app, host=cfg.bind_host, port=cfg.bind_port, log_level="warning")
    finally:
        if snapshot_dir:
            state.snapshot(snapshot_dir)


def _load_or_usage(path: str, from_obj):
    p = _require_file(path)
    try:
        return load_records(p, from_obj)
    except ParseError as e:
        _fail(f"{p}: {e}")
        raise AssertionError("unreachable")


if __name__ == "__main__":
    main()
