"""Corpus statistics in the standard five-field shape.

Fields: total tasks, average tools per task, average user interactions per
trajectory, average consistency-map size per task, and token usage (average
per task plus the raw total).
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .serde import load_records, task_from_obj, trajectory_from_obj
from .types import SynthTask, Trajectory

STAT_FIELDS = (
    "total_tasks",
    "avg_tools_per_task",
    "avg_interactions_per_trajectory",
    "avg_map_size",
    "avg_tokens_per_task",
    "total_tokens",
)


def compute_stats(
    tasks: Iterable[SynthTask] = (),
    trajectories: Iterable[Trajectory] = (),
    map_sizes: Iterable[int] = (),
    total_tokens: int = 0,
) -> dict:
    task_list = list(tasks)
    traj_list = list(trajectories)
    sizes = list(map_sizes)
    total = len(task_list)
    return {
        "total_tasks": total,
        "avg_tools_per_task": round(sum(len(t.toolset) for t in task_list) / total, 4) if total else 0.0,
        "avg_interactions_per_trajectory": (
            round(sum(t.user_interactions() for t in traj_list) / len(traj_list), 4) if traj_list else 0.0
        ),
        "avg_map_size": round(sum(sizes) / len(sizes), 4) if sizes else 0.0,
        "avg_tokens_per_task": round(total_tokens / total, 4) if total else 0.0,
        "total_tokens": total_tokens,
    }


def stats_from_dir(directory: str | Path) -> dict:
    """Stats over a corpus directory of line-delimited files.

    Reads whichever of tasks.jsonl / trajectories.jsonl / maps.jsonl /
    summary.json exist; anything missing contributes zeros.
    """
    import json

    directory = Path(directory)
    tasks: list[SynthTask] = []
    trajectories: list[Trajectory] = []
    map_sizes: list[int] = []
    total_tokens = 0

    tasks_path = directory / "tasks.jsonl"
    if tasks_path.exists():
        tasks = load_records(tasks_path, task_from_obj)
    traj_path = directory / "trajectories.jsonl"
    if traj_path.exists():
        trajectories = load_records(traj_path, trajectory_from_obj)
    maps_path = directory / "maps.jsonl"
    if maps_path.exists():
        with open(maps_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    map_sizes.append(len(json.loads(line).get("entries", [])))
    summary_path = directory / "summary.json"
    if summary_path.exists():
        total_tokens = int(json.loads(summary_path.read_text(encoding="utf-8")).get("total_tokens", 0))

    return compute_stats(tasks, trajectories, map_sizes, total_tokens)


def format_stats(stats: dict) -> str:
    rows = (
        ("Total #Tasks", stats["total_tasks"]),
        ("Avg. #Tools Per Task", stats["avg_tools_per_task"]),
        ("Avg. #Interactions Per Trajectory", stats["avg_interactions_per_trajectory"]),
        ("Avg. Mapping Size", stats["avg_map_size"]),
        ("Avg. Per-Task Token Usage", stats["avg_tokens_per_task"]),
        ("Total Token Usage", stats["total_tokens"]),
    )
    width = max(len(label) for label, _ in rows)
    return "\n".join(f"{label.ljust(width)}  {value}" for label, value in rows)
