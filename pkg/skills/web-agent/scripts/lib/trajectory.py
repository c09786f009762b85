"""Episode trajectories and their JSON-lines log format.

A log holds one ``{"record": "step", ...}`` line per step followed by a single
``{"record": "summary", ...}`` line. Keys are sorted and no wall-clock
timestamps are written, so identical runs produce identical bytes.
"""

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple

from .actions import render_action
from .memory import StepRecord

STOPPED = "stopped"
MAX_STEPS = "max_steps"
ENVIRONMENT_TERMINAL = "environment_terminal"
UNRECOVERABLE_ERROR = "unrecoverable_error"
TERMINATIONS = (STOPPED, MAX_STEPS, ENVIRONMENT_TERMINAL, UNRECOVERABLE_ERROR)

STEP_FIELDS = (
    "step_index",
    "plan_id",
    "action",
    "pivotal_ids",
    "obs_tokens",
    "prompt_tokens",
    "state_id",
    "reason",
    "corrective",
    "error",
)
SUMMARY_FIELDS = (
    "task_id",
    "objective",
    "config",
    "termination",
    "answer",
    "notes",
    "steps",
    "env_states",
    "llm_calls",
    "plan_tree",
)


class TrajectoryFormatError(ValueError):
    """A trajectory log is malformed."""


@dataclass
class Trajectory:
    task_id: str
    objective: str
    config: dict[str, Any]
    steps: list[StepRecord] = field(default_factory=list)
    termination: str | None = None
    answer: str | None = None
    notes: list[str] = field(default_factory=list)
    env_states: list[str | None] = field(default_factory=list)
    llm_calls: int = 0
    plan_tree: dict[str, Any] = field(default_factory=dict)
    # Which side failed for unrecoverable_error: "llm" or "environment".
    failure: str | None = None

    def to_records(self) -> list[dict[str, Any]]:
        records = [step_record(step) for step in self.steps]
        records.append(
            {
                "record": "summary",
                "task_id": self.task_id,
                "objective": self.objective,
                "config": self.config,
                "termination": self.termination,
                "answer": self.answer,
                "notes": list(self.notes),
                "steps": len(self.steps),
                "env_states": list(self.env_states),
                "llm_calls": self.llm_calls,
                "plan_tree": self.plan_tree,
            }
        )
        return records


def step_record(step: StepRecord) -> dict[str, Any]:
    return {
        "record": "step",
        "step_index": step.step_index,
        "plan_id": step.plan_id,
        "action": render_action(step.action) if step.action is not None else None,
        "pivotal_ids": list(step.pivotal_ids),
        "obs_tokens": step.obs_tokens,
        "prompt_tokens": step.prompt_tokens,
        "state_id": step.state_id,
        "reason": step.reason,
        "corrective": step.corrective,
        "error": step.error,
    }


def dumps_records(records: list[dict[str, Any]]) -> str:
    return "".join(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n" for record in records)


def write_trajectory(trajectory: Trajectory, path: str | Path) -> None:
    Path(path).write_text(dumps_records(trajectory.to_records()), encoding="utf-8")


# ═══════════════════════════════════════════════════════════════════════════════
# Loading
# ═══════════════════════════════════════════════════════════════════════════════


class TrajectoryLog(NamedTuple):
    steps: list[dict[str, Any]]
    summary: dict[str, Any]


def parse_records(text: str, source: str = "<log>") -> TrajectoryLog:
    """Validate and split JSON-lines records.

    Raises:
        TrajectoryFormatError: on bad JSON, unknown record kinds, missing
            fields, out-of-order steps, or a missing or misplaced summary.
    """
    steps: list[dict[str, Any]] = []
    summary: dict[str, Any] | None = None
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise TrajectoryFormatError(f"{source}:{line_number}: invalid JSON: {e.msg}") from e
        if not isinstance(record, dict):
            raise TrajectoryFormatError(f"{source}:{line_number}: record must be an object")
        if summary is not None:
            raise TrajectoryFormatError(f"{source}:{line_number}: record after the summary")
        kind = record.get("record")
        required = {"step": STEP_FIELDS, "summary": SUMMARY_FIELDS}.get(kind)
        if required is None:
            raise TrajectoryFormatError(f"{source}:{line_number}: unknown record kind {kind!r}")
        missing = [name for name in required if name not in record]
        if missing:
            raise TrajectoryFormatError(f"{source}:{line_number}: {kind} record lacks {', '.join(missing)}")
        if kind == "step":
            index = record["step_index"]
            if not isinstance(index, int) or (steps and index <= steps[-1]["step_index"]):
                raise TrajectoryFormatError(f"{source}:{line_number}: step_index {index!r} is not increasing")
            steps.append(record)
        else:
            summary = record
    if summary is None:
        raise TrajectoryFormatError(f"{source}: no summary record")
    return TrajectoryLog(steps=steps, summary=summary)


def load_trajectory(path: str | Path) -> TrajectoryLog:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise TrajectoryFormatError(f"cannot read {path}: {e}") from e
    return parse_records(text, str(path))


# ═══════════════════════════════════════════════════════════════════════════════
# Inspection
# ═══════════════════════════════════════════════════════════════════════════════


def action_verb(action_text: str | None) -> str:
    if not action_text:
        return "(none)"
    return action_text.split(" ", 1)[0]


def action_statistics(log: TrajectoryLog) -> dict[str, int]:
    """Number of steps per action verb; steps without an action count as ``(none)``."""
    return dict(sorted(Counter(action_verb(step["action"]) for step in log.steps).items()))


def summarize(log: TrajectoryLog) -> dict[str, Any]:
    count = len(log.steps)
    obs_total = sum(step["obs_tokens"] for step in log.steps)
    prompt_total = sum(step["prompt_tokens"] for step in log.steps)
    return {
        "task_id": log.summary["task_id"],
        "termination": log.summary["termination"],
        "answer": log.summary["answer"],
        "steps": count,
        "llm_calls": log.summary["llm_calls"],
        "avg_obs_tokens": obs_total / count if count else 0.0,
        "avg_prompt_tokens": prompt_total / count if count else 0.0,
    }


def step_rows(log: TrajectoryLog) -> list[dict[str, Any]]:
    return [
        {
            "step": step["step_index"],
            "plan": step["plan_id"],
            "action": step["action"] or "(no action)",
            "obs_tokens": step["obs_tokens"],
            "prompt_tokens": step["prompt_tokens"],
            "state": step["state_id"],
        }
        for step in log.steps
    ]


# ═══════════════════════════════════════════════════════════════════════════════
# Diffing
# ═══════════════════════════════════════════════════════════════════════════════


class TrajectoryDiff(NamedTuple):
    identical: bool
    first_divergent_step: int | None
    detail: str


def diff_trajectories(a: TrajectoryLog, b: TrajectoryLog) -> TrajectoryDiff:
    """Structural comparison: first differing step, else differing summary fields."""
    for left, right in zip(a.steps, b.steps):
        if left != right:
            fields = [name for name in STEP_FIELDS if left.get(name) != right.get(name)]
            return TrajectoryDiff(False, left["step_index"], f"step {left['step_index']} differs in {', '.join(fields)}")
    if len(a.steps) != len(b.steps):
        shorter = min(len(a.steps), len(b.steps))
        longer = a if len(a.steps) > len(b.steps) else b
        return TrajectoryDiff(
            False,
            longer.steps[shorter]["step_index"],
            f"step counts differ: {len(a.steps)} vs {len(b.steps)}",
        )
    fields = sorted(name for name in set(a.summary) | set(b.summary) if a.summary.get(name) != b.summary.get(name))
    if fields:
        return TrajectoryDiff(False, None, f"summary differs in {', '.join(fields)}")
    return TrajectoryDiff(True, None, "identical")
