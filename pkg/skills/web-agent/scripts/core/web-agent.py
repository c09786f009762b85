#!/usr/bin/env -S uv run --script
# /// script
# requires-python = ">=3.10"
# dependencies = [
#     "click>=8.1.0,<9",
#     "requests>=2.31.0,<3",
#     "urllib3>=2.0.0,<3",
# ]
# ///
"""Web agent toolkit - condense pages, run episodes, print specs, inspect and diff trajectories."""

import json
import sys
from pathlib import Path

# ═══════════════════════════════════════════════════════════════════════════════
# Shared library import
# ═══════════════════════════════════════════════════════════════════════════════
_script_dir = Path(__file__).parent
_lib_path = _script_dir.parent / "lib"
if _lib_path.exists():
    sys.path.insert(0, str(_lib_path.parent))

import click
from lib.ax_tree import AXTreeError, EmptyObservation
from lib.client import LLMError, ScriptedClient, get_llm_client
from lib.config import PRESETS, ConfigError, load_config
from lib.environment import SnapshotError, load_replay_environment
from lib.input import InputTooLarge, read_dump
from lib.obs_align import condense as condense_page
from lib.output import error, format_json, format_output, format_table, success
from lib.planning import InvalidObjective
from lib.prompts import instruction_block
from lib.runtime import Task, parse_page, run_batch, run_episode
from lib.trajectory import (
    TrajectoryFormatError,
    action_statistics,
    diff_trajectories,
    load_trajectory,
    step_rows,
    summarize,
    write_trajectory,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_REMOTE = 3


class AgentGroup(click.Group):
    """Click group that reports usage errors with exit status 1."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            return super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.UsageError as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except click.ClickException as e:
            e.show()
            sys.exit(e.exit_code)


def _fail(ctx, exc: Exception, code: int, suggestion: str | None = None):
    if ctx.obj.get("debug"):
        raise exc
    error(str(exc), suggestion)
    sys.exit(code)


def _config(ctx):
    try:
        return load_config(ctx.obj["config_file"], ctx.obj["preset"], ctx.obj["overrides"])
    except (ConfigError, FileNotFoundError) as e:
        _fail(ctx, e, EXIT_USAGE)


# ═══════════════════════════════════════════════════════════════════════════════
# CLI Definition
# ═══════════════════════════════════════════════════════════════════════════════

_BOOL_FLAGS = ("reduce_actions", "disable_scroll", "condense_obs", "history_replay", "planning", "judge", "multisite")


def config_options(func):
    """Attach one override option per configuration key."""
    options = [
        click.option(f"--{name.replace('_', '-')}/--no-{name.replace('_', '-')}", name, default=None)
        for name in _BOOL_FLAGS
    ]
    options += [
        click.option("--max-steps", type=int, help="Step budget per episode"),
        click.option("--history-window", type=int, help="Replayed steps when planning is off"),
        click.option("--llm-model", help="Model name sent to the endpoint"),
        click.option("--llm-endpoint", help="Chat-completion endpoint URL"),
        click.option("--llm-temperature", type=float, help="Sampling temperature"),
        click.option("--llm-max-retries", type=int, help="Retries for failed completions"),
        click.option("--llm-timeout", type=float, help="Request timeout in seconds"),
        click.option("--llm-backoff-factor", type=float, help="Exponential backoff factor"),
        click.option("--llm-max-in-flight", type=int, help="Concurrent request cap"),
        click.option("--template-path", type=click.Path(), help="Actor template override"),
        click.option("--output-spec-path", type=click.Path(), help="Output specification override"),
        click.option("--judge-template-path", type=click.Path(), help="Judge template override"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group(cls=AgentGroup)
@click.option("--json", "output_json", is_flag=True, help="Output as JSON")
@click.option("--config", "config_file", type=click.Path(), help="Config file (key=value lines)")
@click.option("--preset", type=click.Choice(list(PRESETS)), help="Alignment preset (default: full)")
@click.option("--debug", is_flag=True, help="Show tracebacks on errors")
@config_options
@click.pass_context
def cli(ctx, output_json: bool, config_file: str | None, preset: str | None, debug: bool, **overrides):
    """Web agent toolkit.

    Condense accessibility-tree pages, run agent episodes against replay
    environments, print the configured prompt specifications, and inspect
    or diff trajectory logs.

    Configuration priority: flags > --config file > AGENT_* environment
    variables > --preset > defaults.
    """
    ctx.ensure_object(dict)
    ctx.obj["json"] = output_json
    ctx.obj["debug"] = debug
    ctx.obj["config_file"] = config_file
    ctx.obj["preset"] = preset
    ctx.obj["overrides"] = overrides


@cli.command()
@click.argument("source", default="-")
@click.pass_context
def condense(ctx, source: str):
    """Condense a page dump and print it with a stats line.

    SOURCE: Dump file path, or '-' for stdin (default)

    Examples:

      web-agent condense page.txt

      cat page.txt | web-agent --no-condense-obs condense
    """
    config = _config(ctx)
    try:
        tree = parse_page(read_dump(source))
        if tree is None:
            raise EmptyObservation()
    except (AXTreeError, InputTooLarge, UnicodeDecodeError) as e:
        _fail(ctx, e, EXIT_DATA)
    except OSError as e:
        _fail(ctx, e, EXIT_USAGE)

    result = condense_page(tree, config)
    stats = {
        "source_nodes": result.source_node_count,
        "emitted_nodes": result.emitted_node_count,
        "interactable_ids": len(result.interactable_ids),
        "token_estimate": result.token_estimate,
    }
    if ctx.obj["json"]:
        print(format_json({"text": result.text, "stats": stats}))
    else:
        print(result.text)
        print("stats: " + json.dumps(stats, sort_keys=True))


@cli.command()
@click.pass_context
def specs(ctx):
    """Print the instruction block (output and action specifications) the prompt embeds.

    Examples:

      web-agent specs

      web-agent --preset vanilla specs
    """
    config = _config(ctx)
    try:
        text = instruction_block(config)
    except OSError as e:
        _fail(ctx, e, EXIT_USAGE)
    if ctx.obj["json"]:
        print(format_json({"specs": text}))
    else:
        print(text)


def _load_tasks(path: str) -> list[Task]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid JSON in {path}: {e}") from e
    if not isinstance(data, list) or not data:
        raise ValueError(f"{path} must hold a non-empty JSON list of tasks")
    tasks = []
    for item in data:
        if not isinstance(item, dict) or not isinstance(item.get("objective"), str):
            raise ValueError(f"{path}: every task needs an 'objective' string")
        tasks.append(Task(task_id=str(item.get("task_id", f"task-{len(tasks)}")), objective=item["objective"]))
    for task in tasks:
        if not task.task_id or task.task_id in (".", "..") or any(char in task.task_id for char in "/\\\0"):
            raise ValueError(f"{path}: task id {task.task_id!r} cannot be used as a log file name")
    if len({task.task_id for task in tasks}) != len(tasks):
        raise ValueError(f"{path}: task ids must be unique")
    return tasks


def _exit_code(trajectories) -> int:
    failures = {trajectory.failure for trajectory in trajectories}
    if "llm" in failures:
        return EXIT_REMOTE
    if "environment" in failures:
        return EXIT_DATA
    return EXIT_OK


@cli.command()
@click.option("--snapshots", "-s", required=True, type=click.Path(), help="Replay snapshot graph (JSON)")
@click.option("--objective", help="Task objective for a single episode")
@click.option("--task-id", default="task", show_default=True, help="Task id recorded in the log")
@click.option("--tasks", "tasks_file", type=click.Path(), help="JSON list of {task_id, objective} for a batch")
@click.option("--script", "script_path", type=click.Path(), help="Scripted completions (JSON); omit for live LLM")
@click.option("--output", "-o", default="trajectory.jsonl", show_default=True, help="Trajectory log path")
@click.option("--output-dir", type=click.Path(), help="Directory for batch logs (one per task)")
@click.option("--parallel", type=click.IntRange(min=1), default=1, show_default=True, help="Concurrent episodes")
@click.pass_context
def run(
    ctx,
    snapshots: str,
    objective: str | None,
    task_id: str,
    tasks_file: str | None,
    script_path: str | None,
    output: str,
    output_dir: str | None,
    parallel: int,
):
    """Run agent episodes against a replay environment.

    Without --script the live endpoint is used; it needs AGENT_LLM_API_KEY.

    Examples:

      web-agent run -s fixtures/demo/snapshots.json --script fixtures/demo/completions.json \\
          --objective "Open my latest updated issue ..." -o demo.jsonl

      web-agent run -s snapshots.json --tasks tasks.json --output-dir logs/ --parallel 4
    """
    if bool(objective) == bool(tasks_file):
        raise click.UsageError("Give exactly one of --objective or --tasks")
    config = _config(ctx)

    try:
        load_replay_environment(snapshots)
        tasks = _load_tasks(tasks_file) if tasks_file else [Task(task_id, objective)]
        if script_path:
            ScriptedClient.from_file(script_path)
            shared = None
        else:
            shared = get_llm_client(config)
    except SnapshotError as e:
        _fail(ctx, e, EXIT_DATA)
    except LLMError as e:
        _fail(ctx, e, EXIT_REMOTE, "Set AGENT_LLM_API_KEY, or pass --script for an offline run")
    except (ValueError, OSError) as e:
        _fail(ctx, e, EXIT_DATA)

    def make_llm():
        return ScriptedClient.from_file(script_path) if script_path else shared

    try:
        if tasks_file:
            trajectories = run_batch(
                config, tasks, lambda: load_replay_environment(snapshots), make_llm, parallel=parallel
            )
        else:
            trajectories = [run_episode(config, load_replay_environment(snapshots), make_llm(), objective, task_id)]
    except InvalidObjective as e:
        _fail(ctx, e, EXIT_USAGE)

    if tasks_file:
        out_dir = Path(output_dir or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [out_dir / f"{trajectory.task_id}.jsonl" for trajectory in trajectories]
    else:
        paths = [Path(output)]
    for trajectory, path in zip(trajectories, paths):
        write_trajectory(trajectory, path)

    results = [
        {
            "task_id": trajectory.task_id,
            "termination": trajectory.termination,
            "answer": trajectory.answer,
            "steps": len(trajectory.steps),
            "log": str(path),
        }
        for trajectory, path in zip(trajectories, paths)
    ]
    if ctx.obj["json"]:
        print(format_json(results if tasks_file else results[0]))
    elif tasks_file:
        print(format_table(results, ["task_id", "termination", "steps", "answer"]))
    else:
        print(f"answer: {results[0]['answer'] if results[0]['answer'] is not None else '-'}")
        print(f"termination: {results[0]['termination']}")
    success(f"Wrote {len(paths)} trajectory log(s)")

    code = _exit_code(trajectories)
    if code != EXIT_OK:
        error("An episode ended with an unrecoverable error")
    sys.exit(code)


@cli.command()
@click.argument("log", type=click.Path())
@click.pass_context
def inspect(ctx, log: str):
    """Show a trajectory log step by step with totals and action counts.

    Examples:

      web-agent inspect demo.jsonl

      web-agent --json inspect demo.jsonl
    """
    try:
        loaded = load_trajectory(log)
        rows = step_rows(loaded)
        summary = summarize(loaded)
        actions = action_statistics(loaded)
    except (TrajectoryFormatError, KeyError, TypeError) as e:
        _fail(ctx, TrajectoryFormatError(f"{log}: {e}") if not isinstance(e, TrajectoryFormatError) else e, EXIT_DATA)

    if ctx.obj["json"]:
        print(format_json({"steps": rows, "summary": summary, "actions": actions}))
        return
    print(format_table(rows, ["step", "plan", "action", "obs_tokens", "prompt_tokens", "state"]))
    print()
    format_output(summary)
    print()
    format_output([{"action": verb, "count": count} for verb, count in actions.items()])


@cli.command()
@click.argument("log_a", type=click.Path())
@click.argument("log_b", type=click.Path())
@click.pass_context
def diff(ctx, log_a: str, log_b: str):
    """Compare two trajectory logs and report the first divergent step.

    Examples:

      web-agent diff run1.jsonl run2.jsonl
    """
    try:
        result = diff_trajectories(load_trajectory(log_a), load_trajectory(log_b))
    except TrajectoryFormatError as e:
        _fail(ctx, e, EXIT_DATA)

    if ctx.obj["json"]:
        print(format_json(result._asdict()))
    elif result.identical:
        print("identical")
    elif result.first_divergent_step is not None:
        print(f"first divergent step: {result.first_divergent_step}")
        print(result.detail)
    else:
        print(result.detail)


if __name__ == "__main__":
    cli()
