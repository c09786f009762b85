"""Shared library for the web-agent CLI: observation and action alignment, planning, replay."""

from .actions import ActionSpace, parse_action, render_action, render_action_specs
from .ax_tree import AXNode, AXTree, parse_ax_tree, relatives, serialize
from .config import AgentConfig, load_config, validate_config
from .environment import ReplayEnvironment, load_replay_environment
from .memory import filter_observation, parse_highlights, render_history
from .obs_align import condense
from .output import format_json, format_output, format_table
from .planning import branch, new_tree, prune, render
from .prompts import assemble_prompt, parse_response
from .runtime import judge_select, run_episode, step
from .trajectory import diff_trajectories, load_trajectory, write_trajectory

__all__ = [
    "AXNode",
    "AXTree",
    "parse_ax_tree",
    "serialize",
    "relatives",
    "condense",
    "ActionSpace",
    "parse_action",
    "render_action",
    "render_action_specs",
    "new_tree",
    "branch",
    "prune",
    "render",
    "parse_highlights",
    "filter_observation",
    "render_history",
    "assemble_prompt",
    "parse_response",
    "step",
    "run_episode",
    "judge_select",
    "AgentConfig",
    "load_config",
    "validate_config",
    "ReplayEnvironment",
    "load_replay_environment",
    "write_trajectory",
    "load_trajectory",
    "diff_trajectories",
    "format_output",
    "format_json",
    "format_table",
]
