"""Environments the agent acts in, and a deterministic replay environment.

A replay environment is a state graph loaded from a JSON snapshot file::

    {
      "start": "home",
      "states": [
        {"id": "home", "ax_dump_file": "home.txt", "url": "http://localhost/",
         "terminal": false, "reward": null,
         "transitions": [{"action": "click [7]", "to": "issues"}]},
        ...
      ]
    }

Each state carries its page either inline (``ax_dump``) or as a file next to
the snapshot (``ax_dump_file``). Transition keys are canonical action text;
an action with no matching transition leaves the page unchanged.
"""

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .actions import Action, ActionError, parse_action, render_action
from .ax_tree import AXTreeError, EmptyObservation, parse_ax_tree
from .output import warning


class SnapshotError(ValueError):
    """A snapshot file is unreadable or describes an inconsistent state graph."""


@dataclass(frozen=True)
class Observation:
    dump: str
    metadata: dict[str, Any] = field(default_factory=dict)


class Environment(ABC):
    """What the agent loop needs from a website.

    Transitions must be deterministic for identical action sequences.
    Rewards are undiscounted.
    """

    discount: float = 1.0

    @abstractmethod
    def reset(self) -> Observation:
        """Return to the start state and return its observation."""

    @abstractmethod
    def execute(self, action: Action) -> str:
        """Apply a navigation action and return the next observation dump."""

    @property
    @abstractmethod
    def is_terminal(self) -> bool: ...

    @property
    def reward(self) -> float | None:
        return None

    @property
    def state_id(self) -> str | None:
        return None


@dataclass(frozen=True)
class ReplayState:
    state_id: str
    ax_dump: str
    url: str = ""
    terminal: bool = False
    reward: float | None = None
    transitions: dict[str, str] = field(default_factory=dict)


class ReplayEnvironment(Environment):
    def __init__(self, states: dict[str, ReplayState], start: str):
        if start not in states:
            raise SnapshotError(f"SnapshotError: start state '{start}' is not declared")
        for state in states.values():
            for key, target in state.transitions.items():
                if target not in states:
                    raise SnapshotError(
                        f"SnapshotError: transition '{key}' in state '{state.state_id}' targets undeclared state '{target}'"
                    )
        self.states = states
        self.start = start
        self._current = start
        self.visited: list[str] = []

    @property
    def current(self) -> ReplayState:
        return self.states[self._current]

    def reset(self) -> Observation:
        self._current = self.start
        self.visited = [self.start]
        return Observation(self.current.ax_dump, {"state_id": self._current, "url": self.current.url})

    def execute(self, action: Action) -> str:
        key = render_action(action)
        target = self.current.transitions.get(key)
        if target is None:
            warning(f"No transition for '{key}' in state '{self._current}'; page unchanged")
        else:
            self._current = target
        self.visited.append(self._current)
        return self.current.ax_dump

    @property
    def is_terminal(self) -> bool:
        return self.current.terminal

    @property
    def reward(self) -> float | None:
        return self.current.reward

    @property
    def state_id(self) -> str | None:
        return self._current


# ═══════════════════════════════════════════════════════════════════════════════
# Snapshot loading
# ═══════════════════════════════════════════════════════════════════════════════


def canonical_action_key(key: str) -> str:
    """Normalize transition text, e.g. ``type [3] [x]`` -> ``type [3] [x] [1]``."""
    try:
        return render_action(parse_action(key))
    except ActionError as e:
        raise SnapshotError(f"SnapshotError: transition key {key!r} is not an action command: {e}") from e


def _load_state(raw: dict, base_dir: Path) -> ReplayState:
    if not isinstance(raw, dict) or not isinstance(raw.get("id"), str):
        raise SnapshotError("SnapshotError: every state needs a string 'id'")
    state_id = raw["id"]
    if "ax_dump" in raw:
        dump = raw["ax_dump"]
    elif "ax_dump_file" in raw:
        try:
            dump = (base_dir / raw["ax_dump_file"]).read_text(encoding="utf-8")
        except OSError as e:
            raise SnapshotError(f"SnapshotError: state '{state_id}': cannot read {raw['ax_dump_file']}: {e}") from e
    else:
        raise SnapshotError(f"SnapshotError: state '{state_id}' has neither 'ax_dump' nor 'ax_dump_file'")
    if not isinstance(dump, str):
        raise SnapshotError(f"SnapshotError: state '{state_id}': page dump must be text")

    try:
        parse_ax_tree(dump)
    except EmptyObservation:
        pass
    except AXTreeError as e:
        raise SnapshotError(f"SnapshotError: state '{state_id}': {e}") from e

    transitions: dict[str, str] = {}
    for item in raw.get("transitions", []):
        if not isinstance(item, dict) or "action" not in item or "to" not in item:
            raise SnapshotError(f"SnapshotError: state '{state_id}': transitions need 'action' and 'to'")
        key = canonical_action_key(item["action"])
        if key in transitions:
            raise SnapshotError(f"SnapshotError: state '{state_id}': duplicate transition '{key}'")
        transitions[key] = str(item["to"])

    return ReplayState(
        state_id=state_id,
        ax_dump=dump,
        url=raw.get("url", ""),
        terminal=bool(raw.get("terminal", False)),
        reward=raw.get("reward"),
        transitions=transitions,
    )


def replay_environment_from_dict(data: dict, base_dir: Path | None = None) -> ReplayEnvironment:
    if not isinstance(data, dict) or "start" not in data or not isinstance(data.get("states"), list):
        raise SnapshotError("SnapshotError: snapshot must be an object with 'start' and a 'states' list")
    states: dict[str, ReplayState] = {}
    for raw in data["states"]:
        state = _load_state(raw, base_dir or Path.cwd())
        if state.state_id in states:
            raise SnapshotError(f"SnapshotError: duplicate state id '{state.state_id}'")
        states[state.state_id] = state
    return ReplayEnvironment(states, str(data["start"]))


def load_replay_environment(path: str | Path) -> ReplayEnvironment:
    """Load a snapshot graph; page files resolve relative to the snapshot file.

    Raises:
        SnapshotError: on unreadable files, bad transition keys, duplicate
            state ids, a missing start state or dangling targets.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise SnapshotError(f"SnapshotError: cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise SnapshotError(f"SnapshotError: invalid JSON in {path}: {e}") from e
    return replay_environment_from_dict(data, path.parent)
