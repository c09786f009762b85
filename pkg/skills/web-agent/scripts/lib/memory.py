"""Selective history replay.

Each recorded step keeps only the part of its page the agent flagged as
pivotal: the pivotal nodes plus their ancestors, siblings and descendants.
That filtered page is rendered without element ids (old ids would invite
clicks on elements that no longer exist) and cached on the step when it is
sealed.

Which steps are replayed depends on the configuration:

- planning on: only steps issued under the currently active plan;
- planning off, history on: the last ``history_window`` steps;
- history off: just the previous action line.

Steps that ended without an action are never replayed.
"""

import re
from dataclasses import dataclass, field, replace

from .actions import Action, render_action
from .ax_tree import AXNode, AXTree, NodePath, relative_paths, serialize
from .output import warning
from .planning import PlanTree

_INT_RE = re.compile(r"\d+")


@dataclass(frozen=True)
class StepRecord:
    step_index: int
    plan_id: int
    observation: AXTree | None
    observation_text: str
    reason: str
    action: Action | None
    pivotal_ids: tuple[int, ...] = ()
    filtered_observation: str = ""
    obs_tokens: int = 0
    prompt_tokens: int = 0
    state_id: str | None = None
    corrective: bool = False
    error: str | None = None
    candidates: tuple[Action, ...] = ()


@dataclass
class TrajectoryHistory:
    objective: str
    steps: list[StepRecord] = field(default_factory=list)

    def append(self, step: StepRecord) -> None:
        if step.step_index != len(self.steps):
            raise ValueError(f"step_index {step.step_index} out of order, expected {len(self.steps)}")
        self.steps.append(step)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def next_index(self) -> int:
        return len(self.steps)


# ═══════════════════════════════════════════════════════════════════════════════
# Pivotal nodes
# ═══════════════════════════════════════════════════════════════════════════════


def parse_highlights(section_text: str) -> list[int]:
    """Ids from an observation-highlight section, in order, without repeats.

    Fragments that are not plain integers (``x``, ``[12]a``) are skipped.
    """
    ids: list[int] = []
    seen: set[int] = set()
    for fragment in re.split(r"[,;\s]+", section_text or ""):
        token = fragment.strip().strip("`'\"[]()")
        if not token or not _INT_RE.fullmatch(token):
            continue
        value = int(token)
        if value not in seen:
            seen.add(value)
            ids.append(value)
    return ids


def retained_paths(tree: AXTree, pivotal_ids) -> set[NodePath]:
    """Paths kept for ``pivotal_ids``; ids not in the tree contribute nothing."""
    keep: set[NodePath] = {()}
    for node_id in pivotal_ids:
        if node_id not in tree.id_index:
            continue
        path = tree.id_index[node_id]
        ancestors, siblings, descendants = relative_paths(tree, path)
        keep.add(path)
        keep.update(ancestors)
        keep.update(siblings)
        keep.update(descendants)
    return keep


def filter_observation(tree: AXTree, pivotal_ids) -> AXTree:
    """Reduce ``tree`` to the pivotal nodes and their relatives.

    Surviving nodes keep their document order. With no valid pivotal id only
    the root is left.
    """
    keep = retained_paths(tree, pivotal_ids)

    def prune(node: AXNode, path: NodePath) -> AXNode:
        children = tuple(
            prune(child, path + (index,)) for index, child in enumerate(node.children) if path + (index,) in keep
        )
        if children == node.children:
            return node
        return replace(node, children=children)

    # Kept paths are closed under ancestors, so depths never change.
    return AXTree(prune(tree.root, ()))


def render_filtered(tree: AXTree | None, pivotal_ids) -> str:
    if tree is None:
        return ""
    return serialize(filter_observation(tree, pivotal_ids), with_ids=False)


def seal_step(
    *,
    step_index: int,
    plan_id: int,
    observation: AXTree | None,
    observation_text: str,
    reason: str,
    action: Action | None,
    pivotal_ids,
    **extra,
) -> StepRecord:
    """Build an immutable step, dropping highlighted ids the page never had."""
    known = observation.id_index if observation is not None else {}
    valid = tuple(node_id for node_id in pivotal_ids if node_id in known)
    dropped = [node_id for node_id in pivotal_ids if node_id not in known]
    if dropped:
        warning(f"Step {step_index}: ignoring highlighted ids not on the page: {', '.join(map(str, dropped))}")
    return StepRecord(
        step_index=step_index,
        plan_id=plan_id,
        observation=observation,
        observation_text=observation_text,
        reason=reason,
        action=action,
        pivotal_ids=valid,
        filtered_observation=render_filtered(observation, valid),
        **extra,
    )


# ═══════════════════════════════════════════════════════════════════════════════
# Prompt rendering
# ═══════════════════════════════════════════════════════════════════════════════


def render_step(step: StepRecord) -> str:
    action = render_action(step.action) if step.action is not None else ""
    return "\n".join(
        [
            f"<step_{step.step_index}_interaction>",
            "OBSERVATION:",
            step.filtered_observation,
            "REASON FOR ACTION:",
            step.reason,
            "ACTION:",
            action,
            f"</step_{step.step_index}_interaction>",
        ]
    )


def replayed_steps(history: TrajectoryHistory, plan: PlanTree, config) -> list[StepRecord]:
    """Steps whose blocks go into the history section.

    Steps that ended without an action (an unparsable reply after the corrective
    re-prompt) are never replayed. With planning on, the rest are the active
    plan's steps; otherwise the last ``history_window`` of them.
    """
    steps = [step for step in history.steps if step.action is not None]
    if config.planning:
        return [step for step in steps if step.plan_id == plan.active_id]
    return steps[-config.history_window :]


def render_history(history: TrajectoryHistory, plan: PlanTree, config) -> str:
    """The interaction-history prompt section (empty for an empty history)."""
    if not config.history_replay:
        acted = [step for step in history.steps if step.action is not None]
        return render_action(acted[-1].action) if acted else ""
    return "\n".join(render_step(step) for step in replayed_steps(history, plan, config))
