"""The agent's self-edited planning tree.

``branch`` adds a subplan under a live plan and makes it active; ``prune``
abandons the active plan's subtree and resumes an earlier live plan. Pruned
nodes stay in the tree with their reason so trajectory logs can show what
was given up, but they never appear in the prompt rendering.

Plan ids are handed out in creation order and never reused; a pruned plan is
dead and cannot be resumed or branched from.
"""

from dataclasses import dataclass, field
from typing import Any

ROOT_PLAN_ID = 0
LIVE = "live"
PRUNED = "pruned"
ACTIVE_MARKER = "(Active Plan)"


class PlanError(ValueError):
    """Base error for planning-tree operations."""


class InvalidObjective(PlanError):
    """The objective used to seed a tree is empty."""


class InvalidPlanRef(PlanError):
    """A plan id is unknown, pruned, or otherwise unusable as a target."""


@dataclass
class PlanNode:
    plan_id: int
    intent: str
    parent: int | None = None
    children: list[int] = field(default_factory=list)
    status: str = LIVE
    prune_reason: str | None = None

    @property
    def is_live(self) -> bool:
        return self.status == LIVE


@dataclass
class PlanTree:
    nodes: dict[int, PlanNode]
    active_id: int = ROOT_PLAN_ID
    next_id: int = ROOT_PLAN_ID + 1

    def node(self, plan_id: int) -> PlanNode:
        try:
            return self.nodes[plan_id]
        except KeyError:
            raise InvalidPlanRef(f"InvalidPlanRef: plan [{plan_id}] does not exist") from None

    def live_node(self, plan_id: int) -> PlanNode:
        node = self.node(plan_id)
        if not node.is_live:
            raise InvalidPlanRef(f"InvalidPlanRef: plan [{plan_id}] was pruned")
        return node

    def subtree(self, plan_id: int) -> list[int]:
        """``plan_id`` and every plan below it, depth-first."""
        ids = [plan_id]
        for child in self.nodes[plan_id].children:
            ids.extend(self.subtree(child))
        return ids

    def ancestors(self, plan_id: int) -> list[int]:
        """Plans above ``plan_id``, nearest first."""
        chain: list[int] = []
        parent = self.nodes[plan_id].parent
        while parent is not None:
            chain.append(parent)
            parent = self.nodes[parent].parent
        return chain

    def live_ids(self) -> list[int]:
        return [plan_id for plan_id in self.subtree(ROOT_PLAN_ID) if self.nodes[plan_id].is_live]


def root_intent(objective: str) -> str:
    return f'Find the solution to "{objective}"'


def new_tree(objective: str) -> PlanTree:
    """Seed a tree whose root plan [0] is the task objective itself.

    Raises:
        InvalidObjective: if the objective is empty or blank.
    """
    if not objective or not objective.strip():
        raise InvalidObjective("InvalidObjective: the objective must not be empty")
    root = PlanNode(plan_id=ROOT_PLAN_ID, intent=root_intent(objective))
    return PlanTree(nodes={ROOT_PLAN_ID: root})


def active_plan(tree: PlanTree) -> int:
    return tree.active_id


def check_branch(tree: PlanTree, parent_plan_id: int) -> PlanNode:
    """The parent a branch would attach to. Raises InvalidPlanRef if unusable."""
    return tree.live_node(parent_plan_id)


def check_prune(tree: PlanTree, resume_plan_id: int) -> PlanNode:
    """The plan a prune would resume. Raises InvalidPlanRef if unusable."""
    target = tree.live_node(resume_plan_id)
    if resume_plan_id != tree.active_id and resume_plan_id in tree.subtree(tree.active_id):
        raise InvalidPlanRef(
            f"InvalidPlanRef: plan [{resume_plan_id}] lies inside the plan being pruned [{tree.active_id}]"
        )
    return target


def branch(tree: PlanTree, parent_plan_id: int, intent: str) -> int:
    """Create a live subplan under ``parent_plan_id`` and make it active.

    Returns:
        The new plan id.

    Raises:
        InvalidPlanRef: if the parent is unknown or pruned.
    """
    parent = check_branch(tree, parent_plan_id)
    plan_id = tree.next_id
    tree.nodes[plan_id] = PlanNode(plan_id=plan_id, intent=intent, parent=parent_plan_id)
    parent.children.append(plan_id)
    tree.active_id = plan_id
    tree.next_id += 1
    return plan_id


def prune(tree: PlanTree, resume_plan_id: int, reason: str) -> None:
    """Abandon the active plan's subtree and resume ``resume_plan_id``.

    The resume target may be any live plan outside the abandoned subtree.
    Resuming the active plan itself is a no-op.

    Raises:
        InvalidPlanRef: if the target is unknown, already pruned, or lies
            below the active plan (it would be pruned by this very call).
    """
    target = check_prune(tree, resume_plan_id)
    if resume_plan_id == tree.active_id:
        return
    abandoned = tree.subtree(tree.active_id)
    tree.nodes[tree.active_id].prune_reason = reason
    for plan_id in abandoned:
        tree.nodes[plan_id].status = PRUNED
    tree.active_id = target.plan_id


def render(tree: PlanTree) -> str:
    """Depth-first, one tab-indented ``[id] intent`` line per live plan."""
    lines: list[str] = []

    def emit(plan_id: int, depth: int) -> None:
        node = tree.nodes[plan_id]
        if not node.is_live:
            return
        marker = f" {ACTIVE_MARKER}" if plan_id == tree.active_id else ""
        indent = "\t" * depth
        lines.append(f"{indent}[{plan_id}]{marker} {node.intent}")
        for child in node.children:
            emit(child, depth + 1)

    emit(ROOT_PLAN_ID, 0)
    return "\n".join(lines)


def to_dict(tree: PlanTree) -> dict[str, Any]:
    """Full tree, pruned plans and reasons included, for the trajectory log."""
    return {
        "active_id": tree.active_id,
        "next_id": tree.next_id,
        "nodes": [
            {
                "plan_id": node.plan_id,
                "intent": node.intent,
                "parent": node.parent,
                "children": list(node.children),
                "status": node.status,
                "prune_reason": node.prune_reason,
            }
            for node in sorted(tree.nodes.values(), key=lambda n: n.plan_id)
        ],
    }


def from_dict(data: dict[str, Any]) -> PlanTree:
    nodes = {
        item["plan_id"]: PlanNode(
            plan_id=item["plan_id"],
            intent=item["intent"],
            parent=item["parent"],
            children=list(item["children"]),
            status=item["status"],
            prune_reason=item.get("prune_reason"),
        )
        for item in data["nodes"]
    }
    return PlanTree(nodes=nodes, active_id=data["active_id"], next_id=data["next_id"])
