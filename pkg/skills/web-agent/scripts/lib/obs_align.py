"""Single-page observation condensing.

Two rewrites shrink a raw accessibility dump without losing anything the
agent can act on:

- descriptive text nodes (``StaticText``/``text``) that only repeat the label
  of their parent or of an adjacent interactive element are merged away;
- table and list blocks become Markdown rows and bullets, dropping the
  ``columnheader``/``gridcell``/``row`` scaffolding.

Interactive nodes always keep their ids and names, so every id the agent
could click on the raw page is still clickable on the condensed one.
"""

import math
import re
from dataclasses import dataclass, replace

from .ax_tree import AXNode, AXTree, serialize, with_depths

INTERACTIVE_ROLES = frozenset(
    {
        "link",
        "button",
        "textbox",
        "combobox",
        "checkbox",
        "radio",
        "tab",
        "menuitem",
        "option",
        "searchbox",
        "switch",
        "slider",
    }
)
DESCRIPTIVE_ROLES = frozenset({"StaticText", "text"})
TABLE_ROLES = frozenset({"table", "grid", "treegrid"})
ROW_GROUP_ROLES = frozenset({"rowgroup"})
HEADER_CELL_ROLES = frozenset({"columnheader"})
LIST_ROLES = frozenset({"list"})
LIST_ITEM_ROLES = frozenset({"listitem"})

MARKDOWN_SEPARATOR_CELL = "---"
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class CondensedObservation:
    text: str
    interactable_ids: frozenset[int]
    source_node_count: int
    emitted_node_count: int
    token_estimate: int
    tree: AXTree | None = None


def normalize_label(label: str | None) -> str:
    """Trim and collapse internal whitespace runs."""
    return _WS_RE.sub(" ", label or "").strip()


def is_interactive(node: AXNode) -> bool:
    return node.role in INTERACTIVE_ROLES


def interactive_ids(tree: AXTree) -> set[int]:
    return {node.node_id for _, node in tree.walk() if node.node_id is not None and is_interactive(node)}


def estimate_tokens(text: str) -> int:
    """Cheap tokenizer-free estimate: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


# ═══════════════════════════════════════════════════════════════════════════════
# Descriptive-node merging
# ═══════════════════════════════════════════════════════════════════════════════


def _is_redundant(node: AXNode, parent: AXNode | None, prev: AXNode | None, nxt: AXNode | None) -> bool:
    if node.role not in DESCRIPTIVE_ROLES:
        return False
    label = normalize_label(node.name)
    if not label:
        return False
    if parent is not None and normalize_label(parent.name) == label:
        return True
    return any(
        neighbor is not None and is_interactive(neighbor) and normalize_label(neighbor.name) == label
        for neighbor in (prev, nxt)
    )


def _merge_children(node: AXNode) -> tuple[AXNode, bool]:
    changed = False
    children: list[AXNode] = []
    for child in node.children:
        merged, child_changed = _merge_children(child)
        children.append(merged)
        changed |= child_changed

    # Sweep until stable: removing a node brings its neighbours together.
    while True:
        for i, child in enumerate(children):
            prev = children[i - 1] if i > 0 else None
            nxt = children[i + 1] if i + 1 < len(children) else None
            if _is_redundant(child, node, prev, nxt):
                children[i : i + 1] = list(child.children)
                changed = True
                break
        else:
            break

    if not changed:
        return node, False
    return replace(node, children=tuple(children)), True


def merge_descriptive_nodes(tree: AXTree) -> AXTree:
    """Drop text nodes that repeat their parent's or an interactive neighbour's label.

    A removed text node's own children (rare) move up into its place.
    """
    root, changed = _merge_children(tree.root)
    if not changed:
        return tree
    return AXTree(with_depths(root))


# ═══════════════════════════════════════════════════════════════════════════════
# Table / list blocks to Markdown
# ═══════════════════════════════════════════════════════════════════════════════


def _is_markdown_row(node: AXNode) -> bool:
    return node.role == "row" and (node.name or "").startswith("|")


def _escape_cell(text: str) -> str:
    return normalize_label(text).replace("|", "\\|")


def _text_of(node: AXNode) -> str:
    """Label of a cell: its own name, or the joined labels below it."""
    if node.name:
        return node.name
    parts = [_text_of(child) for child in node.children]
    return " ".join(part for part in parts if part)


def _top_interactive(node: AXNode) -> list[AXNode]:
    """Outermost interactive nodes below ``node`` (subtrees kept whole)."""
    found: list[AXNode] = []
    for child in node.children:
        if is_interactive(child):
            found.append(child)
        else:
            found.extend(_top_interactive(child))
    return found


def _markdown_row(cells: list[str]) -> str:
    return "| " + " | ".join(cells) + " |"


def _collect_rows(node: AXNode) -> tuple[list[AXNode], list[AXNode]]:
    """Split a table's children into rows (through row groups) and everything else."""
    rows: list[AXNode] = []
    extras: list[AXNode] = []
    for child in node.children:
        if child.role in ROW_GROUP_ROLES:
            group_rows, group_extras = _collect_rows(child)
            rows.extend(group_rows)
            extras.extend(group_extras)
        elif child.role == "row":
            rows.append(child)
        else:
            extras.append(child)
    return rows, extras


def _convert_table(table: AXNode) -> list[AXNode]:
    """Rewrite a table block; returns the replacement node list (possibly empty)."""
    rows, extras = _collect_rows(table)
    if not rows:
        # Nothing tabular left; keep only what can still be interacted with.
        return _top_interactive(table)
    if all(_is_markdown_row(row) for row in rows) and len(rows) == len(table.children):
        return [table]

    new_rows: list[AXNode] = []
    for index, row in enumerate(rows):
        if _is_markdown_row(row):
            new_rows.append(row)
            continue
        cells = list(row.children)
        line = _markdown_row([_escape_cell(_text_of(cell)) for cell in cells])
        keep = [node for cell in cells for node in ([cell] if is_interactive(cell) else _top_interactive(cell))]
        new_rows.append(AXNode(role="row", name=line, children=tuple(keep)))
        is_header = bool(cells) and all(cell.role in HEADER_CELL_ROLES for cell in cells)
        if index == 0 and is_header:
            separator = _markdown_row([MARKDOWN_SEPARATOR_CELL] * len(cells))
            new_rows.append(AXNode(role="row", name=separator))

    # Stray non-row children (captions, interactive controls) stay after the rows.
    kept_extras = [node for extra in extras for node in _rewrite_blocks(extra)]
    return [replace(table, children=tuple(new_rows + kept_extras))]


def _convert_list(block: AXNode) -> AXNode:
    items: list[AXNode] = []
    for child in block.children:
        if child.role not in LIST_ITEM_ROLES:
            items.append(child)
            continue
        label = child.name or " ".join(
            _text_of(grandchild) for grandchild in child.children if not is_interactive(grandchild)
        )
        label = normalize_label(label)
        text = f"- {label}" if label else "-"
        items.append(AXNode(role="text", name=text, children=tuple(_top_interactive(child))))
    return replace(block, children=tuple(items))


def _rewrite_blocks(node: AXNode) -> list[AXNode]:
    if node.role in TABLE_ROLES:
        return _convert_table(node)
    if node.role in LIST_ROLES and any(child.role in LIST_ITEM_ROLES for child in node.children):
        node = _convert_list(node)
    children: list[AXNode] = []
    for child in node.children:
        children.extend(_rewrite_blocks(child))
    return [replace(node, children=tuple(children))]


def blocks_to_markdown(tree: AXTree) -> AXTree:
    """Turn table and list blocks into Markdown rows and bullet text rows."""
    if tree.root.role in TABLE_ROLES and not _collect_rows(tree.root)[0]:
        # A row-less root table stays as the root, holding its interactive nodes.
        root = replace(tree.root, children=tuple(_top_interactive(tree.root)))
    else:
        root = _rewrite_blocks(tree.root)[0]
    return AXTree(with_depths(root))


# ═══════════════════════════════════════════════════════════════════════════════
# Page condensing
# ═══════════════════════════════════════════════════════════════════════════════


def empty_observation() -> CondensedObservation:
    return CondensedObservation(
        text="",
        interactable_ids=frozenset(),
        source_node_count=0,
        emitted_node_count=0,
        token_estimate=0,
    )


def condense(tree: AXTree | None, config) -> CondensedObservation:
    """Condense a whole page (no viewport window) according to ``config.condense_obs``.

    ``tree`` may be None for a blank page, which yields an empty observation.
    """
    if tree is None:
        return empty_observation()
    result = tree
    if config.condense_obs:
        # Unwrapping a block can put text next to a same-label control; repeat until stable.
        while True:
            condensed = blocks_to_markdown(merge_descriptive_nodes(result))
            if condensed == result:
                break
            result = condensed
    text = serialize(result)
    return CondensedObservation(
        text=text,
        interactable_ids=frozenset(interactive_ids(result)),
        source_node_count=len(tree),
        emitted_node_count=len(result),
        token_estimate=estimate_tokens(text),
        tree=result,
    )
