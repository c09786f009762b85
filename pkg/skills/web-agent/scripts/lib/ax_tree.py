"""Accessibility-tree text format: parsing, serialization and navigation.

One node per line, one indent unit per depth level::

    RootWebArea [1] 'Google'
    	search [6]
    		combobox [12] 'Search' [required: False]

A line is ``role [id] 'name' [attr: value]...`` where id, name and
attributes are each optional. Names are Python-literal quoted strings
(single quotes unless the name itself holds one), which is how the
accessibility dumps are produced in the first place. A name whose closing
quote is missing runs to end-of-line and is kept verbatim. Such a name is
re-emitted behind whichever quote it does not contain bare; a hand-built
truncated name holding both kinds bare has the opening one backslash-escaped.

Lines that do not fit the grammar are kept as name-only nodes (empty role,
whole line as name) so no page content is silently lost.
"""

import ast
import re
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

NodePath = tuple[int, ...]

_ROLE_RE = re.compile(r"[A-Za-z][A-Za-z0-9_-]*")
_ID_RE = re.compile(r" \[(\d+)\]")
_ATTR_RE = re.compile(r" \[([^\]:]+): ([^\]]*)\]")


class AXTreeError(ValueError):
    """Base error for accessibility-tree handling."""


class EmptyObservation(AXTreeError):
    """Raised when an observation dump holds no nodes at all."""

    def __init__(self, message: str = "EmptyObservation: observation dump is empty"):
        super().__init__(message)


class ParseError(AXTreeError):
    """Raised for structural problems in a dump (bad indentation, duplicate ids)."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"ParseError: line {line_number}: {message}")
        self.line_number = line_number


class UnknownNode(AXTreeError, KeyError):
    """Raised when a node id is not part of the tree."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "UnknownNode"


@dataclass(frozen=True)
class AXNode:
    role: str
    node_id: int | None = None
    name: str | None = None
    attributes: tuple[tuple[str, str], ...] = ()
    children: tuple["AXNode", ...] = ()
    depth: int = 0
    # Name had no closing quote in the source dump.
    truncated: bool = False

    @property
    def is_name_only(self) -> bool:
        return not self.role

    def line(self, with_id: bool = True) -> str:
        """Render this node's own line (no indentation, no children)."""
        parts: list[str] = [self.role] if self.role else []
        if with_id and self.node_id is not None:
            parts.append(f"[{self.node_id}]")
        if self.name is not None:
            parts.append(_quote_name(self.name, self.truncated))
        if not self.truncated:
            parts.extend(f"[{key}: {value}]" for key, value in self.attributes)
        return " ".join(parts)


@dataclass(frozen=True)
class AXTree:
    root: AXNode
    id_index: dict[int, NodePath] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        index: dict[int, NodePath] = {}
        for path, node in _walk(self.root, ()):
            if node.node_id is not None:
                if node.node_id in index:
                    raise AXTreeError(f"Duplicate node id {node.node_id}")
                index[node.node_id] = path
        object.__setattr__(self, "id_index", index)

    def __len__(self) -> int:
        return sum(1 for _ in _walk(self.root, ()))

    def walk(self) -> Iterator[tuple[NodePath, AXNode]]:
        """Yield ``(path, node)`` pairs in document (pre-)order."""
        return _walk(self.root, ())

    def ids(self) -> set[int]:
        return set(self.id_index)

    def at(self, path: NodePath) -> AXNode:
        node = self.root
        for index in path:
            node = node.children[index]
        return node

    def path_of(self, node_id: int) -> NodePath:
        try:
            return self.id_index[node_id]
        except KeyError:
            raise UnknownNode(f"UnknownNode: no node with id {node_id}") from None

    def node(self, node_id: int) -> AXNode:
        return self.at(self.path_of(node_id))


class Relatives(NamedTuple):
    ancestors: tuple[AXNode, ...]
    siblings: tuple[AXNode, ...]
    descendants: tuple[AXNode, ...]


def _walk(node: AXNode, path: NodePath) -> Iterator[tuple[NodePath, AXNode]]:
    yield path, node
    for index, child in enumerate(node.children):
        yield from _walk(child, path + (index,))


def _bare_positions(text: str, quote: str) -> list[int]:
    """Indexes where ``quote`` occurs in ``text`` without a backslash escaping it."""
    found = []
    i = 0
    while i < len(text):
        if text[i] == "\\":
            i += 2
            continue
        if text[i] == quote:
            found.append(i)
        i += 1
    return found


def _quote_name(name: str, truncated: bool) -> str:
    if truncated:
        # The opening quote must not reappear bare in the name, or it would close it.
        quote = "'" if not _bare_positions(name, "'") else '"'
        for index in reversed(_bare_positions(name, quote)):
            name = name[:index] + "\\" + name[index:]
        return quote + name
    return repr(name)


def with_depths(node: AXNode, depth: int = 0) -> AXNode:
    """Return ``node`` with depth fields re-derived from ``depth`` downwards."""
    children = tuple(with_depths(child, depth + 1) for child in node.children)
    if node.depth == depth and children == node.children:
        return node
    return replace(node, depth=depth, children=children)


# ═══════════════════════════════════════════════════════════════════════════════
# Parsing
# ═══════════════════════════════════════════════════════════════════════════════


def parse_line(content: str, depth: int = 0) -> AXNode:
    """Parse one dump line (indentation already removed) into a childless node."""
    role_match = _ROLE_RE.match(content)
    if not role_match:
        return _name_only(content, depth)
    role = role_match.group(0)
    pos = role_match.end()

    node_id = None
    id_match = _ID_RE.match(content, pos)
    if id_match:
        node_id = int(id_match.group(1))
        pos = id_match.end()

    name = None
    truncated = False
    if content.startswith((" '", ' "'), pos):
        quoted_end = _closing_quote(content, pos + 1)
        if quoted_end is None:
            name = content[pos + 2 :]
            truncated = True
            pos = len(content)
        else:
            try:
                name = ast.literal_eval(content[pos + 1 : quoted_end + 1])
            except (ValueError, SyntaxError):
                return _name_only(content, depth)
            pos = quoted_end + 1

    attributes = []
    while pos < len(content):
        attr_match = _ATTR_RE.match(content, pos)
        if not attr_match:
            return _name_only(content, depth)
        attributes.append((attr_match.group(1), attr_match.group(2)))
        pos = attr_match.end()

    return AXNode(
        role=role,
        node_id=node_id,
        name=name,
        attributes=tuple(attributes),
        depth=depth,
        truncated=truncated,
    )


def _closing_quote(content: str, start: int) -> int | None:
    """Index of the quote closing the literal opened at ``start``, or None."""
    quote = content[start]
    i = start + 1
    while i < len(content):
        char = content[i]
        if char == "\\":
            i += 2
            continue
        if char == quote:
            return i
        i += 1
    return None


def _name_only(content: str, depth: int) -> AXNode:
    # A line that is exactly one quoted literal round-trips as a name-only node.
    if content[:1] in ("'", '"'):
        end = _closing_quote(content, 0)
        if end == len(content) - 1:
            try:
                return AXNode(role="", name=ast.literal_eval(content), depth=depth)
            except (ValueError, SyntaxError):
                pass
    return AXNode(role="", name=content, depth=depth)


def _detect_indent(lines: list[str]) -> str:
    for line in lines:
        if line[:1] == "\t":
            return "\t"
        if line[:1] == " ":
            return " " * (len(line) - len(line.lstrip(" ")))
    return "\t"


def _depth_of(line: str, unit: str, line_number: int) -> tuple[int, str]:
    depth = 0
    rest = line
    while rest.startswith(unit):
        depth += 1
        rest = rest[len(unit) :]
    if rest[:1] in (" ", "\t"):
        raise ParseError("indentation is not a whole number of indent units", line_number)
    return depth, rest


def parse_ax_tree(text: str, indent: str | None = None) -> AXTree:
    """Parse an accessibility-tree dump.

    Args:
        text: The raw observation dump.
        indent: Fixed indent unit. When None, a tab is assumed unless the first
            indented line starts with spaces, in which case its run of spaces
            becomes the unit.

    Raises:
        EmptyObservation: if the dump holds no non-blank line.
        ParseError: on indentation jumps, multiple roots or duplicate ids.
    """
    numbered = [(n, line.rstrip("\r")) for n, line in enumerate(text.split("\n"), start=1)]
    numbered = [(n, line) for n, line in numbered if line.strip()]
    if not numbered:
        raise EmptyObservation()

    # Dumps are sometimes indented as a whole; strip the common margin first.
    margin = min(len(line) - len(line.lstrip(" \t")) for _, line in numbered)
    numbered = [(n, line[margin:]) for n, line in numbered]
    unit = indent or _detect_indent([line for _, line in numbered])

    # Each stack entry: (node fields, list of finished children)
    stack: list[tuple[AXNode, list[AXNode]]] = []
    root: AXNode | None = None
    seen_ids: set[int] = set()

    def close_top() -> AXNode:
        node, kids = stack.pop()
        finished = replace(node, children=tuple(kids))
        if stack:
            stack[-1][1].append(finished)
        return finished

    for line_number, line in numbered:
        depth, content = _depth_of(line, unit, line_number)
        if depth > len(stack):
            raise ParseError(f"indentation jumps to depth {depth} below depth {len(stack) - 1}", line_number)
        if depth == 0 and (stack or root is not None):
            raise ParseError("a second root node is not allowed", line_number)
        while len(stack) > depth:
            finished = close_top()
            if not stack:
                root = finished
        node = parse_line(content, depth)
        if node.node_id is not None:
            if node.node_id in seen_ids:
                raise ParseError(f"duplicate node id {node.node_id}", line_number)
            seen_ids.add(node.node_id)
        stack.append((node, []))

    while stack:
        finished = close_top()
        if not stack:
            root = finished
    return AXTree(root)


# ═══════════════════════════════════════════════════════════════════════════════
# Serialization
# ═══════════════════════════════════════════════════════════════════════════════


def serialize_node(node: AXNode, *, with_ids: bool = True, indent: str = "\t") -> str:
    lines: list[str] = []

    def emit(current: AXNode, depth: int) -> None:
        lines.append(indent * depth + current.line(with_id=with_ids))
        for child in current.children:
            emit(child, depth + 1)

    emit(node, 0)
    return "\n".join(lines)


def serialize(tree: AXTree, *, with_ids: bool = True, indent: str = "\t") -> str:
    """Render a tree back to the canonical dump format, one line per node."""
    return serialize_node(tree.root, with_ids=with_ids, indent=indent)


# ═══════════════════════════════════════════════════════════════════════════════
# Navigation
# ═══════════════════════════════════════════════════════════════════════════════


def relative_paths(tree: AXTree, path: NodePath) -> tuple[list[NodePath], list[NodePath], list[NodePath]]:
    """Ancestor, sibling and descendant paths of the node at ``path``."""
    ancestors = [path[:i] for i in range(len(path))]
    siblings: list[NodePath] = []
    if path:
        parent = tree.at(path[:-1])
        siblings = [path[:-1] + (i,) for i in range(len(parent.children)) if i != path[-1]]
    descendants = [path + sub for sub, _ in _walk(tree.at(path), ()) if sub]
    return ancestors, siblings, descendants


def relatives(tree: AXTree, node_id: int) -> Relatives:
    """Ancestors (root first), siblings and descendants of a node, in document order.

    Raises:
        UnknownNode: if ``node_id`` is not in the tree.
    """
    ancestors, siblings, descendants = relative_paths(tree, tree.path_of(node_id))
    return Relatives(
        ancestors=tuple(tree.at(p) for p in ancestors),
        siblings=tuple(tree.at(p) for p in siblings),
        descendants=tuple(tree.at(p) for p in descendants),
    )
