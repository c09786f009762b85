"""Shared test harness for the web-agent script tests.

The CLI is a standalone file (PEP 723, loaded by path rather than installed
as a package), so tests import it via :func:`load_script`. Random page
generators used by the property tests live here too, next to the paths of
the golden fixtures.

Living in ``conftest.py`` means pytest makes these importable from any test
module (``from conftest import load_script, random_tree``) and the scripts
path is added to ``sys.path`` once, before any test module loads.
"""

import importlib.util
import random
import sys
from pathlib import Path

import click.testing
from hypothesis import strategies as st

_SCRIPTS_PATH = Path(__file__).parent.parent / "skills" / "web-agent" / "scripts"
if str(_SCRIPTS_PATH) not in sys.path:
    sys.path.insert(0, str(_SCRIPTS_PATH))

from lib.ax_tree import AXNode, AXTree, with_depths

FIXTURES = Path(__file__).parent / "fixtures"
PAGES = FIXTURES / "pages"
DEMO = Path(__file__).parent.parent / "skills" / "web-agent" / "fixtures" / "demo"
DEMO_OBJECTIVE = 'Open my latest updated issue that has keyword "feature" in its title to check if it is closed'


def load_script(name: str, subdir: str):
    """Import a standalone CLI script by file path and return the module.

    ``name`` is the hyphenated script name (e.g. ``web-agent``); ``subdir`` is
    its directory under ``scripts/``.
    """
    path = _SCRIPTS_PATH / subdir / f"{name}.py"
    spec = importlib.util.spec_from_file_location(name.replace("-", "_"), path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def run_cli(mod, args, input=None, env=None):
    """Invoke a script module's Click ``cli``. Returns the Click result."""
    runner = click.testing.CliRunner()
    return runner.invoke(mod.cli, args, input=input, env=env)


def page(name: str) -> str:
    return (PAGES / name).read_text(encoding="utf-8")


def corpus_pages() -> list[Path]:
    """Every raw page fixture: the test corpus plus the demo episode pages."""
    return sorted(PAGES.glob("*.txt")) + sorted((DEMO / "pages").glob("*.txt"))


# ═══════════════════════════════════════════════════════════════════════════════
# Random trees
# ═══════════════════════════════════════════════════════════════════════════════

ROLES = (
    "link",
    "button",
    "StaticText",
    "text",
    "generic",
    "heading",
    "combobox",
    "main",
    "search",
    "list",
    "listitem",
    "table",
    "row",
    "gridcell",
    "columnheader",
)
LABELS = ("Home", "My Account", "Search", "Sign in", "I'm Feeling Lucky", "Price: $27.00", "a [b] c", 'say "hi"', "")
ATTRIBUTES = (("required", "False"), ("checked", "true"), ("expanded", "False"))


def random_tree(rng: random.Random, max_nodes: int = 64) -> AXTree:
    """A random valid tree with up to ``max_nodes`` nodes and unique ids."""
    count = rng.randint(1, max_nodes)
    ids = iter(rng.sample(range(1, 5000), count))
    nodes = []
    parents: list[int | None] = [None]
    for index in range(1, count):
        parents.append(rng.randrange(index))
    for _ in range(count):
        name = rng.choice(LABELS) if rng.random() < 0.8 else None
        nodes.append(
            {
                "role": rng.choice(ROLES),
                "node_id": next(ids) if rng.random() < 0.75 else None,
                "name": name,
                "attributes": tuple(rng.sample(ATTRIBUTES, rng.randint(0, 2))) if rng.random() < 0.3 else (),
            }
        )

    def build(index: int) -> AXNode:
        children = tuple(build(child) for child in range(count) if parents[child] == index)
        return AXNode(children=children, **nodes[index])

    return AXTree(with_depths(build(0)))


@st.composite
def ax_trees(draw, max_nodes: int = 64) -> AXTree:
    """Hypothesis strategy wrapping :func:`random_tree` with a drawn seed."""
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return random_tree(random.Random(seed), max_nodes)


def brute_force_relatives(tree: AXTree, node_id: int) -> tuple[set, set, set]:
    """Ancestor, sibling and descendant paths from parent links alone."""
    parent_of: dict[tuple, tuple | None] = {}
    for path, _ in tree.walk():
        parent_of[path] = path[:-1] if path else None
    target = tree.id_index[node_id]

    ancestors = set()
    current = parent_of[target]
    while current is not None:
        ancestors.add(current)
        current = parent_of[current]
    siblings = {path for path, parent in parent_of.items() if target and parent == target[:-1] and path != target}
    descendants = {path for path in parent_of if len(path) > len(target) and path[: len(target)] == target}
    return ancestors, siblings, descendants
