"""Agent action commands: types, parsing, rendering and the prompt's action specs.

Commands are one line each: a verb followed by bracketed arguments, e.g.
``click [7]``, ``type [15] [Carnegie Mellon University] [1]`` or
``branch [12] [Navigate to the "Issue" page.]``. Arguments are read left to
right; brackets nested inside an argument must balance.

Which verbs an agent may use depends on its :class:`ActionSpace`, derived
from the configuration flags:

================  =======================================================
verbs             offered when
================  =======================================================
click, type,      always
go_back, stop
note              reduce_actions
go_home           reduce_actions and multisite
scroll            not disable_scroll
noop, hover,      not reduce_actions
press, tab_focus,
new_tab,
tab_close,
go_forward, goto
branch, prune     planning
================  =======================================================
"""

import re
from dataclasses import dataclass
from typing import ClassVar, NamedTuple

# ═══════════════════════════════════════════════════════════════════════════════
# Errors
# ═══════════════════════════════════════════════════════════════════════════════


class ActionError(ValueError):
    """Base error for action commands that cannot be used."""

    def __init__(self, message: str, line: str = ""):
        super().__init__(message)
        self.line = line


class UnknownAction(ActionError):
    """The line does not start with a known verb."""


class MalformedAction(ActionError):
    """The verb is known but its arguments are missing, extra or unbalanced."""


class DisallowedAction(ActionError):
    """The command is well-formed but excluded from the configured action space."""

    def __init__(self, message: str, line: str = "", action: "Action | None" = None):
        super().__init__(message, line)
        self.action = action


# ═══════════════════════════════════════════════════════════════════════════════
# Action types
# ═══════════════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class Click:
    verb: ClassVar[str] = "click"
    id: int


@dataclass(frozen=True)
class Type:
    verb: ClassVar[str] = "type"
    id: int
    content: str
    press_enter: bool = True


@dataclass(frozen=True)
class GoBack:
    verb: ClassVar[str] = "go_back"


@dataclass(frozen=True)
class GoHome:
    verb: ClassVar[str] = "go_home"


@dataclass(frozen=True)
class Note:
    verb: ClassVar[str] = "note"
    content: str


@dataclass(frozen=True)
class Stop:
    verb: ClassVar[str] = "stop"
    answer: str


@dataclass(frozen=True)
class Branch:
    verb: ClassVar[str] = "branch"
    parent_plan_id: int
    intent: str


@dataclass(frozen=True)
class Prune:
    verb: ClassVar[str] = "prune"
    resume_plan_id: int
    reason: str


@dataclass(frozen=True)
class Noop:
    verb: ClassVar[str] = "noop"


@dataclass(frozen=True)
class Hover:
    verb: ClassVar[str] = "hover"
    id: int


@dataclass(frozen=True)
class Press:
    verb: ClassVar[str] = "press"
    key_combo: str


@dataclass(frozen=True)
class Scroll:
    verb: ClassVar[str] = "scroll"
    direction: str


@dataclass(frozen=True)
class TabFocus:
    verb: ClassVar[str] = "tab_focus"
    index: int


@dataclass(frozen=True)
class NewTab:
    verb: ClassVar[str] = "new_tab"


@dataclass(frozen=True)
class TabClose:
    verb: ClassVar[str] = "tab_close"


@dataclass(frozen=True)
class GoForward:
    verb: ClassVar[str] = "go_forward"


@dataclass(frozen=True)
class Goto:
    verb: ClassVar[str] = "goto"
    url: str


Action = (
    Click | Type | GoBack | GoHome | Note | Stop | Branch | Prune
    | Noop | Hover | Press | Scroll | TabFocus | NewTab | TabClose | GoForward | Goto
)  # fmt: skip

ACTION_TYPES: dict[str, type] = {
    cls.verb: cls
    for cls in (
        Click, Type, GoBack, GoHome, Note, Stop, Branch, Prune,
        Noop, Hover, Press, Scroll, TabFocus, NewTab, TabClose, GoForward, Goto,
    )
}  # fmt: skip

PLANNING_VERBS = frozenset({"branch", "prune"})
# Handled inside the agent loop; never sent to the environment.
INTERNAL_VERBS = PLANNING_VERBS | {"note", "stop"}
VANILLA_ONLY_VERBS = frozenset({"noop", "hover", "press", "tab_focus", "new_tab", "tab_close", "go_forward", "goto"})
SCROLL_DIRECTIONS = ("up", "down")


def is_environment_action(action: Action) -> bool:
    return action.verb not in INTERNAL_VERBS


# ═══════════════════════════════════════════════════════════════════════════════
# Action space
# ═══════════════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class ActionSpace:
    verbs: frozenset[str]

    @classmethod
    def from_flags(
        cls, *, reduce_actions: bool, disable_scroll: bool, planning: bool, multisite: bool
    ) -> "ActionSpace":
        verbs = {"click", "type", "go_back", "stop"}
        if reduce_actions:
            verbs.add("note")
            if multisite:
                verbs.add("go_home")
        else:
            verbs |= VANILLA_ONLY_VERBS
        if not disable_scroll:
            verbs.add("scroll")
        if planning:
            verbs |= PLANNING_VERBS
        return cls(frozenset(verbs))

    @classmethod
    def from_config(cls, config) -> "ActionSpace":
        return cls.from_flags(
            reduce_actions=config.reduce_actions,
            disable_scroll=config.disable_scroll,
            planning=config.planning,
            multisite=config.multisite,
        )

    @classmethod
    def everything(cls) -> "ActionSpace":
        return cls(frozenset(ACTION_TYPES))

    def allows(self, action: Action) -> bool:
        return action.verb in self.verbs


# ═══════════════════════════════════════════════════════════════════════════════
# Parsing
# ═══════════════════════════════════════════════════════════════════════════════

_VERB_RE = re.compile(r"[a-z_]+")
_PRESS_ENTER_RE = re.compile(r"(?:press_enter_after\s*=\s*)?([01])")
# Markup LLMs like to wrap commands in: backticks, bullets, numbering.
_WRAPPER_RE = re.compile(r"^(?:[-*+]\s+|\d+[.)]\s+)?`*(.*?)`*$")


def _split_arguments(text: str, line: str) -> list[str]:
    """Read ``[a] [b c] [d [e]]`` into ``['a', 'b c', 'd [e]']``."""
    args: list[str] = []
    i = 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        if text[i] != "[":
            raise MalformedAction(f"MalformedAction: unexpected text {text[i:]!r} in {line!r}", line)
        depth = 0
        start = i + 1
        while i < len(text):
            if text[i] == "[":
                depth += 1
            elif text[i] == "]":
                depth -= 1
                if depth == 0:
                    break
            i += 1
        if depth != 0:
            raise MalformedAction(f"MalformedAction: unbalanced brackets in {line!r}", line)
        args.append(text[start:i])
        i += 1
    return args


def _int_arg(value: str, what: str, line: str) -> int:
    stripped = value.strip()
    if not (stripped.isascii() and stripped.isdigit()):
        raise MalformedAction(f"MalformedAction: {what} must be a non-negative integer, got {value!r}", line)
    return int(stripped)


def _expect(args: list[str], count: int, verb: str, line: str) -> None:
    if len(args) != count:
        raise MalformedAction(f"MalformedAction: {verb} takes {count} argument(s), got {len(args)}", line)


def _build(verb: str, args: list[str], line: str) -> Action:
    cls = ACTION_TYPES[verb]
    if verb in ("go_back", "go_home", "noop", "new_tab", "tab_close", "go_forward"):
        _expect(args, 0, verb, line)
        return cls()
    if verb in ("click", "hover"):
        _expect(args, 1, verb, line)
        return cls(_int_arg(args[0], "element id", line))
    if verb == "type":
        if len(args) not in (2, 3):
            raise MalformedAction(f"MalformedAction: type takes 2 or 3 arguments, got {len(args)}", line)
        press_enter = True
        if len(args) == 3:
            flag = _PRESS_ENTER_RE.fullmatch(args[2].strip())
            if not flag:
                raise MalformedAction(f"MalformedAction: press_enter_after must be 0 or 1, got {args[2]!r}", line)
            press_enter = flag.group(1) == "1"
        return Type(_int_arg(args[0], "element id", line), args[1], press_enter)
    if verb in ("note", "stop", "press", "goto"):
        _expect(args, 1, verb, line)
        return cls(args[0])
    if verb == "scroll":
        _expect(args, 1, verb, line)
        direction = args[0].strip().lower()
        if direction not in SCROLL_DIRECTIONS:
            raise MalformedAction(f"MalformedAction: scroll direction must be up or down, got {args[0]!r}", line)
        return Scroll(direction)
    if verb == "tab_focus":
        _expect(args, 1, verb, line)
        return TabFocus(_int_arg(args[0], "tab index", line))
    if verb == "branch":
        _expect(args, 2, verb, line)
        return Branch(_int_arg(args[0], "parent plan id", line), args[1])
    # prune
    _expect(args, 2, verb, line)
    return Prune(_int_arg(args[0], "resume plan id", line), args[1])


def parse_action(line: str, space: ActionSpace | None = None) -> Action:
    """Parse one command line into a typed action.

    Args:
        line: The command, optionally wrapped in backticks or list markup.
        space: Allowed verbs; None allows every known verb.

    Raises:
        UnknownAction: the line does not start with a known verb.
        MalformedAction: arguments are missing, extra or unbalanced.
        DisallowedAction: the verb is outside ``space``.
    """
    wrapped = _WRAPPER_RE.match(line.strip())
    text = wrapped.group(1).strip() if wrapped else line.strip()
    verb_match = _VERB_RE.match(text)
    if not verb_match or verb_match.group(0) not in ACTION_TYPES:
        raise UnknownAction(f"UnknownAction: {text[:60]!r} is not an action command", line)
    verb = verb_match.group(0)
    rest = text[verb_match.end() :]
    if rest and not rest[0].isspace() and rest[0] != "[":
        raise UnknownAction(f"UnknownAction: {text[:60]!r} is not an action command", line)

    action = _build(verb, _split_arguments(rest, line), line)
    if space is not None and not space.allows(action):
        raise DisallowedAction(
            f"DisallowedAction: '{verb}' is not available in the current action space", line, action
        )
    return action


# ═══════════════════════════════════════════════════════════════════════════════
# Rendering
# ═══════════════════════════════════════════════════════════════════════════════


def render_action(action: Action) -> str:
    """Canonical single-line form; ``parse_action(render_action(a)) == a``."""
    if isinstance(action, (Click, Hover)):
        return f"{action.verb} [{action.id}]"
    if isinstance(action, Type):
        return f"type [{action.id}] [{action.content}] [{1 if action.press_enter else 0}]"
    if isinstance(action, Note):
        return f"note [{action.content}]"
    if isinstance(action, Stop):
        return f"stop [{action.answer}]"
    if isinstance(action, Branch):
        return f"branch [{action.parent_plan_id}] [{action.intent}]"
    if isinstance(action, Prune):
        return f"prune [{action.resume_plan_id}] [{action.reason}]"
    if isinstance(action, Press):
        return f"press [{action.key_combo}]"
    if isinstance(action, Scroll):
        return f"scroll [{action.direction}]"
    if isinstance(action, TabFocus):
        return f"tab_focus [{action.index}]"
    if isinstance(action, Goto):
        return f"goto [{action.url}]"
    return action.verb


# ═══════════════════════════════════════════════════════════════════════════════
# Prompt specifications
# ═══════════════════════════════════════════════════════════════════════════════

NAVIGATION_SPECS: tuple[tuple[str, str], ...] = (
    (
        "click",
        "click [id]: To click on an element with its numerical ID on the webpage. E.g., `click [7]` If clicking on "
        "a specific element doesn't trigger the transition to your desired web state, this is due to the element's "
        "lack of interactivity or GUI visibility. In such cases, move on to interact with OTHER similar or relevant "
        "elements INSTEAD.",
    ),
    (
        "type",
        "type [id] [content] [press_enter_after=0|1]: To type content into a field with a specific ID. By default, "
        "the `Enter` key is pressed after typing unless `press_enter_after` is set to 0. E.g., "
        "`type [15] [Carnegie Mellon University] [1]` If you can't find what you're looking for on your first "
        "attempt, consider refining your search keywords by breaking them down or trying related terms.",
    ),
    ("hover", "hover [id]: To hover over an element with its numerical ID on the webpage. E.g., `hover [7]`"),
    ("press", "press [key_comb]: To press a key combination on the keyboard. E.g., `press [Control+v]`"),
    ("scroll", "scroll [down|up]: To scroll the page up or down. E.g., `scroll [down]`"),
    ("new_tab", "new_tab: To open a new, empty browser tab."),
    ("tab_focus", "tab_focus [tab_index]: To switch the browser's focus to the tab with the given index."),
    ("tab_close", "tab_close: To close the currently active tab."),
    ("go_back", "go_back: To return to the previously viewed page."),
    ("go_forward", "go_forward: To navigate forward to the next page, undoing a go_back."),
    ("goto", "goto [url]: To navigate to a specific URL. E.g., `goto [http://localhost:7770]`"),
    ("noop", "noop: To do nothing for this step, e.g. while waiting for a page to load."),
    (
        "note",
        "note [content]: To take note of all important info w.r.t. completing the task to enable reviewing it later. "
        "E.g., `note [Spent $10 on 4/1/2024]`",
    ),
    (
        "stop",
        "stop [answer]: To stop interaction and return response. Present your answer within the brackets. If the "
        "task doesn't require a textual answer or appears insurmountable, indicate `N/A` and additional reasons and "
        "all relevant information you gather as the answer. E.g., `stop [5h 47min]`",
    ),
    ("go_home", "go_home: To return to the homepage where you can find other websites."),
)

PLANNING_SPECS: tuple[tuple[str, str], ...] = (
    (
        "branch",
        "branch [parent_plan_id] [new_subplan_intent]: To create a new subplan based on PREVIOUS PLANS. Ensure the "
        "new subplan is connected to the appropriate parent plan by using its ID. E.g., "
        '`branch [12] [Navigate to the "Issue" page to check all the issues.]`',
    ),
    (
        "prune",
        "prune [resume_plan_id] [reason]: To return to a previous plan state when the current plan is deemed "
        "impractical. Enter the ID of the plan state you want to resume. E.g., `prune [5] [The current page lacks "
        'items "black speaker," prompting a return to the initial page to restart the item search.]`',
    ),
)


class ActionSpecs(NamedTuple):
    navigation: str
    planning: str


def render_action_specs(config) -> ActionSpecs:
    """Specification paragraphs for every verb the configured space offers, and only those."""
    space = ActionSpace.from_config(config)
    navigation = "\n".join(text for verb, text in NAVIGATION_SPECS if verb in space.verbs)
    planning = "\n".join(text for verb, text in PLANNING_SPECS if verb in space.verbs)
    return ActionSpecs(navigation=navigation, planning=planning)
