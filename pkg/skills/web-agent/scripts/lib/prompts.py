"""Prompt templates, prompt assembly and completion parsing.

An actor prompt is the instruction block (template with output and action
specifications filled in) followed by labeled information sections:

    OBJECTIVE / CURRENT STEP / PREVIOUS PLANS / INTERACTION HISTORY or
    PREVIOUS ACTION / NOTES / CURRENT OBSERVATION

Sections with nothing to show are left out, and the order never changes, so
identical inputs always give byte-identical prompts.
"""

import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from .actions import Action, ActionError, ActionSpace, DisallowedAction, parse_action, render_action, render_action_specs
from .memory import TrajectoryHistory, parse_highlights, render_history
from .planning import PlanTree, render

# ═══════════════════════════════════════════════════════════════════════════════
# Templates
# ═══════════════════════════════════════════════════════════════════════════════

TEMPLATE_WITH_PLANNING = """\
You are an AI assistant performing tasks on a web browser. You will be provided with task objective, current step, \
web page observations, previous plans, and interaction history. You need to issue an action for this step.

Generate the response in the following format:
{output_specifications}

You are ONLY allowed to use the following action commands. Strictly adheres to the given format. Only issue one \
single action.
If you think you should refine the plan, use the following actions:
{planning_action_specifications}
Otherwise, use the following actions:
{navigation_action_specifications}"""

TEMPLATE_WITHOUT_PLANNING = """\
You are an AI assistant performing tasks on a web browser. You will be provided with task objective, current step, \
web page observations, and other relevant information. You need to issue an action for this step.

Generate the response in the following format:
{output_specifications}

You are ONLY allowed to use the following action commands. Strictly adheres to the given format. Only issue one \
single action.
{navigation_action_specifications}"""

SINGLE_ACTION_SPEC = "Action: Select your action here."
CANDIDATE_ACTIONS_SPEC = (
    "Action: List all suitable actions here, one action command per line. Every line is a complete action command."
)

OUTPUT_SPECIFICATIONS = """\
Interaction history summary: Emphasize all important details in the INTERACTION HISTORY section.
Observation description: Describe information in the CURRENT OBSERVATION section. Emphasize elements and features \
that are relevant or potentially helpful for fulfilling the objective in detail.
Reason: Provide your rationale for proposing the subsequent action commands here.
{action_specification}
Observation Highlight: List the numerical ids of elements on the current webpage based on which you would issue your \
action. Also include elements on the current webpage you would attend to if you fail in the future and have to \
restore to this step. Don't include elements from the previous pages. Select elements at a higher hierarchical level \
if most their children nodes are considered crucial. Sort by relevance and potential values from high to low, and \
separate the ids with commas. E.g., `1321, 52, 756, 838`."""

JUDGE_TEMPLATE = """\
You are a seasoned web navigator. You now assess the value and risk of serveral web navigation actions based on the \
objective, the previous interaction history and the web's current state. Then, you select the action with the most \
value and least risk with which you would earn the maximum objective fulfillment reward in the future.

Adhere to the following output format:
{output_specifications}

Note that `branch` and `prune` are planning actions that will modify the PREVIOUS PLAN section and won't interact \
with the web environment."""

JUDGE_OUTPUT_SPECIFICATIONS = r"""Plan progress assessment: Review critically why the plans have not been fulfilled or the objective achieved. Justify your assessment with detailed evidence drawn from the objective, observations, and actions taken. Itemize the assessment using this format: `- plan [{plan_id}]\n\t[{step_ids_taken_for_this_milestone}] [{concrete_proof_from_observation}] [{why_milestone_a_not_successful}]\n\t[{step_ids_taken_for_this_milestone}] [{concrete_proof_from_observation}] [{why_milestone_b_not_successful}]\n\t...`.
Action assessment: Assess the value and risk of each action. Consider both the best-case and worst-case outcomes resulting from its implementation. Itemize the assessment using this format: `- action [action_id]: [action value, including but not limited to what outcomes you can expect by executing the action, or whether the note is of the most correct and comprehensive content] [action risk, including but not limited to whether the note/stop content is correct, and whether you can gather more information by continuing playing rather than ending the trial] [{best_case}] [{worst_case}]`.
Action selection: List the numerical id of your selected action here. You can only choose one action. E.g., `1`."""  # noqa: E501

JUDGE_CANDIDATES_HEADING = "ACTION CANDIDATES (numbered from 0)"


@lru_cache(maxsize=32)
def _read_override(path: str) -> str:
    return Path(path).read_text(encoding="utf-8").rstrip("\n")


def _fill(template: str, **values: str) -> str:
    # Plain replacement: specification texts hold literal braces.
    for key, value in values.items():
        template = template.replace("{" + key + "}", value)
    return template


def output_specifications(config) -> str:
    if config.output_spec_path:
        return _read_override(config.output_spec_path)
    action_spec = CANDIDATE_ACTIONS_SPEC if config.judge else SINGLE_ACTION_SPEC
    return _fill(OUTPUT_SPECIFICATIONS, action_specification=action_spec)


def instruction_block(config) -> str:
    """The template with output and action specifications filled in."""
    if config.template_path:
        template = _read_override(config.template_path)
    else:
        template = TEMPLATE_WITH_PLANNING if config.planning else TEMPLATE_WITHOUT_PLANNING
    specs = render_action_specs(config)
    return _fill(
        template,
        output_specifications=output_specifications(config),
        planning_action_specifications=specs.planning,
        navigation_action_specifications=specs.navigation,
    )


# ═══════════════════════════════════════════════════════════════════════════════
# Assembly
# ═══════════════════════════════════════════════════════════════════════════════


def _section(heading: str, body: str) -> str:
    return f"{heading}:\n{body}"


def information_sections(
    config,
    objective: str,
    plan: PlanTree,
    history: TrajectoryHistory,
    current_obs: str,
    notes=(),
) -> str:
    sections = [
        _section("OBJECTIVE", objective),
        _section("CURRENT STEP", str(history.next_index)),
    ]
    if config.planning:
        sections.append(_section("PREVIOUS PLANS", render(plan)))
    replay = render_history(history, plan, config)
    if replay:
        sections.append(_section("INTERACTION HISTORY" if config.history_replay else "PREVIOUS ACTION", replay))
    if notes:
        sections.append(_section("NOTES", "\n".join(f"- {note}" for note in notes)))
    sections.append(_section("CURRENT OBSERVATION", current_obs))
    return "\n\n".join(sections)


def assemble_prompt(
    config,
    objective: str,
    plan: PlanTree,
    history: TrajectoryHistory,
    current_obs: str,
    notes=(),
    notice: str | None = None,
) -> str:
    """Full actor prompt. ``notice`` is an error note appended on a corrective re-prompt."""
    prompt = instruction_block(config) + "\n\n" + information_sections(
        config, objective, plan, history, current_obs, notes
    )
    if notice:
        prompt += "\n\n" + _section("NOTICE", notice)
    return prompt


def judge_instruction_block(config) -> str:
    template = _read_override(config.judge_template_path) if config.judge_template_path else JUDGE_TEMPLATE
    return _fill(template, output_specifications=JUDGE_OUTPUT_SPECIFICATIONS)


def assemble_judge_prompt(config, context: str, candidates: list[Action]) -> str:
    """Judge prompt: instructions, the actor's information sections, then the numbered candidates."""
    numbered = "\n".join(f"{index}: {render_action(action)}" for index, action in enumerate(candidates))
    return "\n\n".join([judge_instruction_block(config), context, _section(JUDGE_CANDIDATES_HEADING, numbered)])


# ═══════════════════════════════════════════════════════════════════════════════
# Parsing
# ═══════════════════════════════════════════════════════════════════════════════


class UnparsableResponse(ValueError):
    """A completion holds no usable action command anywhere."""


SUMMARY = "interaction history summary"
DESCRIPTION = "observation description"
REASON = "reason"
ACTION = "action"
HIGHLIGHT = "observation highlight"
SELECTION = "action selection"

_HEADER_ALIASES = {
    "interaction history summary": SUMMARY,
    "observation description": DESCRIPTION,
    "reason for action": REASON,
    "reason": REASON,
    "action selection": SELECTION,
    "action": ACTION,
    "observation highlights": HIGHLIGHT,
    "observation highlight": HIGHLIGHT,
    "plan progress assessment": "plan progress assessment",
    "action assessment": "action assessment",
}
# Longer names first so "reason for action" wins over "reason".
_HEADER_RE = re.compile(
    r"^[\s#>*_]*(?P<header>"
    + "|".join(sorted(map(re.escape, _HEADER_ALIASES), key=len, reverse=True))
    + r")[\s*_]*(?::|$)[\s*_]*(?P<rest>.*)$",
    re.IGNORECASE,
)


def split_sections(text: str) -> dict[str, str]:
    """Map canonical header name to section body; text before any header is dropped."""
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in text.splitlines():
        match = _HEADER_RE.match(line)
        if match:
            name = _HEADER_ALIASES[re.sub(r"\s+", " ", match.group("header").lower())]
            current = sections.setdefault(name, [])
            rest = match.group("rest").strip()
            if rest:
                current.append(rest)
        elif current is not None:
            current.append(line)
    return {name: "\n".join(lines).strip() for name, lines in sections.items()}


# Prose sections; a command quoted there is never taken as the action.
_PROSE_SECTIONS = frozenset({SUMMARY, DESCRIPTION, REASON, HIGHLIGHT})


def _unsectioned_lines(text: str) -> list[str]:
    """Lines outside the prose sections, header lines included."""
    lines: list[str] = []
    current: str | None = None
    for line in text.splitlines():
        match = _HEADER_RE.match(line)
        if match:
            current = _HEADER_ALIASES[re.sub(r"\s+", " ", match.group("header").lower())]
        if current not in _PROSE_SECTIONS:
            lines.append(line)
    return lines


@dataclass(frozen=True)
class ParsedResponse:
    interaction_summary: str
    observation_description: str
    reason: str
    action_lines: tuple[str, ...]
    highlight_line: str
    actions: tuple[Action, ...]
    pivotal_ids: tuple[int, ...]

    @property
    def action(self) -> Action:
        return self.actions[0]


def _parse_lines(lines, space: ActionSpace | None) -> tuple[list[str], list[Action], list[DisallowedAction]]:
    found_lines: list[str] = []
    found: list[Action] = []
    disallowed: list[DisallowedAction] = []
    for line in lines:
        if not line.strip():
            continue
        try:
            action = parse_action(line, space)
        except DisallowedAction as e:
            disallowed.append(e)
            continue
        except ActionError:
            continue
        found_lines.append(line.strip())
        found.append(action)
    return found_lines, found, disallowed


def parse_response(text: str, space: ActionSpace | None = None) -> ParsedResponse:
    """Split a completion into its sections and parse the action command(s).

    Action lines are read from the Action section first; when that yields
    nothing, every line outside the summary, description, reason and
    highlight sections is tried.

    Raises:
        DisallowedAction: the only commands found are outside ``space``.
        UnparsableResponse: no action command anywhere.
    """
    sections = split_sections(text or "")
    action_section = sections.get(ACTION, "")
    lines, actions, disallowed = _parse_lines(action_section.splitlines(), space)
    if not actions:
        lines, actions, more_disallowed = _parse_lines(_unsectioned_lines(text or ""), space)
        disallowed += more_disallowed
    if not actions:
        if disallowed:
            raise disallowed[0]
        raise UnparsableResponse("UnparsableResponse: no valid action command found in the response")

    highlight = sections.get(HIGHLIGHT, "")
    return ParsedResponse(
        interaction_summary=sections.get(SUMMARY, ""),
        observation_description=sections.get(DESCRIPTION, ""),
        reason=sections.get(REASON, ""),
        action_lines=tuple(lines),
        highlight_line=highlight,
        actions=tuple(actions),
        pivotal_ids=tuple(parse_highlights(highlight)),
    )


def parse_judge_selection(text: str, candidate_count: int) -> int | None:
    """Index chosen in the Action selection section, or None if missing or out of range."""
    selection = split_sections(text or "").get(SELECTION, "")
    match = re.search(r"\d+", selection)
    if not match:
        return None
    index = int(match.group(0))
    return index if 0 <= index < candidate_count else None
