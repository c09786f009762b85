"""The agent loop.

Each step condenses the current page, assembles the prompt, asks the LLM,
parses the answer and applies the action:

- ``branch``/``prune`` edit the plan tree;
- ``note`` adds to the episode's notes;
- ``stop`` ends the episode with its answer;
- everything else goes to the environment.

Only the last group ever reaches the environment. A response that yields no
usable action gets one corrective re-prompt; if that fails too, the step is
recorded without an action and the episode moves on.
"""

import threading
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

from .actions import (
    Action,
    ActionError,
    ActionSpace,
    Branch,
    Note,
    Prune,
    Stop,
    is_environment_action,
    render_action,
)
from .ax_tree import AXTree, EmptyObservation, parse_ax_tree
from .client import LLMClient, LLMError
from .config import AgentConfig, config_snapshot
from .environment import Environment
from .memory import StepRecord, TrajectoryHistory, seal_step
from .obs_align import CondensedObservation, condense, estimate_tokens
from .output import warning
from .planning import PlanError, PlanTree, branch, check_branch, check_prune, new_tree, prune, to_dict
from .prompts import (
    ParsedResponse,
    UnparsableResponse,
    assemble_judge_prompt,
    assemble_prompt,
    information_sections,
    parse_judge_selection,
    parse_response,
)
from .trajectory import ENVIRONMENT_TERMINAL, MAX_STEPS, STOPPED, UNRECOVERABLE_ERROR, Trajectory


class CountingClient(LLMClient):
    """Per-episode wrapper that counts completions requested."""

    def __init__(self, inner: LLMClient):
        self.inner = inner
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.calls += 1
        return self.inner.complete(prompt)


@dataclass
class EpisodeState:
    config: AgentConfig
    task_id: str
    objective: str
    space: ActionSpace
    plan: PlanTree
    history: TrajectoryHistory
    dump: str
    notes: list[str] = field(default_factory=list)
    env_states: list[str | None] = field(default_factory=list)
    termination: str | None = None
    answer: str | None = None
    failure: str | None = None


def start_episode(config: AgentConfig, env: Environment, objective: str, task_id: str = "task") -> EpisodeState:
    """Reset ``env`` and seed the plan tree from ``objective``.

    Raises:
        InvalidObjective: if the objective is empty.
    """
    plan = new_tree(objective)
    observation = env.reset()
    state = EpisodeState(
        config=config,
        task_id=task_id,
        objective=objective,
        space=ActionSpace.from_config(config),
        plan=plan,
        history=TrajectoryHistory(objective),
        dump=observation.dump,
        env_states=[env.state_id],
    )
    if env.is_terminal:
        state.termination = ENVIRONMENT_TERMINAL
    return state


def parse_page(dump: str) -> AXTree | None:
    """Parse a page dump; a blank page is None."""
    try:
        return parse_ax_tree(dump)
    except EmptyObservation:
        return None


def check_plan_refs(plan: PlanTree, action: Action) -> None:
    """Raise InvalidPlanRef if a planning action points at an unusable plan."""
    if isinstance(action, Branch):
        check_branch(plan, action.parent_plan_id)
    elif isinstance(action, Prune):
        check_prune(plan, action.resume_plan_id)


def _usable_actions(state: EpisodeState, parsed: ParsedResponse) -> list[Action]:
    usable: list[Action] = []
    first_error: PlanError | None = None
    for action in parsed.actions:
        try:
            check_plan_refs(state.plan, action)
        except PlanError as e:
            first_error = first_error or e
            continue
        usable.append(action)
    if not usable:
        assert first_error is not None
        raise first_error
    return usable


def judge_select(context: str, candidates: Sequence[Action], llm: LLMClient, config: AgentConfig) -> Action:
    """Let a judge prompt pick one of several candidate actions.

    A single candidate is returned without asking. An unusable selection
    falls back to the first candidate.
    """
    if not candidates:
        raise ValueError("judge_select needs at least one candidate")
    if len(candidates) == 1:
        return candidates[0]
    answer = llm.complete(assemble_judge_prompt(config, context, list(candidates)))
    index = parse_judge_selection(answer, len(candidates))
    if index is None:
        warning(f"Judge selection unusable for {len(candidates)} candidates; using candidate 0")
        index = 0
    return candidates[index]


class _Answer(NamedTuple):
    prompt: str
    parsed: ParsedResponse | None
    candidates: list[Action]
    error: str | None
    corrective: bool


def _ask(state: EpisodeState, llm: LLMClient, observation: CondensedObservation) -> _Answer:
    """Prompt, and re-prompt once if the answer holds no usable action."""
    config = state.config
    notice = None
    corrective = False
    error: str | None = None
    prompt = ""
    for attempt in range(2):
        prompt = assemble_prompt(
            config, state.objective, state.plan, state.history, observation.text, state.notes, notice
        )
        completion = llm.complete(prompt)
        try:
            parsed = parse_response(completion, state.space)
            return _Answer(prompt, parsed, _usable_actions(state, parsed), None, corrective)
        except (UnparsableResponse, ActionError, PlanError) as e:
            error = str(e)
            if attempt == 0:
                warning(f"Step {state.history.next_index}: {error}; asking again")
                notice = (
                    f"Your previous response could not be used: {error}. Respond again in the required format "
                    "with an allowed action command."
                )
                corrective = True
    return _Answer(prompt, None, [], error, corrective)


def step(state: EpisodeState, env: Environment, llm: LLMClient) -> StepRecord:
    """Run one agent step and seal it into the history.

    Raises:
        LLMError: when the LLM client gives up; the caller decides how the
            episode ends.
    """
    if state.termination is not None:
        raise RuntimeError("episode already terminated")
    config = state.config
    step_index = state.history.next_index
    plan_id = state.plan.active_id

    tree = parse_page(state.dump)
    observation = condense(tree, config)
    prompt, parsed, candidates, error, corrective = _ask(state, llm, observation)

    action: Action | None = None
    if candidates:
        if config.judge and len(candidates) > 1:
            context = information_sections(
                config, state.objective, state.plan, state.history, observation.text, state.notes
            )
            action = judge_select(context, candidates, llm, config)
        else:
            action = candidates[0]

    if action is not None:
        error = _apply(state, env, action) or error

    record = seal_step(
        step_index=step_index,
        plan_id=plan_id,
        observation=observation.tree,
        observation_text=observation.text,
        reason=parsed.reason if parsed else "",
        action=action,
        pivotal_ids=parsed.pivotal_ids if parsed else (),
        obs_tokens=observation.token_estimate,
        prompt_tokens=estimate_tokens(prompt),
        state_id=env.state_id,
        corrective=corrective,
        error=error,
        candidates=tuple(candidates),
    )
    state.history.append(record)
    return record


def _apply(state: EpisodeState, env: Environment, action: Action) -> str | None:
    """Carry out ``action``; returns an error message if the environment failed."""
    if isinstance(action, Branch):
        branch(state.plan, action.parent_plan_id, action.intent)
    elif isinstance(action, Prune):
        prune(state.plan, action.resume_plan_id, action.reason)
    elif isinstance(action, Note):
        state.notes.append(action.content)
    elif isinstance(action, Stop):
        state.termination = STOPPED
        state.answer = action.answer
    elif is_environment_action(action):
        try:
            state.dump = env.execute(action)
            parse_page(state.dump)
        except Exception as e:
            state.termination = UNRECOVERABLE_ERROR
            state.failure = "environment"
            return f"environment failed on '{render_action(action)}': {e}"
        state.env_states.append(env.state_id)
        if env.is_terminal:
            state.termination = ENVIRONMENT_TERMINAL
    return None


def finish(state: EpisodeState, llm_calls: int) -> Trajectory:
    return Trajectory(
        task_id=state.task_id,
        objective=state.objective,
        config=config_snapshot(state.config),
        steps=list(state.history.steps),
        termination=state.termination,
        answer=state.answer,
        notes=list(state.notes),
        env_states=list(state.env_states),
        llm_calls=llm_calls,
        plan_tree=to_dict(state.plan),
        failure=state.failure,
    )


def run_episode(
    config: AgentConfig, env: Environment, llm: LLMClient, objective: str, task_id: str = "task"
) -> Trajectory:
    """Step until stop, a terminal page, an unrecoverable error or ``max_steps``."""
    counter = CountingClient(llm)
    state = start_episode(config, env, objective, task_id)
    while state.termination is None:
        if len(state.history) >= config.max_steps:
            state.termination = MAX_STEPS
            break
        try:
            step(state, env, counter)
        except LLMError as e:
            warning(str(e))
            state.termination = UNRECOVERABLE_ERROR
            state.failure = "llm"
    return finish(state, counter.calls)


@dataclass(frozen=True)
class Task:
    task_id: str
    objective: str


def run_batch(
    config: AgentConfig,
    tasks: Sequence[Task],
    make_env: Callable[[], Environment],
    make_llm: Callable[[], LLMClient],
    parallel: int = 1,
) -> list[Trajectory]:
    """Run independent episodes, ``parallel`` at a time. Results keep task order."""

    def run_one(task: Task) -> Trajectory:
        return run_episode(config, make_env(), make_llm(), task.objective, task.task_id)

    if parallel <= 1:
        return [run_one(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(run_one, tasks))
