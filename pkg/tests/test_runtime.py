"""Tests for lib.runtime - the agent loop end to end against replay pages."""

import json
import re

import pytest
from conftest import DEMO, DEMO_OBJECTIVE

from lib.actions import Click, Note, Stop
from lib.client import ScriptedClient
from lib.config import AgentConfig
from lib.environment import Environment, Observation, load_replay_environment, replay_environment_from_dict
from lib.planning import InvalidObjective
from lib.runtime import Task, judge_select, run_batch, run_episode, start_episode, step
from lib.trajectory import (
    ENVIRONMENT_TERMINAL,
    MAX_STEPS,
    STOPPED,
    UNRECOVERABLE_ERROR,
    dumps_records,
)

HOME = "RootWebArea [1] 'Home'\n\tlink [7] 'Issues'\n\tlink [8] 'Wiki'"
ISSUES = "RootWebArea [2] 'Issues'\n\tlink [9] 'Back'"
WIKI = "RootWebArea [3] 'Wiki'\n\tlink [9] 'Back'"


def _small_env(terminal_wiki=False):
    return replay_environment_from_dict(
        {
            "start": "home",
            "states": [
                {
                    "id": "home",
                    "ax_dump": HOME,
                    "transitions": [{"action": "click [7]", "to": "issues"}, {"action": "click [8]", "to": "wiki"}],
                },
                {"id": "issues", "ax_dump": ISSUES, "transitions": [{"action": "click [9]", "to": "home"}]},
                {"id": "wiki", "ax_dump": WIKI, "terminal": terminal_wiki, "reward": 1.0 if terminal_wiki else None},
            ],
        }
    )


def _demo_env():
    return load_replay_environment(DEMO / "snapshots.json")


def _demo_llm():
    return ScriptedClient.from_file(DEMO / "completions.json")


def _respond(action, highlight=""):
    return f"Reason: scripted\nAction: {action}\nObservation Highlight: {highlight}"


# ═══════════════════════════════════════════════════════════════════════════════
# Tests: the demo episode
# ═══════════════════════════════════════════════════════════════════════════════


class TestDemoEpisode:
    @pytest.fixture
    def run(self):
        env, llm = _demo_env(), _demo_llm()
        trajectory = run_episode(AgentConfig(), env, llm, DEMO_OBJECTIVE, "gitlab-174")
        return trajectory, env, llm

    def test_stops_with_answer(self, run):
        trajectory, _, llm = run
        assert trajectory.termination == STOPPED
        assert trajectory.answer.startswith("Yes, the latest updated issue")
        assert len(trajectory.steps) == 8
        assert trajectory.llm_calls == 8
        assert llm.remaining == 0

    def test_environment_path(self, run):
        trajectory, env, _ = run
        assert trajectory.env_states == ["projects", "issues", "results", "issue"]
        assert env.visited == ["projects", "issues", "results", "issue"]

    def test_plan_ids_per_step(self, run):
        trajectory, _, _ = run
        assert [s.plan_id for s in trajectory.steps] == [0, 1, 1, 2, 2, 3, 3, 3]
        nodes = {node["plan_id"]: node for node in trajectory.plan_tree["nodes"]}
        assert nodes[3]["parent"] == 1
        assert trajectory.plan_tree["active_id"] == 3

    def test_notes(self, run):
        trajectory, _, _ = run
        assert trajectory.notes == ['Issue #18 "Add a feature flag for dark mode" is closed.']

    def test_history_scoped_to_active_plan(self, run):
        _, _, llm = run
        # Step 4 runs under plan [2], which so far holds only step 3.
        assert "<step_3_interaction>" in llm.prompts[4]
        assert "<step_1_interaction>" not in llm.prompts[4]
        # Step 5 opens plan [3]; nothing has been done under it yet.
        assert "INTERACTION HISTORY:" not in llm.prompts[5]
        assert "<step_5_interaction>" in llm.prompts[6]

    def test_replayed_history_has_no_ids(self, run):
        _, _, llm = run
        history = llm.prompts[4].split("INTERACTION HISTORY:")[1].split("CURRENT OBSERVATION:")[0]
        assert "searchbox 'Search or filter results...'" in history
        assert "[130]" not in history.replace("type [130] [feature] [1]", "")

    def test_notes_in_final_prompt(self, run):
        _, _, llm = run
        assert 'NOTES:\n- Issue #18 "Add a feature flag for dark mode" is closed.' in llm.prompts[7]

    def test_deterministic(self):
        first = run_episode(AgentConfig(), _demo_env(), _demo_llm(), DEMO_OBJECTIVE, "gitlab-174")
        second = run_episode(AgentConfig(), _demo_env(), _demo_llm(), DEMO_OBJECTIVE, "gitlab-174")
        assert dumps_records(first.to_records()) == dumps_records(second.to_records())

    def test_plan_and_note_steps_leave_environment_path_unchanged(self, run):
        full, _, _ = run
        completions = json.loads((DEMO / "completions.json").read_text(encoding="utf-8"))["completions"]
        navigation_only = [
            text for text in completions if not re.search(r"^Action: (branch|prune|note) ", text, re.MULTILINE)
        ]
        assert len(navigation_only) == 4

        env = _demo_env()
        trajectory = run_episode(AgentConfig(), env, ScriptedClient(navigation_only), DEMO_OBJECTIVE, "gitlab-174")
        assert trajectory.termination == STOPPED
        assert trajectory.env_states == full.env_states
        assert env.visited == ["projects", "issues", "results", "issue"]

    def test_max_steps(self):
        trajectory = run_episode(AgentConfig(max_steps=1), _demo_env(), _demo_llm(), DEMO_OBJECTIVE)
        assert trajectory.termination == MAX_STEPS
        assert len(trajectory.steps) == 1


# ═══════════════════════════════════════════════════════════════════════════════
# Tests: single steps
# ═══════════════════════════════════════════════════════════════════════════════


class TestStep:
    def test_stop_not_applicable(self):
        env = _small_env()
        trajectory = run_episode(AgentConfig(), env, ScriptedClient([_respond("stop [N/A]")]), "Find the wiki")
        assert trajectory.termination == STOPPED
        assert trajectory.answer == "N/A"
        assert env.visited == ["home"]

    def test_branch_does_not_touch_environment(self):
        env = _small_env()
        state = start_episode(AgentConfig(), env, "Find the wiki")
        record = step(state, env, ScriptedClient([_respond("branch [0] [Open the wiki]", "8")]))
        assert env.visited == ["home"]
        assert state.plan.active_id == 1
        assert record.plan_id == 0
        assert record.pivotal_ids == (8,)
        assert state.env_states == ["home"]

    def test_corrective_reprompt(self):
        env = _small_env()
        llm = ScriptedClient(["I am not sure.", _respond("click [7]")])
        state = start_episode(AgentConfig(), env, "Find issues")
        record = step(state, env, llm)
        assert record.corrective
        assert record.action == Click(7)
        assert record.error is None
        assert "NOTICE:" in llm.prompts[1]
        assert "UnparsableResponse" in llm.prompts[1]
        assert env.state_id == "issues"

    def test_disallowed_action_reprompted(self):
        env = _small_env()
        llm = ScriptedClient([_respond("scroll [down]"), _respond("click [8]")])
        state = start_episode(AgentConfig(), env, "Find the wiki")
        record = step(state, env, llm)
        assert record.action == Click(8)
        assert "DisallowedAction" in llm.prompts[1]

    def test_invalid_plan_ref_reprompted(self):
        env = _small_env()
        llm = ScriptedClient([_respond("prune [5] [dead end]"), _respond("note [seen]")])
        state = start_episode(AgentConfig(), env, "Find the wiki")
        record = step(state, env, llm)
        assert record.action == Note("seen")
        assert "InvalidPlanRef" in llm.prompts[1]
        assert state.notes == ["seen"]

    def test_second_failure_records_empty_step(self):
        env = _small_env()
        llm = ScriptedClient(["nothing", "still nothing", _respond("stop [done]")])
        trajectory = run_episode(AgentConfig(), env, llm, "Find the wiki")
        first = trajectory.steps[0]
        assert first.action is None
        assert first.corrective
        assert "UnparsableResponse" in first.error
        assert trajectory.termination == STOPPED
        assert trajectory.llm_calls == 3

    def test_environment_terminal(self):
        trajectory = run_episode(
            AgentConfig(), _small_env(terminal_wiki=True), ScriptedClient([_respond("click [8]")]), "Find the wiki"
        )
        assert trajectory.termination == ENVIRONMENT_TERMINAL
        assert trajectory.env_states == ["home", "wiki"]

    def test_llm_failure_ends_episode(self):
        trajectory = run_episode(AgentConfig(), _small_env(), ScriptedClient([]), "Find the wiki")
        assert trajectory.termination == UNRECOVERABLE_ERROR
        assert trajectory.failure == "llm"
        assert trajectory.steps == []

    def test_environment_failure_ends_episode(self):
        class Broken(Environment):
            def reset(self):
                return Observation(HOME)

            def execute(self, action):
                raise ConnectionError("browser crashed")

            @property
            def is_terminal(self):
                return False

        trajectory = run_episode(AgentConfig(), Broken(), ScriptedClient([_respond("click [7]")]), "Find issues")
        assert trajectory.termination == UNRECOVERABLE_ERROR
        assert trajectory.failure == "environment"
        assert "browser crashed" in trajectory.steps[0].error

    def test_empty_objective(self):
        with pytest.raises(InvalidObjective):
            run_episode(AgentConfig(), _small_env(), ScriptedClient([]), "  ")

    def test_blank_page_is_empty_observation(self):
        env = replay_environment_from_dict({"start": "a", "states": [{"id": "a", "ax_dump": ""}]})
        llm = ScriptedClient([_respond("stop [N/A]")])
        trajectory = run_episode(AgentConfig(), env, llm, "anything")
        assert trajectory.steps[0].obs_tokens == 0
        assert "CURRENT OBSERVATION:\n" in llm.prompts[0]


# ═══════════════════════════════════════════════════════════════════════════════
# Tests: judge
# ═══════════════════════════════════════════════════════════════════════════════


class TestJudge:
    def test_judge_picks_among_candidates(self):
        config = AgentConfig(judge=True)
        llm = ScriptedClient(
            [
                "Reason: two options\nAction:\nclick [7]\nclick [8]\nObservation Highlight: 7, 8",
                "Action selection: 1",
                "Reason: on the wiki\nAction:\nnote [wiki reached]\ngo_back",
                "Action selection: 0",
                "Reason: done\nAction:\nstop [wiki]\nstop [N/A]",
                "Action selection: 0",
            ]
        )
        env = _small_env()
        trajectory = run_episode(config, env, llm, "Find the wiki")
        assert trajectory.termination == STOPPED
        assert trajectory.answer == "wiki"
        assert len(trajectory.steps) == 3
        assert trajectory.llm_calls == 6
        assert env.visited == ["home", "wiki"]
        assert trajectory.steps[0].candidates == (Click(7), Click(8))
        assert "ACTION CANDIDATES (numbered from 0):\n0: click [7]\n1: click [8]" in llm.prompts[1]

    def test_single_candidate_skips_judge(self):
        llm = ScriptedClient([_respond("stop [x]")])
        trajectory = run_episode(AgentConfig(judge=True), _small_env(), llm, "Find the wiki")
        assert trajectory.llm_calls == 1

    def test_unusable_selection_falls_back(self):
        llm = ScriptedClient(["Action selection: 9"])
        assert judge_select("ctx", [Stop("a"), Stop("b")], llm, AgentConfig(judge=True)) == Stop("a")

    def test_no_candidates(self):
        with pytest.raises(ValueError):
            judge_select("ctx", [], ScriptedClient([]), AgentConfig())


# ═══════════════════════════════════════════════════════════════════════════════
# Tests: run_batch()
# ═══════════════════════════════════════════════════════════════════════════════


class TestRunBatch:
    @pytest.mark.parametrize("parallel", [1, 3])
    def test_results_keep_task_order(self, parallel):
        tasks = [Task(f"t{index}", f"objective {index}") for index in range(5)]
        trajectories = run_batch(
            AgentConfig(), tasks, _small_env, lambda: ScriptedClient([], fallback=_respond("stop [N/A]")), parallel
        )
        assert [t.task_id for t in trajectories] == [task.task_id for task in tasks]
        assert all(t.termination == STOPPED for t in trajectories)

    def test_episodes_are_independent(self):
        tasks = [Task("a", DEMO_OBJECTIVE), Task("b", DEMO_OBJECTIVE)]
        trajectories = run_batch(AgentConfig(), tasks, _demo_env, _demo_llm, parallel=2)
        records = [dumps_records(t.to_records()).replace('"task_id": "b"', '"task_id": "a"') for t in trajectories]
        assert records[0] == records[1]
