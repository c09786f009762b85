"""Tests for lib.prompts - instruction blocks, prompt assembly and response parsing."""

import pytest

from lib.actions import ActionSpace, Branch, Click, DisallowedAction, Note, Stop, Type
from lib.config import PRESETS, AgentConfig
from lib.memory import StepRecord, TrajectoryHistory
from lib.planning import new_tree
from lib.prompts import (
    CANDIDATE_ACTIONS_SPEC,
    JUDGE_CANDIDATES_HEADING,
    SINGLE_ACTION_SPEC,
    UnparsableResponse,
    assemble_judge_prompt,
    assemble_prompt,
    instruction_block,
    parse_judge_selection,
    parse_response,
    split_sections,
)

ALIGNED = ActionSpace.from_config(AgentConfig())

FULL_RESPONSE = """\
Interaction history summary: Nothing yet.
Observation description: The projects page lists an Issues link [41].
Reason: The issues page is where the search box lives.
Action: click [41]
Observation Highlight: 41, 20"""


# ═══════════════════════════════════════════════════════════════════════════════
# Tests: instruction_block()
# ═══════════════════════════════════════════════════════════════════════════════


class TestInstructionBlock:
    def test_planning_template(self):
        block = instruction_block(AgentConfig())
        assert "If you think you should refine the plan, use the following actions:\nbranch [parent_plan_id]" in block
        assert SINGLE_ACTION_SPEC in block
        assert "{" + "navigation_action_specifications}" not in block

    def test_without_planning(self):
        block = instruction_block(AgentConfig(planning=False))
        assert "refine the plan" not in block
        assert "branch [" not in block

    def test_judge_asks_for_candidates(self):
        block = instruction_block(AgentConfig(judge=True))
        assert CANDIDATE_ACTIONS_SPEC in block
        assert SINGLE_ACTION_SPEC not in block

    def test_template_override(self, tmp_path):
        template = tmp_path / "template.txt"
        template.write_text("CUSTOM\n{navigation_action_specifications}\n", encoding="utf-8")
        block = instruction_block(AgentConfig(template_path=str(template)))
        assert block.startswith("CUSTOM\nclick [id]")

    def test_output_spec_override(self, tmp_path):
        spec = tmp_path / "output.txt"
        spec.write_text("Action: one command", encoding="utf-8")
        assert "Action: one command" in instruction_block(AgentConfig(output_spec_path=str(spec)))

    @pytest.mark.parametrize("preset", sorted(PRESETS))
    def test_every_preset_fills_all_placeholders(self, preset):
        block = instruction_block(AgentConfig(**PRESETS[preset]))
        for placeholder in ("{output_specifications}", "{navigation_action_specifications}"):
            assert placeholder not in block


# ═══════════════════════════════════════════════════════════════════════════════
# Tests: assemble_prompt()
# ═══════════════════════════════════════════════════════════════════════════════


class TestAssemblePrompt:
    def test_section_order(self):
        config = AgentConfig()
        prompt = assemble_prompt(config, "Find it", new_tree("Find it"), TrajectoryHistory("Find it"), "page", ["a"])
        headings = ["OBJECTIVE:", "CURRENT STEP:\n0", "PREVIOUS PLANS:", "NOTES:\n- a", "CURRENT OBSERVATION:\npage"]
        positions = [prompt.index(heading) for heading in headings]
        assert positions == sorted(positions)
        assert "INTERACTION HISTORY:" not in prompt

    def test_deterministic(self):
        config = AgentConfig()
        args = (config, "Find it", new_tree("Find it"), TrajectoryHistory("Find it"), "page")
        assert assemble_prompt(*args) == assemble_prompt(*args)

    def test_no_plans_without_planning(self):
        config = AgentConfig(planning=False)
        prompt = assemble_prompt(config, "x", new_tree("x"), TrajectoryHistory("x"), "page")
        assert "PREVIOUS PLANS" not in prompt

    def test_previous_action_without_history(self):
        config = AgentConfig(planning=False, history_replay=False)
        history = TrajectoryHistory("x")
        history.append(
            StepRecord(
                step_index=0, plan_id=0, observation=None, observation_text="", reason="r", action=Click(3)
            )
        )
        prompt = assemble_prompt(config, "x", new_tree("x"), history, "page")
        assert "PREVIOUS ACTION:\nclick [3]" in prompt
        assert "CURRENT STEP:\n1" in prompt

    def test_notice_appended(self):
        config = AgentConfig()
        prompt = assemble_prompt(config, "x", new_tree("x"), TrajectoryHistory("x"), "page", notice="bad action")
        assert prompt.endswith("NOTICE:\nbad action")

    def test_judge_prompt_numbers_candidates(self):
        prompt = assemble_judge_prompt(AgentConfig(judge=True), "OBJECTIVE:\nx", [Click(1), Stop("done")])
        assert prompt.endswith(f"{JUDGE_CANDIDATES_HEADING}:\n0: click [1]\n1: stop [done]")
        assert "Action selection:" in prompt


# ═══════════════════════════════════════════════════════════════════════════════
# Tests: parse_response() and friends
# ═══════════════════════════════════════════════════════════════════════════════


class TestParseResponse:
    def test_full_response(self):
        parsed = parse_response(FULL_RESPONSE, ALIGNED)
        assert parsed.action == Click(41)
        assert parsed.pivotal_ids == (41, 20)
        assert parsed.reason == "The issues page is where the search box lives."
        assert parsed.observation_description.startswith("The projects page")

    def test_markdown_headers(self):
        text = "**Reason:** because\n**Action:**\n`type [130] [feature] [1]`\n## Observation Highlight\n130"
        parsed = parse_response(text, ALIGNED)
        assert parsed.action == Type(130, "feature", True)
        assert parsed.pivotal_ids == (130,)
        assert parsed.reason == "because"

    def test_multiple_candidates(self):
        text = "Reason: r\nAction:\nbranch [0] [Look around]\nnote [seen]\nnonsense\nObservation Highlight: 1"
        parsed = parse_response(text, ALIGNED)
        assert parsed.actions == (Branch(0, "Look around"), Note("seen"))
        assert parsed.action_lines == ("branch [0] [Look around]", "note [seen]")

    def test_falls_back_to_any_line(self):
        parsed = parse_response("I looked at the page.\nstop [N/A]", ALIGNED)
        assert parsed.action == Stop("N/A")
        assert parsed.pivotal_ids == ()

    def test_fallback_ignores_commands_quoted_in_reason(self):
        text = "Reason: last time I tried\nclick [12]\nand it failed.\nObservation Highlight: 12"
        with pytest.raises(UnparsableResponse):
            parse_response(text, ALIGNED)

    def test_fallback_reads_lines_before_the_reason(self):
        text = "stop [N/A]\nReason: go_back would lose the form\ngo_back\nObservation description: click [3] is a button"
        parsed = parse_response(text, ALIGNED)
        assert parsed.actions == (Stop("N/A"),)

    def test_only_disallowed(self):
        with pytest.raises(DisallowedAction):
            parse_response("Action: scroll [down]", ALIGNED)

    def test_nothing_usable(self):
        with pytest.raises(UnparsableResponse):
            parse_response("I am not sure what to do.", ALIGNED)

    def test_empty(self):
        with pytest.raises(UnparsableResponse):
            parse_response("", ALIGNED)

    def test_reason_for_action_alias(self):
        assert split_sections("REASON FOR ACTION: x\ny")["reason"] == "x\ny"

    def test_text_before_headers_dropped(self):
        assert split_sections("preamble\nAction: go_back") == {"action": "go_back"}


class TestParseJudgeSelection:
    def test_selection(self):
        text = "Plan progress assessment: ok\nAction assessment:\n- action [0]: fine\nAction selection: `1`"
        assert parse_judge_selection(text, 2) == 1

    def test_out_of_range(self):
        assert parse_judge_selection("Action selection: 5", 2) is None

    def test_missing(self):
        assert parse_judge_selection("I prefer the first one.", 2) is None
