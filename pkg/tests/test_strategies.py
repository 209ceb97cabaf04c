import pytest

from selassess.errors import MissingBinding, UnknownPlaceholder
from selassess.principles import default_rubric, render_criteria
from selassess.strategies import (
    EMPTY_CONTEXT_MARKER,
    ExpectedOutput,
    PrincipleScope,
    Template,
    build_rag,
    build_tot,
    build_zero_shot_1,
    build_zero_shot_2,
    load_templates,
    substitute,
)

RUBRIC = default_rubric()
PRAISE = RUBRIC.principles[0]
DIALOGUE = "Tutor: Hi!\nStudent: Hello."


class TestSubstitute:
    def test_single_substitution(self):
        t = Template("t", "score {Principle_Name}")
        assert substitute(t, {"Principle_Name": "Reacting to Errors"}) \
            == "score Reacting to Errors"

    def test_missing_binding(self):
        t = Template("t", "score {Principle_Name}")
        with pytest.raises(MissingBinding):
            substitute(t, {})

    def test_unknown_placeholder_rejected_at_validation(self):
        with pytest.raises(UnknownPlaceholder):
            Template("t", "body with {not_a_placeholder}")

    def test_non_placeholder_braces_preserved(self):
        t = Template("t", "set {Principle_Name} to {} or { x }")
        out = substitute(t, {"Principle_Name": "P"})
        assert out == "set P to {} or { x }"

    def test_required_placeholder_must_occur(self):
        with pytest.raises(ValueError):
            Template("t", "no slots", frozenset({"Principle_Name"}))


class TestZeroShot1:
    def test_two_steps(self):
        plan = build_zero_shot_1(PRAISE, DIALOGUE)
        assert len(plan.steps) == 2

    def test_scoring_golden_string(self):
        plan = build_zero_shot_1(PRAISE, DIALOGUE)
        assert "Please only return 0 or 1" in plan.steps[0].user_text

    def test_principle_name_substituted(self):
        plan = build_zero_shot_1(PRAISE, DIALOGUE)
        assert PRAISE.name in plan.steps[0].user_text

    def test_dialogue_included(self):
        plan = build_zero_shot_1(PRAISE, DIALOGUE)
        assert DIALOGUE in plan.steps[0].user_text

    def test_generator_feeds_forward(self):
        plan = build_zero_shot_1(PRAISE, DIALOGUE)
        assert plan.steps[1].feeds_forward is True
        assert "Please briefly explain why you give the score?" \
            in plan.steps[1].user_text

    def test_expected_outputs(self):
        plan = build_zero_shot_1(PRAISE, DIALOGUE)
        assert plan.steps[0].expected_output is ExpectedOutput.BINARY_SCORE
        assert plan.steps[1].expected_output is ExpectedOutput.EXPLANATION


class TestZeroShot2:
    def test_score_step_golden_string(self):
        plan = build_zero_shot_2(PRAISE, DIALOGUE)
        assert "from 0 to 5 based on the evaluation" in plan.steps[1].user_text
        assert "Give one point to each criteria met." in plan.steps[1].user_text

    def test_criteria_embedded(self):
        plan = build_zero_shot_2(PRAISE, DIALOGUE)
        assert render_criteria(PRAISE) in plan.steps[0].user_text

    def test_per_principle_scope(self):
        plan = build_zero_shot_2(PRAISE, DIALOGUE)
        assert plan.principle_scope is PrincipleScope.PER_PRINCIPLE

    def test_outputs_and_feed_forward(self):
        plan = build_zero_shot_2(PRAISE, DIALOGUE)
        assert plan.steps[0].expected_output is ExpectedOutput.IDENTIFICATION
        assert plan.steps[1].expected_output is ExpectedOutput.SCALE_SCORE
        assert plan.steps[1].feeds_forward is True


class TestToT:
    def test_eleven_steps_for_five_principles(self):
        plan = build_tot(RUBRIC, DIALOGUE)
        assert len(plan.steps) == 1 + 5 + 5

    def test_layer1_golden_string(self):
        plan = build_tot(RUBRIC, DIALOGUE)
        assert "score how well the tutor performed in the competency area above" \
            in plan.steps[0].user_text
        assert "Give one point for each of the following criteria" \
            in plan.steps[0].user_text

    def test_layer3_golden_string(self):
        plan = build_tot(RUBRIC, DIALOGUE)
        layer3 = [s for s in plan.steps if s.step_id.startswith("layer_3")]
        assert len(layer3) == 5
        for step in layer3:
            assert "Provide your evaluation in the form of a number" \
                in step.user_text
            assert "Please return 1 if the tutor correctly used the tutoring " \
                   "practice" in step.user_text

    def test_layer2_per_principle(self):
        plan = build_tot(RUBRIC, DIALOGUE)
        layer2 = [s for s in plan.steps if s.step_id.startswith("layer_2")]
        assert len(layer2) == 5
        for step in layer2:
            assert "is not met, and which criteria are met" in step.user_text

    def test_branches_feed_forward_from_root(self):
        plan = build_tot(RUBRIC, DIALOGUE)
        assert plan.steps[0].branch == "root"
        assert plan.steps[0].feeds_forward is False
        for step in plan.steps[1:]:
            assert step.feeds_forward is True
            assert step.branch != "root"

    def test_all_principles_scope(self):
        assert build_tot(RUBRIC, DIALOGUE).principle_scope \
            is PrincipleScope.ALL_PRINCIPLES

    def test_layer1_lists_every_principle(self):
        plan = build_tot(RUBRIC, DIALOGUE)
        for p in RUBRIC.principles:
            assert p.name in plan.steps[0].user_text


class TestRag:
    def test_generator_golden_string(self):
        plan = build_rag(PRAISE, DIALOGUE, ["chunk a"])
        assert "Please only return the evaluated score from 0 to 5." \
            in plan.steps[1].user_text

    def test_retriever_golden_strings(self):
        plan = build_rag(PRAISE, DIALOGUE, ["chunk a"])
        assert "Return the dialogues of the tutor as evidence" \
            in plan.steps[0].user_text
        assert "1. Competency 2. Each Criteria of the competency" \
            in plan.steps[0].user_text

    def test_empty_context_marker(self):
        plan = build_rag(PRAISE, DIALOGUE, [])
        assert EMPTY_CONTEXT_MARKER in plan.steps[0].user_text

    def test_all_chunks_appear_verbatim(self):
        chunks = [f"chunk text {i}" for i in range(4)]
        plan = build_rag(PRAISE, DIALOGUE, chunks)
        for chunk in chunks:
            assert chunk in plan.steps[0].user_text

    def test_criteria_in_retriever(self):
        plan = build_rag(PRAISE, DIALOGUE, ["c"])
        assert render_criteria(PRAISE) in plan.steps[0].user_text

    def test_outputs(self):
        plan = build_rag(PRAISE, DIALOGUE, ["c"])
        assert plan.steps[0].expected_output is ExpectedOutput.EVIDENCE_LIST
        assert plan.steps[1].expected_output is ExpectedOutput.SCALE_SCORE


class TestDeterminismAndScope:
    def test_identical_inputs_identical_plans(self):
        assert build_tot(RUBRIC, DIALOGUE) == build_tot(RUBRIC, DIALOGUE)
        assert build_rag(PRAISE, DIALOGUE, ["a"]) \
            == build_rag(PRAISE, DIALOGUE, ["a"])

    def test_scope_law_per_principle_strategies(self):
        for builder in (build_zero_shot_1, build_zero_shot_2):
            plans = [builder(p, DIALOGUE) for p in RUBRIC.principles]
            assert len(plans) == 5
            assert len({plan.principle_id for plan in plans}) == 5

    def test_system_prompt_can_be_disabled(self):
        plan = build_zero_shot_1(PRAISE, DIALOGUE, include_system=False)
        assert plan.system_prompt is None


class TestTemplateOverride:
    def test_directory_override(self, tmp_path):
        (tmp_path / "zero_shot_1.generator.txt").write_text(
            "Explain the score in one sentence.")
        templates = load_templates(tmp_path)
        plan = build_zero_shot_1(PRAISE, DIALOGUE, templates=templates)
        assert plan.steps[1].user_text == "Explain the score in one sentence."

    def test_unknown_files_ignored_others_default(self, tmp_path):
        templates = load_templates(tmp_path)
        assert build_tot(RUBRIC, DIALOGUE, templates=templates) \
            == build_tot(RUBRIC, DIALOGUE)
