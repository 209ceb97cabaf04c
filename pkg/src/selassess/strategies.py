"""Prompt plans for the four assessment strategies.

Each builder turns a principle (or the whole rubric) plus the rendered
dialogue into an ordered sequence of fully-rendered model calls. The
instruction texts are fixed templates with {Placeholder_Name} slots; the
scoring wording in them is load-bearing and covered by golden tests.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from .errors import MissingBinding, UnknownPlaceholder
from .principles import Principle, Rubric, render_criteria

ALLOWED_PLACEHOLDERS = frozenset({
    "Principle_Name",
    "Principle_Criteria",
    "Social_Emotional_Learning_Principles",
    "rubric",
    "Dialogue",
    "Retrieved_Context",
})

_PLACEHOLDER_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

DEFAULT_SYSTEM_PROMPT = "You are an expert evaluator of math tutoring practice."
TRANSCRIPT_FENCE = "--- TRANSCRIPT ---"
EMPTY_CONTEXT_MARKER = "(no retrieved context)"


class Strategy(str, Enum):
    ZERO_SHOT_1 = "zero_shot_1"
    ZERO_SHOT_2 = "zero_shot_2"
    TOT = "tot"
    RAG = "rag"


class PrincipleScope(str, Enum):
    PER_PRINCIPLE = "per_principle"
    ALL_PRINCIPLES = "all_principles"


class ExpectedOutput(str, Enum):
    BINARY_SCORE = "binary_score"
    SCALE_SCORE = "scale_score"
    IDENTIFICATION = "identification"
    EXPLANATION = "explanation"
    EVIDENCE_LIST = "evidence_list"


SCORING_OUTPUTS = (ExpectedOutput.BINARY_SCORE, ExpectedOutput.SCALE_SCORE)


@dataclass(frozen=True)
class Template:
    template_id: str
    body: str
    required_placeholders: frozenset[str] = frozenset()

    def __post_init__(self):
        found = set(_PLACEHOLDER_RE.findall(self.body))
        for name in found:
            if name not in ALLOWED_PLACEHOLDERS:
                raise UnknownPlaceholder(name)
        for name in self.required_placeholders:
            if name not in found:
                raise ValueError(
                    f"template {self.template_id}: required placeholder "
                    f"{{{name}}} absent from body")


def substitute(t: Template, bindings: dict[str, str]) -> str:
    """Replace every {Name} slot in the template body from bindings."""
    def repl(match: re.Match) -> str:
        name = match.group(1)
        if name not in bindings:
            raise MissingBinding(name)
        return bindings[name]

    return _PLACEHOLDER_RE.sub(repl, t.body)


# Instruction texts per strategy step. Substituted placeholders aside,
# the wording is fixed; golden tests pin the scoring phrases.
DEFAULT_TEMPLATES: dict[str, Template] = {
    t.template_id: t for t in [
        Template(
            "zero_shot_1.scoring",
            "Given a dialogue of a tutoring session, please evaluate the "
            "Tutor based on specific best teaching practice within "
            "{Principle_Name} Please return 1 if the tutor correctly used "
            "the tutoring practice. Return 0 if the tutor incorrectly used "
            "the tutoring practice. Please only return 0 or 1",
            frozenset({"Principle_Name"}),
        ),
        Template(
            "zero_shot_1.generator",
            "Please briefly explain why you give the score?",
        ),
        Template(
            "zero_shot_2.identification",
            "Given the following evaluation criteria {Principle_Criteria} "
            "Please identify if there is any tutor's incorrect use of the "
            "tutoring strategy {Principle_Name} based on the criteria above. "
            "If there is incorrect response, return the incorrect response "
            "by tutor as evidence in the dialogue and list the criteria not "
            "met. If the tutor used teaching strategy correctly, please "
            "return based on the criteria above, which ones are correct and "
            "also return evidence from the dialogue.",
            frozenset({"Principle_Criteria", "Principle_Name"}),
        ),
        Template(
            "zero_shot_2.score_generation",
            "Return the score of {Principle_Name} from 0 to 5 based on the "
            "evaluation. Give one point to each criteria met.",
            frozenset({"Principle_Name"}),
        ),
        Template(
            "tot.layer_1",
            "{Social_Emotional_Learning_Principles} For the following "
            "transcript between a tutor and a middle school student, score "
            "how well the tutor performed in the competency area above. "
            "Give one point for each of the following criteria or skills "
            "being met by the tutor. For example, if a tutor did not "
            "demonstrate any evidence of a given skill or criteria give a "
            "score of 0. If a tutor met all the given criteria, give a "
            "score of 5. Please only return the evaluated score from 0 to 5.",
            frozenset({"Social_Emotional_Learning_Principles"}),
        ),
        Template(
            "tot.layer_2",
            "For each criteria listed, please indicate which from the "
            "current {Social_Emotional_Learning_Principles} is not met, and "
            "which criteria are met.",
            frozenset({"Social_Emotional_Learning_Principles"}),
        ),
        Template(
            "tot.layer_3",
            "Given a dialogue of a tutoring session between a tutor and a "
            "middle school student, please evaluate the Tutor based on "
            "specific given criteria : {rubric}, Please return 1 if the "
            "tutor correctly used the tutoring practice. Return 0 if the "
            "tutor incorrectly used the tutoring practice. Provide your "
            "evaluation in the form of a number. Please also list evidence "
            "why you provide the evaluation.",
            frozenset({"rubric"}),
        ),
        Template(
            "rag.retriever",
            "Retrieved context:\n{Retrieved_Context}\n\n"
            "Evaluation criteria for {Principle_Name}:\n{Principle_Criteria}\n\n"
            "For each criteria and rubric above, please identify all of "
            "tutor's correct and incorrect use of the practice above. "
            "Return the dialogues of the tutor as evidence in the format: "
            "1. Competency 2. Each Criteria of the competency 3. Sentences "
            "that tutor said within the dialogue serves as evidence.",
            frozenset({"Retrieved_Context", "Principle_Name",
                       "Principle_Criteria"}),
        ),
        Template(
            "rag.generator",
            "Return the score of {Principle_Name} from 0 to 5 based on the "
            "evaluation. Give one point to each criteria met. Please only "
            "return the evaluated score from 0 to 5.",
            frozenset({"Principle_Name"}),
        ),
    ]
}


def load_templates(directory: str | Path) -> dict[str, Template]:
    """Override defaults from a directory of <template_id>.txt files."""
    templates = dict(DEFAULT_TEMPLATES)
    for path in sorted(Path(directory).glob("*.txt")):
        template_id = path.stem
        required = (DEFAULT_TEMPLATES[template_id].required_placeholders
                    if template_id in DEFAULT_TEMPLATES else frozenset())
        templates[template_id] = Template(
            template_id, path.read_text(encoding="utf-8").strip(), required)
    return templates


@dataclass(frozen=True)
class PromptStep:
    step_id: str
    template_id: str
    user_text: str
    expected_output: ExpectedOutput
    feeds_forward: bool
    # conversation branch this step belongs to; steps in one branch share
    # history, branches fork from the root steps
    branch: str = "main"


@dataclass(frozen=True)
class PromptPlan:
    strategy: Strategy
    principle_scope: PrincipleScope
    steps: tuple[PromptStep, ...]
    system_prompt: Optional[str] = DEFAULT_SYSTEM_PROMPT
    principle_id: Optional[str] = None  # set for per-principle plans

    def __post_init__(self):
        if not self.steps:
            raise ValueError("plan must have at least one step")
        if not any(s.expected_output in SCORING_OUTPUTS for s in self.steps):
            raise ValueError("plan must contain a scoring step")


def _with_dialogue(instruction: str, dialogue_text: str) -> str:
    return (f"{instruction}\n\n{TRANSCRIPT_FENCE}\n{dialogue_text}\n"
            f"{TRANSCRIPT_FENCE}")


def _tmpl(templates: Optional[dict[str, Template]], template_id: str) -> Template:
    return (templates or DEFAULT_TEMPLATES)[template_id]


def build_zero_shot_1(principle: Principle, dialogue_text: str,
                      templates: Optional[dict[str, Template]] = None,
                      include_system: bool = True) -> PromptPlan:
    """Binary scoring of the whole dialogue, then a free-text explanation."""
    scoring = substitute(_tmpl(templates, "zero_shot_1.scoring"),
                         {"Principle_Name": principle.name})
    generator = substitute(_tmpl(templates, "zero_shot_1.generator"), {})
    return PromptPlan(
        strategy=Strategy.ZERO_SHOT_1,
        principle_scope=PrincipleScope.PER_PRINCIPLE,
        principle_id=principle.principle_id,
        system_prompt=DEFAULT_SYSTEM_PROMPT if include_system else None,
        steps=(
            PromptStep("scoring", "zero_shot_1.scoring",
                       _with_dialogue(scoring, dialogue_text),
                       ExpectedOutput.BINARY_SCORE, feeds_forward=False),
            PromptStep("generator", "zero_shot_1.generator", generator,
                       ExpectedOutput.EXPLANATION, feeds_forward=True),
        ),
    )


def build_zero_shot_2(principle: Principle, dialogue_text: str,
                      templates: Optional[dict[str, Template]] = None,
                      include_system: bool = True) -> PromptPlan:
    """Identify incorrect practice against the criteria, then score 0-5."""
    identification = substitute(
        _tmpl(templates, "zero_shot_2.identification"),
        {"Principle_Criteria": render_criteria(principle),
         "Principle_Name": principle.name})
    score_gen = substitute(_tmpl(templates, "zero_shot_2.score_generation"),
                           {"Principle_Name": principle.name})
    return PromptPlan(
        strategy=Strategy.ZERO_SHOT_2,
        principle_scope=PrincipleScope.PER_PRINCIPLE,
        principle_id=principle.principle_id,
        system_prompt=DEFAULT_SYSTEM_PROMPT if include_system else None,
        steps=(
            PromptStep("identification", "zero_shot_2.identification",
                       _with_dialogue(identification, dialogue_text),
                       ExpectedOutput.IDENTIFICATION, feeds_forward=False),
            PromptStep("score_generation", "zero_shot_2.score_generation",
                       score_gen, ExpectedOutput.SCALE_SCORE,
                       feeds_forward=True),
        ),
    )


def _principles_block(rubric: Rubric) -> str:
    parts = []
    for p in rubric.principles:
        parts.append(f"{p.name}: {p.description}\n{render_criteria(p)}")
    return "\n\n".join(parts)


def _principle_block(p: Principle) -> str:
    return f"{p.name}\n{render_criteria(p)}"


def build_tot(rubric: Rubric, dialogue_text: str,
              templates: Optional[dict[str, Template]] = None,
              include_system: bool = True) -> PromptPlan:
    """Layered evaluation: one all-principles scoring root, then per
    principle a criteria analysis and a binary judgment with evidence.

    Each principle's branch continues from the root answer.
    """
    layer1 = substitute(
        _tmpl(templates, "tot.layer_1"),
        {"Social_Emotional_Learning_Principles": _principles_block(rubric)})
    steps = [PromptStep("layer_1", "tot.layer_1",
                        _with_dialogue(layer1, dialogue_text),
                        ExpectedOutput.SCALE_SCORE, feeds_forward=False,
                        branch="root")]
    for p in rubric.principles:
        layer2 = substitute(
            _tmpl(templates, "tot.layer_2"),
            {"Social_Emotional_Learning_Principles": _principle_block(p)})
        layer3 = substitute(_tmpl(templates, "tot.layer_3"),
                            {"rubric": render_criteria(p)})
        steps.append(PromptStep(f"layer_2.{p.principle_id}", "tot.layer_2",
                                layer2, ExpectedOutput.IDENTIFICATION,
                                feeds_forward=True, branch=p.principle_id))
        steps.append(PromptStep(f"layer_3.{p.principle_id}", "tot.layer_3",
                                layer3, ExpectedOutput.BINARY_SCORE,
                                feeds_forward=True, branch=p.principle_id))
    return PromptPlan(
        strategy=Strategy.TOT,
        principle_scope=PrincipleScope.ALL_PRINCIPLES,
        system_prompt=DEFAULT_SYSTEM_PROMPT if include_system else None,
        steps=tuple(steps),
    )


def build_rag(principle: Principle, dialogue_text: str,
              retrieved_context: list[str],
              templates: Optional[dict[str, Template]] = None,
              include_system: bool = True) -> PromptPlan:
    """Evidence retrieval over the provided context, then 0-5 scoring."""
    context_block = ("\n\n".join(retrieved_context) if retrieved_context
                     else EMPTY_CONTEXT_MARKER)
    retriever = substitute(
        _tmpl(templates, "rag.retriever"),
        {"Retrieved_Context": context_block,
         "Principle_Name": principle.name,
         "Principle_Criteria": render_criteria(principle)})
    generator = substitute(_tmpl(templates, "rag.generator"),
                           {"Principle_Name": principle.name})
    return PromptPlan(
        strategy=Strategy.RAG,
        principle_scope=PrincipleScope.PER_PRINCIPLE,
        principle_id=principle.principle_id,
        system_prompt=DEFAULT_SYSTEM_PROMPT if include_system else None,
        steps=(
            PromptStep("retriever", "rag.retriever",
                       _with_dialogue(retriever, dialogue_text),
                       ExpectedOutput.EVIDENCE_LIST, feeds_forward=False),
            PromptStep("generator", "rag.generator", generator,
                       ExpectedOutput.SCALE_SCORE, feeds_forward=True),
        ),
    )
