"""The five social-emotional-learning principles and their scoring rubric.

Ships a built-in default rubric. The per-criterion texts are editable
defaults derived from each principle's description; projects with their own
training rubric should override them via a JSON rubric file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import RubricFileNotFound, RubricParseError, ValidationError

# Criteria count is pinned to 5 whenever the 0-5 one-point-per-criterion
# scale is in play.
SCALE_CRITERIA_COUNT = 5


@dataclass(frozen=True)
class Criterion:
    criterion_id: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValidationError("criterion text must be non-empty")


@dataclass(frozen=True)
class Principle:
    principle_id: str
    name: str
    description: str
    criteria: tuple[Criterion, ...]
    desired_example: Optional[str] = None
    undesired_example: Optional[str] = None

    def __post_init__(self):
        if not self.criteria:
            raise ValidationError(f"principle {self.name!r} has no criteria")
        if len(self.criteria) > 10:
            raise ValidationError(f"principle {self.name!r} has too many criteria")
        ids = [c.criterion_id for c in self.criteria]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate criterion ids in {self.name!r}")


@dataclass(frozen=True)
class Rubric:
    rubric_id: str
    principles: tuple[Principle, ...]

    def __post_init__(self):
        if not self.principles:
            raise ValidationError("rubric must have at least one principle")
        names = [p.name for p in self.principles]
        if len(set(names)) != len(names):
            raise ValidationError("principle names must be pairwise distinct")


def _principle(pid: str, name: str, description: str, criteria: list[str],
               desired: Optional[str] = None,
               undesired: Optional[str] = None) -> Principle:
    return Principle(
        principle_id=pid,
        name=name,
        description=description,
        criteria=tuple(Criterion(f"{pid}.{i}", text)
                       for i, text in enumerate(criteria, start=1)),
        desired_example=desired,
        undesired_example=undesired,
    )


def default_rubric() -> Rubric:
    """The built-in five-principle rubric.

    Descriptions are the published one-line principle summaries; the five
    criteria under each principle are editable defaults paraphrased from
    those summaries.
    """
    return Rubric(
        rubric_id="sel-default",
        principles=(
            _principle(
                "praise", "Giving Effective Praise",
                "Praising students for putting forth effort by giving "
                "process-focused praise instead of praising students for "
                "getting an answer correct or getting a good grade",
                [
                    "The tutor praises the student's effort rather than innate ability.",
                    "Praise is specific to what the student did in their process.",
                    "Praise is sincere and proportionate to the accomplishment.",
                    "Praise is given promptly after the praiseworthy behavior.",
                    "The tutor avoids praising only correct answers or grades.",
                ],
                desired="You are almost there! I am proud of how you are "
                        "persevering through and striving to solve the problem. "
                        "Keep going!",
                undesired="You are so smart and almost got the problem correct.",
            ),
            _principle(
                "mindset", "Supporting a Growth Mindset",
                "Supporting a growth mindset instead of a fixed mindset by "
                "encouraging students on the learning process and not "
                "necessarily just getting the answer",
                [
                    "The tutor frames ability as something that grows with practice.",
                    "The tutor encourages the student's learning process, not just results.",
                    "Struggle and mistakes are framed as part of learning.",
                    "The tutor avoids fixed-ability language such as labeling students smart or not.",
                    "The tutor encourages persistence when the student is challenged.",
                ],
            ),
            _principle(
                "errors", "Reacting to Errors",
                "Responding to students when students make errors or mistakes, "
                "by not directly calling attention to the error but guiding "
                "students to realize and correct the error themselves.",
                [
                    "The tutor does not directly announce that the student's answer is wrong.",
                    "The tutor asks guiding questions that lead the student toward the error.",
                    "The student is given the chance to find and correct the error themselves.",
                    "The tutor stays patient and supportive while the student reworks the problem.",
                    "The tutor confirms understanding once the student corrects the error.",
                ],
            ),
            _principle(
                "selftalk", "Responding to Negative Self-Talk",
                "Responding to students positively when students engage in "
                "negative self-talk, such as saying \"I can't do this\" or "
                "\"this is too hard for me\" by validating a student's feelings "
                "but encouraging and building their self-efficacy",
                [
                    "The tutor notices and responds when the student puts themselves down.",
                    "The tutor validates the student's feelings instead of dismissing them.",
                    "The tutor responds positively rather than with criticism.",
                    "The tutor builds the student's self-efficacy with encouragement.",
                    "The tutor points to concrete progress the student has already made.",
                ],
            ),
            _principle(
                "motivation", "Using Motivational Strategies",
                "Rewarding students by using intrinsic and extrinsic motivation "
                "strategies, such as rewarding students for working hard by "
                "giving them time at the end of a session to discuss their "
                "interests",
                [
                    "The tutor uses rewards to recognize the student's hard work.",
                    "The tutor connects the material to the student's own interests.",
                    "The tutor uses intrinsic motivators such as curiosity or mastery.",
                    "The tutor uses appropriate extrinsic motivators such as earned free time.",
                    "Motivational moves are tied to effort, not only to correct answers.",
                ],
            ),
        ),
    )


def render_criteria(p: Principle) -> str:
    """Numbered criteria list for the {Principle_Criteria} prompt slot."""
    return "\n".join(f"{i}. {c.text}" for i, c in enumerate(p.criteria, start=1))


def rubric_to_dict(r: Rubric) -> dict:
    return {
        "rubric_id": r.rubric_id,
        "principles": [
            {
                "principle_id": p.principle_id,
                "name": p.name,
                "description": p.description,
                "criteria": [c.text for c in p.criteria],
                **({"desired_example": p.desired_example}
                   if p.desired_example is not None else {}),
                **({"undesired_example": p.undesired_example}
                   if p.undesired_example is not None else {}),
            }
            for p in r.principles
        ],
    }


def rubric_from_dict(obj: dict, *, require_scale_count: bool = True) -> Rubric:
    try:
        principles = []
        for i, p in enumerate(obj["principles"]):
            criteria = list(p["criteria"])
            if require_scale_count and len(criteria) != SCALE_CRITERIA_COUNT:
                raise ValidationError(
                    f"principle {p.get('name', i)!r} must have exactly "
                    f"{SCALE_CRITERIA_COUNT} criteria for the 0-5 scale, "
                    f"got {len(criteria)}")
            principles.append(_principle(
                p.get("principle_id", f"p{i}"),
                p["name"], p.get("description", ""),
                criteria,
                desired=p.get("desired_example"),
                undesired=p.get("undesired_example"),
            ))
        return Rubric(rubric_id=obj.get("rubric_id", "rubric"),
                      principles=tuple(principles))
    except (KeyError, TypeError) as exc:
        raise RubricParseError("rubric", f"missing or malformed field: {exc}") from exc


def save_rubric(r: Rubric, path: str | Path) -> None:
    Path(path).write_text(json.dumps(rubric_to_dict(r), indent=2,
                                     ensure_ascii=False) + "\n",
                          encoding="utf-8")


def load_rubric(path: str | Path) -> Rubric:
    """Load and validate a rubric from a JSON file."""
    path = Path(path)
    if not path.exists():
        raise RubricFileNotFound(str(path))
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RubricParseError(f"{path}:{exc.lineno}", exc.msg) from exc
    if not isinstance(obj, dict):
        raise RubricParseError(str(path), "top level must be an object")
    return rubric_from_dict(obj)
