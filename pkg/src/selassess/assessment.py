"""Run orchestration: build prompt plans, execute them against a backend,
parse scores and evidence, and assemble a structured assessment run.

Per-principle failures are isolated: an unparseable response marks that
principle ParseFailed and the run carries on.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Optional, Union

from .cost_ledger import CostLedger, PriceTable
from .errors import EmptyRubric, RagStoreMissing
from .llm_client import (
    Backend,
    ChatMessage,
    CompletionRequest,
    RetryPolicy,
    Role,
    complete,
)
from .principles import Principle, Rubric
from .rag_store import DEFAULT_TOP_K, Embedder, HashingEmbedder, VectorStore
from .strategies import (
    ExpectedOutput,
    PromptPlan,
    PromptStep,
    SCORING_OUTPUTS,
    Strategy,
    build_rag,
    build_tot,
    build_zero_shot_1,
    build_zero_shot_2,
)
from .transcript import Transcript, render_dialogue


class ScoreScale(str, Enum):
    BINARY01 = "binary01"
    ZERO_TO_FIVE = "zero_to_five"
    MISSING = "missing"


@dataclass(frozen=True)
class Score:
    value: Optional[int]
    scale: ScoreScale

    def __post_init__(self):
        if self.scale is ScoreScale.BINARY01 and self.value not in (0, 1):
            raise ValueError("binary score must be 0 or 1")
        if self.scale is ScoreScale.ZERO_TO_FIVE and self.value not in range(6):
            raise ValueError("scale score must be in 0..5")
        if self.scale is ScoreScale.MISSING and self.value is not None:
            raise ValueError("missing score carries no value")

    @classmethod
    def binary(cls, value: int) -> "Score":
        return cls(value, ScoreScale.BINARY01)

    @classmethod
    def zero_to_five(cls, value: int) -> "Score":
        return cls(value, ScoreScale.ZERO_TO_FIVE)

    @classmethod
    def missing(cls) -> "Score":
        return cls(None, ScoreScale.MISSING)


class ParseFailureReason(str, Enum):
    NO_NUMBER = "no_number"
    OUT_OF_RANGE = "out_of_range"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class ParseFailure:
    reason: ParseFailureReason


_STANDALONE_INT_RE = re.compile(r"(?<![\w.])-?\d+(?![\w.])")
_SCORE_CUE_RE = re.compile(r"score\D*?(-?\d+)", re.IGNORECASE)


def _scale_range(scale: ScoreScale) -> tuple[int, int]:
    if scale is ScoreScale.BINARY01:
        return 0, 1
    return 0, 5


def _make_score(value: int, scale: ScoreScale) -> Score:
    if scale is ScoreScale.BINARY01:
        return Score.binary(value)
    return Score.zero_to_five(value)


def parse_score(text: str, scale: ScoreScale) -> Union[Score, ParseFailure]:
    """Extract a score from model output; total over arbitrary text.

    Extraction order: (1) the whole trimmed text is an integer; (2) the
    first integer after a 'score' cue; (3) the single distinct in-range
    standalone integer. Two distinct in-range integers with no cue are
    Ambiguous; integers present but none in range is OutOfRange.
    """
    lo, hi = _scale_range(scale)
    stripped = text.strip()
    if re.fullmatch(r"-?\d+", stripped):
        value = int(stripped)
        if lo <= value <= hi:
            return _make_score(value, scale)
        return ParseFailure(ParseFailureReason.OUT_OF_RANGE)
    cue = _SCORE_CUE_RE.search(text)
    if cue:
        value = int(cue.group(1))
        if lo <= value <= hi:
            return _make_score(value, scale)
        return ParseFailure(ParseFailureReason.OUT_OF_RANGE)
    values = [int(m.group()) for m in _STANDALONE_INT_RE.finditer(text)]
    if not values:
        return ParseFailure(ParseFailureReason.NO_NUMBER)
    in_range = [v for v in values if lo <= v <= hi]
    if not in_range:
        return ParseFailure(ParseFailureReason.OUT_OF_RANGE)
    distinct = sorted(set(in_range))
    if len(distinct) > 1:
        return ParseFailure(ParseFailureReason.AMBIGUOUS)
    return _make_score(distinct[0], scale)


def parse_tot_layer1(text: str, rubric: Rubric) -> dict[str, Score]:
    """Map each principle to the nearest 0-5 integer after its name.

    Matching is case-insensitive; principles without a match map to the
    Missing score (not an error).
    """
    low = text.lower()
    result: dict[str, Score] = {}
    for p in rubric.principles:
        pos = low.find(p.name.lower())
        if pos < 0:
            result[p.principle_id] = Score.missing()
            continue
        tail = text[pos + len(p.name):]
        score = Score.missing()
        for m in _STANDALONE_INT_RE.finditer(tail):
            value = int(m.group())
            if 0 <= value <= 5:
                score = Score.zero_to_five(value)
                break
        result[p.principle_id] = score
    return result


def extract_evidence(responses: list[tuple[PromptStep, str]]) -> str:
    """Join evidence-bearing step outputs in step order, blank-line
    separated; scoring-step outputs are excluded."""
    blocks = [text for step, text in responses
              if step.expected_output not in SCORING_OUTPUTS]
    return "\n\n".join(blocks)


class ParseStatus(str, Enum):
    PARSED = "parsed"
    PARSE_FAILED = "parse_failed"
    NO_INFORMATION = "no_information"


@dataclass(frozen=True)
class PrincipleAssessment:
    principle_id: str
    score: Score
    evidence: str
    raw_responses: tuple[tuple[str, str], ...]  # (step_id, response text)
    parse_status: ParseStatus
    # ToT only: the deep-layer 0/1 verdict, kept alongside the principal
    # 0-5 score
    binary_verdict: Optional[int] = None

    def __post_init__(self):
        if self.parse_status is ParseStatus.PARSED \
                and self.score.scale is ScoreScale.MISSING:
            raise ValueError("parsed assessment needs a non-missing score")
        if self.parse_status is ParseStatus.NO_INFORMATION \
                and self.score.scale is not ScoreScale.MISSING:
            raise ValueError("no-information assessment must have missing score")


@dataclass(frozen=True)
class AssessmentRun:
    run_id: str
    transcript_id: str
    strategy: Strategy
    model_id: str
    results: tuple[PrincipleAssessment, ...]
    total_cost: Decimal
    started_at: Optional[str] = None
    ended_at: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "transcript_id": self.transcript_id,
            "strategy": self.strategy.value,
            "model_id": self.model_id,
            "total_cost": str(self.total_cost),
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "results": [
                {
                    "principle_id": r.principle_id,
                    "score_value": r.score.value,
                    "score_scale": r.score.scale.value,
                    "evidence": r.evidence,
                    "parse_status": r.parse_status.value,
                    "binary_verdict": r.binary_verdict,
                    "raw_responses": [[sid, text] for sid, text in r.raw_responses],
                }
                for r in self.results
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True,
                          ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, obj: dict) -> "AssessmentRun":
        return cls(
            run_id=obj["run_id"],
            transcript_id=obj["transcript_id"],
            strategy=Strategy(obj["strategy"]),
            model_id=obj["model_id"],
            total_cost=Decimal(obj["total_cost"]),
            started_at=obj.get("started_at"),
            ended_at=obj.get("ended_at"),
            results=tuple(
                PrincipleAssessment(
                    principle_id=r["principle_id"],
                    score=Score(r["score_value"], ScoreScale(r["score_scale"])),
                    evidence=r["evidence"],
                    parse_status=ParseStatus(r["parse_status"]),
                    binary_verdict=r.get("binary_verdict"),
                    raw_responses=tuple((sid, text)
                                        for sid, text in r["raw_responses"]),
                )
                for r in obj["results"]
            ),
        )


def make_run_id(transcript_id: str, strategy: Strategy, model_id: str,
                rubric_id: str, extra: str = "") -> str:
    """Content-addressed run id; timestamps deliberately excluded so
    deterministic reruns dedupe."""
    key = "\x1f".join([transcript_id, strategy.value, model_id, rubric_id, extra])
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


@dataclass
class AssessConfig:
    top_k: int = DEFAULT_TOP_K
    parallelism: int = 4
    retry: Optional[RetryPolicy] = None
    include_system: bool = True


def _execute_plan(plan: PromptPlan, model_id: str, backend: Backend,
                  run_id: str, ledger: CostLedger, prices: PriceTable,
                  retry: Optional[RetryPolicy]) -> list[tuple[PromptStep, str]]:
    """Run a plan's steps in order, threading conversation history along
    each branch; every request lands in the cost ledger."""
    base: list[ChatMessage] = []
    if plan.system_prompt:
        base.append(ChatMessage(Role.SYSTEM, plan.system_prompt))
    conversations: dict[str, list[ChatMessage]] = {}
    root_branch = plan.steps[0].branch
    responses: list[tuple[PromptStep, str]] = []
    for step in plan.steps:
        if step.branch not in conversations:
            # non-root branches fork from the root conversation
            parent = conversations.get(root_branch, base)
            conversations[step.branch] = list(parent)
        convo = conversations[step.branch]
        if not step.feeds_forward:
            convo = list(base)
            conversations[step.branch] = convo
        convo.append(ChatMessage(Role.USER, step.user_text))
        tag = f"{plan.strategy.value}:{plan.principle_id or 'all'}:{step.step_id}"
        req = CompletionRequest(model_id=model_id, messages=tuple(convo),
                                request_tag=tag)
        resp = complete(req, backend, retry)
        ledger.record(run_id, tag, model_id, resp.usage, prices)
        convo.append(ChatMessage(Role.ASSISTANT, resp.text or "(no output)"))
        responses.append((step, resp.text))
    return responses


def _status_and_score(raw: Union[Score, ParseFailure],
                      text: str) -> tuple[ParseStatus, Score]:
    if isinstance(raw, Score):
        if raw.scale is ScoreScale.MISSING:
            return (ParseStatus.NO_INFORMATION if not text.strip()
                    else ParseStatus.PARSE_FAILED), Score.missing()
        return ParseStatus.PARSED, raw
    if not text.strip():
        return ParseStatus.NO_INFORMATION, Score.missing()
    return ParseStatus.PARSE_FAILED, Score.missing()


def _assess_principle_plan(plan: PromptPlan, principle: Principle,
                           scale: ScoreScale, model_id: str, backend: Backend,
                           run_id: str, ledger: CostLedger, prices: PriceTable,
                           retry: Optional[RetryPolicy]) -> PrincipleAssessment:
    responses = _execute_plan(plan, model_id, backend, run_id, ledger,
                              prices, retry)
    scoring_text = next(text for step, text in responses
                        if step.expected_output in SCORING_OUTPUTS)
    status, score = _status_and_score(parse_score(scoring_text, scale),
                                      scoring_text)
    return PrincipleAssessment(
        principle_id=principle.principle_id,
        score=score,
        evidence=extract_evidence(responses),
        raw_responses=tuple((s.step_id, t) for s, t in responses),
        parse_status=status,
    )


def _assess_tot(rubric: Rubric, dialogue: str, model_id: str,
                backend: Backend, run_id: str, ledger: CostLedger,
                prices: PriceTable, cfg: AssessConfig) -> list[PrincipleAssessment]:
    plan = build_tot(rubric, dialogue, include_system=cfg.include_system)
    responses = _execute_plan(plan, model_id, backend, run_id, ledger,
                              prices, cfg.retry)
    layer1_text = responses[0][1]
    layer1_scores = parse_tot_layer1(layer1_text, rubric)
    by_branch: dict[str, list[tuple[PromptStep, str]]] = {}
    for step, text in responses[1:]:
        by_branch.setdefault(step.branch, []).append((step, text))
    results = []
    for p in rubric.principles:
        branch = by_branch.get(p.principle_id, [])
        score = layer1_scores[p.principle_id]
        status, score = _status_and_score(score, layer1_text)
        layer3_text = next((t for s, t in branch
                            if s.expected_output is ExpectedOutput.BINARY_SCORE),
                           "")
        layer3 = parse_score(layer3_text, ScoreScale.BINARY01)
        results.append(PrincipleAssessment(
            principle_id=p.principle_id,
            score=score,
            evidence=extract_evidence(branch),
            raw_responses=tuple([("layer_1", layer1_text)]
                                + [(s.step_id, t) for s, t in branch]),
            parse_status=status,
            binary_verdict=layer3.value if isinstance(layer3, Score) else None,
        ))
    return results


def assess(transcript: Transcript, rubric: Rubric, strategy: Strategy,
           model_id: str, backend: Backend, *,
           ledger: CostLedger, prices: PriceTable,
           store: Optional[VectorStore] = None,
           embedder: Optional[Embedder] = None,
           config: Optional[AssessConfig] = None) -> AssessmentRun:
    """Evaluate one transcript with one strategy and model.

    RAG requires a populated store (transcript chunks plus principle
    texts); retrieval runs per principle before plan construction.
    """
    if not rubric.principles:
        raise EmptyRubric("rubric has no principles")
    cfg = config or AssessConfig()
    if strategy is Strategy.RAG and store is None:
        raise RagStoreMissing("RAG strategy requires a populated vector store")
    run_id = make_run_id(transcript.session_id, strategy, model_id,
                         rubric.rubric_id, extra=f"k={cfg.top_k}")
    started = None if backend.deterministic else _now()
    dialogue = render_dialogue(transcript)
    if strategy is Strategy.TOT:
        results = _assess_tot(rubric, dialogue, model_id, backend, run_id,
                              ledger, prices, cfg)
    else:
        emb = embedder or HashingEmbedder()
        plans: list[tuple[Principle, PromptPlan, ScoreScale]] = []
        for p in rubric.principles:
            if strategy is Strategy.ZERO_SHOT_1:
                plan = build_zero_shot_1(p, dialogue,
                                         include_system=cfg.include_system)
                scale = ScoreScale.BINARY01
            elif strategy is Strategy.ZERO_SHOT_2:
                plan = build_zero_shot_2(p, dialogue,
                                         include_system=cfg.include_system)
                scale = ScoreScale.ZERO_TO_FIVE
            else:
                hits = store.retrieve(f"{p.name} {p.description}", cfg.top_k,
                                      emb)
                context = [store.get(h.record_id).text for h in hits]
                plan = build_rag(p, dialogue, context,
                                 include_system=cfg.include_system)
                scale = ScoreScale.ZERO_TO_FIVE
            plans.append((p, plan, scale))
        with ThreadPoolExecutor(max_workers=max(1, cfg.parallelism)) as pool:
            futures = [
                pool.submit(_assess_principle_plan, plan, p, scale, model_id,
                            backend, run_id, ledger, prices, cfg.retry)
                for p, plan, scale in plans
            ]
            results = [f.result() for f in futures]
    return AssessmentRun(
        run_id=run_id,
        transcript_id=transcript.session_id,
        strategy=strategy,
        model_id=model_id,
        results=tuple(results),
        total_cost=ledger.total(run_id),
        started_at=started,
        ended_at=None if backend.deterministic else _now(),
    )


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()
