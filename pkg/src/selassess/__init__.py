"""Automatic assessment of tutors' social-emotional-learning practice from
tutoring-dialogue transcripts, driven by chat-completion models."""

__version__ = "0.1.0"

from .assessment import (  # noqa: F401
    AssessmentRun,
    ParseStatus,
    PrincipleAssessment,
    Score,
    ScoreScale,
    assess,
    parse_score,
)
from .cost_ledger import CostLedger, PriceTable, cost_of, cost_report  # noqa: F401
from .llm_client import MockBackend, OpenAICompatBackend, complete  # noqa: F401
from .principles import Rubric, default_rubric, load_rubric  # noqa: F401
from .rag_store import HashingEmbedder, VectorStore  # noqa: F401
from .strategies import Strategy  # noqa: F401
from .transcript import Transcript, chunk_turns, parse_transcript, render_dialogue  # noqa: F401
