"""Parsing, rendering and chunking of tutoring-session transcripts.

Two serializations are supported: PlainDialogue ("Speaker: utterance" per
line) and JsonLines (one JSON object per line with speaker/text/timestamp).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import EmptyInput, InvalidChunkParams, MalformedLine, NoTutorTurns


class TranscriptFormat(str, Enum):
    PLAIN_DIALOGUE = "plain"
    JSON_LINES = "jsonl"


class SpeakerKind(str, Enum):
    TUTOR = "tutor"
    STUDENT = "student"
    OTHER = "other"


@dataclass(frozen=True)
class Speaker:
    kind: SpeakerKind
    label: str  # display label; "Tutor"/"Student" for the known roles

    @classmethod
    def tutor(cls) -> "Speaker":
        return cls(SpeakerKind.TUTOR, "Tutor")

    @classmethod
    def student(cls) -> "Speaker":
        return cls(SpeakerKind.STUDENT, "Student")

    @classmethod
    def other(cls, label: str) -> "Speaker":
        return cls(SpeakerKind.OTHER, label)

    @classmethod
    def from_label(cls, label: str) -> "Speaker":
        low = label.strip().lower()
        if low == "tutor":
            return cls.tutor()
        if low == "student":
            return cls.student()
        return cls.other(label.strip())


@dataclass(frozen=True)
class Turn:
    index: int
    speaker: Speaker
    text: str
    timestamp: Optional[float] = None

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("turn index must be non-negative")
        if not self.text.strip():
            raise ValueError("turn text must be non-empty after trimming")
        if self.timestamp is not None and self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")


@dataclass(frozen=True)
class Transcript:
    session_id: str
    turns: tuple[Turn, ...]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.session_id:
            raise ValueError("session_id must be non-empty")
        if not self.turns:
            raise ValueError("transcript must have at least one turn")
        for i, turn in enumerate(self.turns):
            if turn.index != i:
                raise ValueError("turn indices must be consecutive from 0")
        stamps = [t.timestamp for t in self.turns if t.timestamp is not None]
        if any(b < a for a, b in zip(stamps, stamps[1:])):
            raise ValueError("timestamps must be non-decreasing")
        if not any(t.speaker.kind is SpeakerKind.TUTOR for t in self.turns):
            raise NoTutorTurns(f"transcript {self.session_id} has no Tutor turns")


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    transcript_id: str
    start: int
    end: int  # inclusive
    text: str

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("chunk start must be <= end")


def parse_transcript(
    raw: str,
    format: TranscriptFormat = TranscriptFormat.PLAIN_DIALOGUE,
    session_id: str = "session",
    metadata: Optional[dict[str, str]] = None,
) -> Transcript:
    """Parse raw text into a validated Transcript.

    Consecutive lines by the same speaker stay separate turns. Blank lines
    are skipped; any other unparseable line raises MalformedLine.
    """
    if not raw.strip():
        raise EmptyInput("transcript input is empty")
    turns: list[Turn] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        if format is TranscriptFormat.PLAIN_DIALOGUE:
            turns.append(_parse_plain_line(line, lineno, len(turns)))
        else:
            turns.append(_parse_jsonl_line(line, lineno, len(turns)))
    if not turns:
        raise EmptyInput("transcript input is empty")
    return Transcript(session_id=session_id, turns=tuple(turns),
                      metadata=dict(metadata or {}))


def _parse_plain_line(line: str, lineno: int, index: int) -> Turn:
    sep = line.find(": ")
    if sep <= 0:
        raise MalformedLine(lineno, "expected '<speaker>: <text>'")
    speaker = Speaker.from_label(line[:sep])
    text = line[sep + 2:].strip()
    if not text:
        raise MalformedLine(lineno, "empty utterance text")
    return Turn(index=index, speaker=speaker, text=text)


def _parse_jsonl_line(line: str, lineno: int, index: int) -> Turn:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLine(lineno, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict) or "speaker" not in obj or "text" not in obj:
        raise MalformedLine(lineno, "object must have 'speaker' and 'text'")
    text = str(obj["text"]).strip()
    if not text:
        raise MalformedLine(lineno, "empty utterance text")
    timestamp = obj.get("timestamp")
    if timestamp is not None:
        try:
            timestamp = float(timestamp)
        except (TypeError, ValueError):
            raise MalformedLine(lineno, "timestamp must be a number") from None
        if timestamp < 0:
            raise MalformedLine(lineno, "timestamp must be non-negative")
    return Turn(index=index, speaker=Speaker.from_label(str(obj["speaker"])),
                text=text, timestamp=timestamp)


def render_dialogue(t: Transcript) -> str:
    """Canonical one-line-per-turn rendering, '<SpeakerLabel>: <text>'.

    Deterministic; parse_transcript(render_dialogue(t)) round-trips up to
    timestamps and metadata.
    """
    return "\n".join(f"{turn.speaker.label}: {turn.text}" for turn in t.turns)


def render_range(t: Transcript, start: int, end: int) -> str:
    """render_dialogue restricted to turn indices [start, end] inclusive."""
    return "\n".join(f"{turn.speaker.label}: {turn.text}"
                     for turn in t.turns[start:end + 1])


def chunk_turns(t: Transcript, window: int = 10, overlap: int = 2) -> list[Chunk]:
    """Split a transcript into overlapping windows of turns.

    Chunk i covers [i*stride, i*stride + window - 1] clipped to the last
    turn, where stride = window - overlap. Every turn index lands in at
    least one chunk.
    """
    if window < 1 or overlap < 0 or overlap >= window:
        raise InvalidChunkParams(
            f"require 0 <= overlap < window, got window={window} overlap={overlap}")
    n = len(t.turns)
    stride = window - overlap
    chunks: list[Chunk] = []
    i = 0
    while True:
        start = i * stride
        end = min(start + window - 1, n - 1)
        chunks.append(Chunk(
            chunk_id=f"{t.session_id}#{start}-{end}",
            transcript_id=t.session_id,
            start=start,
            end=end,
            text=render_range(t, start, end),
        ))
        if end == n - 1:
            return chunks
        i += 1


def transcript_to_jsonl(t: Transcript) -> str:
    """Lossless JsonLines serialization of the turns."""
    lines = []
    for turn in t.turns:
        obj: dict = {"speaker": turn.speaker.label, "text": turn.text}
        if turn.timestamp is not None:
            obj["timestamp"] = turn.timestamp
        lines.append(json.dumps(obj, ensure_ascii=False))
    return "\n".join(lines)
