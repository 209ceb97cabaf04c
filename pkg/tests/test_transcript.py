import pytest
from hypothesis import given, settings, strategies as st

from selassess.errors import (
    EmptyInput,
    InvalidChunkParams,
    MalformedLine,
    NoTutorTurns,
)
from selassess.transcript import (
    Speaker,
    Transcript,
    TranscriptFormat,
    Turn,
    chunk_turns,
    parse_transcript,
    render_dialogue,
    transcript_to_jsonl,
)


class TestParsePlain:
    def test_minimal_dialogue(self):
        t = parse_transcript("Tutor: Hi there!\nStudent: Hello.")
        assert len(t.turns) == 2
        assert t.turns[0].speaker == Speaker.tutor()
        assert t.turns[1].speaker == Speaker.student()
        assert t.turns[0].text == "Hi there!"

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            parse_transcript("")

    def test_whitespace_only_input(self):
        with pytest.raises(EmptyInput):
            parse_transcript("  \n \n")

    def test_no_tutor_turns(self):
        with pytest.raises(NoTutorTurns):
            parse_transcript("Student: hi\nStudent: help")

    def test_same_speaker_lines_stay_separate(self):
        t = parse_transcript("Tutor: one\nTutor: two")
        assert len(t.turns) == 2

    def test_malformed_line_reports_line_number(self):
        with pytest.raises(MalformedLine) as exc:
            parse_transcript("Tutor: ok\nno separator here")
        assert exc.value.line_number == 2

    def test_blank_lines_skipped(self):
        t = parse_transcript("Tutor: a\n\nStudent: b\n")
        assert len(t.turns) == 2

    def test_case_insensitive_speaker_roles(self):
        t = parse_transcript("TUTOR: a\nstudent: b")
        assert t.turns[0].speaker == Speaker.tutor()
        assert t.turns[1].speaker == Speaker.student()

    def test_other_speaker_label_preserved(self):
        t = parse_transcript("Teacher2: hi\nTutor: hello")
        assert t.turns[0].speaker == Speaker.other("Teacher2")

    def test_text_may_contain_separator(self):
        t = parse_transcript("Tutor: note: this counts")
        assert t.turns[0].text == "note: this counts"


class TestParseJsonl:
    def test_basic(self):
        raw = ('{"speaker": "tutor", "text": "hi", "timestamp": 1.5}\n'
               '{"speaker": "student", "text": "hello"}')
        t = parse_transcript(raw, TranscriptFormat.JSON_LINES)
        assert t.turns[0].speaker == Speaker.tutor()
        assert t.turns[0].timestamp == 1.5
        assert t.turns[1].timestamp is None

    def test_invalid_json_line(self):
        with pytest.raises(MalformedLine) as exc:
            parse_transcript('{"speaker": "tutor", "text": "hi"}\nnot json',
                             TranscriptFormat.JSON_LINES)
        assert exc.value.line_number == 2

    def test_missing_field(self):
        with pytest.raises(MalformedLine):
            parse_transcript('{"speaker": "tutor"}', TranscriptFormat.JSON_LINES)

    def test_decreasing_timestamps_rejected(self):
        raw = ('{"speaker": "tutor", "text": "a", "timestamp": 5}\n'
               '{"speaker": "student", "text": "b", "timestamp": 2}')
        with pytest.raises(ValueError):
            parse_transcript(raw, TranscriptFormat.JSON_LINES)

    def test_jsonl_round_trip(self):
        t = parse_transcript("Tutor: hi\nStudent: yo")
        again = parse_transcript(transcript_to_jsonl(t),
                                 TranscriptFormat.JSON_LINES,
                                 session_id=t.session_id)
        assert again == t


class TestRender:
    def test_inverse_of_parse(self):
        t = parse_transcript("Tutor: Hi there!\nStudent: Hello.")
        assert render_dialogue(t) == "Tutor: Hi there!\nStudent: Hello."

    def test_deterministic(self):
        t = parse_transcript("Tutor: a\nStudent: b")
        assert render_dialogue(t) == render_dialogue(t)

    def test_other_speaker_prefix(self):
        t = Transcript("s", (
            Turn(0, Speaker.other("Teacher2"), "hi"),
            Turn(1, Speaker.tutor(), "hello"),
        ))
        assert render_dialogue(t).splitlines()[0] == "Teacher2: hi"


def _transcript_of(n: int) -> Transcript:
    return Transcript("t", tuple(
        Turn(i, Speaker.tutor(), f"line {i}") for i in range(n)))


class TestChunking:
    def test_single_chunk(self):
        chunks = chunk_turns(_transcript_of(10), window=10, overlap=0)
        assert [(c.start, c.end) for c in chunks] == [(0, 9)]

    def test_overlap_stride(self):
        chunks = chunk_turns(_transcript_of(12), window=10, overlap=2)
        assert [(c.start, c.end) for c in chunks] == [(0, 9), (8, 11)]

    def test_invalid_params(self):
        with pytest.raises(InvalidChunkParams):
            chunk_turns(_transcript_of(5), window=3, overlap=3)

    def test_chunk_text_matches_rendered_range(self):
        t = parse_transcript("Tutor: a\nStudent: b\nTutor: c")
        chunks = chunk_turns(t, window=2, overlap=1)
        assert chunks[0].text == "Tutor: a\nStudent: b"


_speakers = st.sampled_from(
    [Speaker.tutor(), Speaker.student(), Speaker.other("Ms Lee"),
     Speaker.other("Coach")])
_texts = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Cc"),
                           blacklist_characters="\n"),
    min_size=1, max_size=40,
).map(str.strip).filter(bool)


@st.composite
def transcripts(draw, max_turns=200):
    n = draw(st.integers(min_value=1, max_value=max_turns))
    turns = [Turn(i, draw(_speakers), draw(_texts)) for i in range(n)]
    # guarantee the required tutor turn
    if not any(t.speaker == Speaker.tutor() for t in turns):
        turns[0] = Turn(0, Speaker.tutor(), turns[0].text)
    return Transcript("prop", tuple(turns))


class TestProperties:
    @settings(max_examples=100, deadline=None)
    @given(transcripts())
    def test_parse_render_round_trip(self, t):
        assert parse_transcript(render_dialogue(t), session_id="prop") == t

    @settings(max_examples=100, deadline=None)
    @given(transcripts(max_turns=60),
           st.integers(min_value=1, max_value=30),
           st.integers(min_value=0, max_value=29))
    def test_chunk_coverage(self, t, window, overlap):
        if overlap >= window:
            with pytest.raises(InvalidChunkParams):
                chunk_turns(t, window, overlap)
            return
        chunks = chunk_turns(t, window, overlap)
        covered = set()
        for c in chunks:
            covered.update(range(c.start, c.end + 1))
        assert covered == set(range(len(t.turns)))

    @settings(max_examples=50, deadline=None)
    @given(transcripts(max_turns=50))
    def test_no_lines_silently_dropped(self, t):
        raw = render_dialogue(t)
        non_blank = sum(1 for line in raw.splitlines() if line.strip())
        assert len(parse_transcript(raw).turns) == non_blank
