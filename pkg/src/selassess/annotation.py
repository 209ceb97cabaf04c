"""Human coding of model-generated assessments: correctness and
hallucination codes, an append-only record store, and aggregation into
per-(strategy, model) accuracy grids.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .assessment import AssessmentRun, ParseStatus
from .errors import DanglingRunReference, InconsistentNoInfo, InvalidCode

# -1 on either metric means no information was generated for the
# principle; the two metrics must agree on it.
CORRECTNESS_CODES = (-1, 0, 1)
HALLUCINATION_CODES = (-1.0, 0.0, 0.5, 1.0)

CODING_GUIDE = """\
Correctness (how accurate is the model's assessment of the principle?)
  -1  no information was generated for this principle
   0  the model's assessment is incorrect
   1  the model's assessment is correct

Hallucination (does the generated text deviate from the transcript?)
  -1  no information was generated for this principle
   0  no hallucination
  0.5 partial hallucination (hallucinated and faithful content coexist)
   1  completely hallucinated response

The two metrics are coded independently, except -1: if one metric is -1
the other must be -1 as well.
"""


@dataclass(frozen=True)
class AnnotationRecord:
    annotation_id: str
    run_id: str
    principle_id: str
    correctness: int
    hallucination: float
    coder_id: str
    notes: str = ""
    annotated_at: str = ""

    def to_dict(self) -> dict:
        return {
            "annotation_id": self.annotation_id,
            "run_id": self.run_id,
            "principle_id": self.principle_id,
            "correctness": self.correctness,
            "hallucination": self.hallucination,
            "coder_id": self.coder_id,
            "notes": self.notes,
            "annotated_at": self.annotated_at,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "AnnotationRecord":
        return cls(**obj)


def validate_annotation(a: AnnotationRecord) -> None:
    """Enforce the code sets and the shared -1 semantics."""
    if a.correctness not in CORRECTNESS_CODES:
        raise InvalidCode("correctness", a.correctness)
    if a.hallucination not in HALLUCINATION_CODES:
        raise InvalidCode("hallucination", a.hallucination)
    if (a.correctness == -1) != (a.hallucination == -1):
        raise InconsistentNoInfo(
            "-1 means 'nothing generated' and must be set on both metrics")


class AnnotationStore:
    """Append-only line-delimited record store with a resumable cursor
    per (run, coder)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, record: AnnotationRecord) -> None:
        validate_annotation(record)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")

    def records(self) -> list[AnnotationRecord]:
        if not self.path.exists():
            return []
        out = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                out.append(AnnotationRecord.from_dict(json.loads(line)))
        return out

    def _cursor_path(self, run_id: str, coder_id: str) -> Path:
        return self.path.with_suffix(f".{run_id}.{coder_id}.cursor")

    def cursor(self, run_id: str, coder_id: str) -> int:
        path = self._cursor_path(run_id, coder_id)
        if path.exists():
            return int(path.read_text().strip())
        return 0

    def set_cursor(self, run_id: str, coder_id: str, index: int) -> None:
        self._cursor_path(run_id, coder_id).write_text(str(index))


def _prompt_code(ask: Callable[[str], str], metric: str,
                 allowed: tuple, prefill: Optional[str],
                 out: Callable[[str], None]) -> float:
    allowed_repr = "/".join(str(a if a != int(a) else int(a))
                            if isinstance(a, float) else str(a)
                            for a in allowed)
    while True:
        raw = ask(f"{metric} [{allowed_repr}]"
                  + (f" (enter for {prefill})" if prefill else "") + ": ").strip()
        if not raw and prefill is not None:
            raw = prefill
        try:
            value = float(raw)
        except ValueError:
            out(f"not a valid {metric} code: {raw!r}")
            continue
        if value in allowed:
            return value
        out(f"not a valid {metric} code: {raw!r}")


def annotate_interactive(run: AssessmentRun, coder_id: str,
                         store: AnnotationStore,
                         criteria_by_principle: Optional[dict[str, str]] = None,
                         transcript_text: str = "",
                         ask: Callable[[str], str] = input,
                         out: Callable[[str], None] = print) -> list[AnnotationRecord]:
    """Walk a coder through one run, collecting both codes per principle.

    Resumes from the stored cursor; NoInformation principles pre-fill
    (-1, -1) pending coder confirmation. All records are validated before
    they are persisted.
    """
    start = store.cursor(run.run_id, coder_id)
    written: list[AnnotationRecord] = []
    if transcript_text:
        out("=== Transcript ===")
        out(transcript_text)
    out(CODING_GUIDE)
    for i, result in enumerate(run.results):
        if i < start:
            continue
        out(f"--- Principle {result.principle_id} "
            f"({i + 1}/{len(run.results)}) ---")
        if criteria_by_principle and result.principle_id in criteria_by_principle:
            out(criteria_by_principle[result.principle_id])
        out(f"Model score: {result.score.value} ({result.score.scale.value}, "
            f"{result.parse_status.value})")
        out(f"Model evidence: {result.evidence or '(none)'}")
        no_info = result.parse_status is ParseStatus.NO_INFORMATION
        prefill = "-1" if no_info else None
        try:
            correctness = int(_prompt_code(ask, "correctness",
                                           CORRECTNESS_CODES, prefill, out))
            hallucination = float(_prompt_code(ask, "hallucination",
                                               HALLUCINATION_CODES, prefill,
                                               out))
            notes = ask("notes (optional): ").strip()
        except (EOFError, KeyboardInterrupt):
            # partial progress stays persisted; the cursor lets the coder
            # resume at this principle
            store.set_cursor(run.run_id, coder_id, i)
            raise
        record = AnnotationRecord(
            annotation_id=f"{run.run_id}.{result.principle_id}.{coder_id}",
            run_id=run.run_id,
            principle_id=result.principle_id,
            correctness=correctness,
            hallucination=hallucination,
            coder_id=coder_id,
            notes=notes,
            annotated_at=_dt.datetime.now(_dt.timezone.utc).isoformat(),
        )
        store.append(record)
        store.set_cursor(run.run_id, coder_id, i + 1)
        written.append(record)
    return written


@dataclass(frozen=True)
class AccuracyReport:
    # (strategy, model_id) -> {(correctness, hallucination): count}
    cells: dict[tuple[str, str], dict[tuple[int, float], int]]
    desired_count: int  # (correctness=1, hallucination=0) pairs
    total_annotations: int
    coverage: float  # annotated fraction of (run, principle) pairs


def aggregate(annotations: list[AnnotationRecord],
              runs: list[AssessmentRun]) -> AccuracyReport:
    """Tally annotations into (strategy, model) cells; order-independent."""
    runs_by_id = {r.run_id: r for r in runs}
    cells: dict[tuple[str, str], dict[tuple[int, float], int]] = {}
    desired = 0
    for a in annotations:
        validate_annotation(a)
        run = runs_by_id.get(a.run_id)
        if run is None:
            raise DanglingRunReference(a.run_id)
        key = (run.strategy.value, run.model_id)
        pair = (a.correctness, float(a.hallucination))
        cell = cells.setdefault(key, {})
        cell[pair] = cell.get(pair, 0) + 1
        if a.correctness == 1 and a.hallucination == 0:
            desired += 1
    total_pairs = sum(len(r.results) for r in runs)
    annotated_pairs = len({(a.run_id, a.principle_id) for a in annotations})
    return AccuracyReport(
        cells=cells,
        desired_count=desired,
        total_annotations=len(annotations),
        coverage=annotated_pairs / total_pairs if total_pairs else 0.0,
    )


def render_accuracy_report(report: AccuracyReport) -> str:
    """Markdown grid of correctness x hallucination counts per
    (strategy, model); the (1, 0) cell is the desired outcome."""
    lines = []
    if not report.cells:
        lines.append("No annotations.")
    for (strategy, model) in sorted(report.cells):
        cell = report.cells[(strategy, model)]
        lines.append(f"### {strategy} / {model}")
        header = "| correctness \\ hallucination | " + " | ".join(
            str(h if h != int(h) else int(h)) for h in HALLUCINATION_CODES) + " |"
        lines.append(header)
        lines.append("|" + "---|" * (len(HALLUCINATION_CODES) + 1))
        for c in CORRECTNESS_CODES:
            row = [str(cell.get((c, float(h)), 0)) for h in HALLUCINATION_CODES]
            lines.append(f"| {c} | " + " | ".join(row) + " |")
        lines.append("")
    lines.append(f"Desired (correct, no hallucination): {report.desired_count} "
                 f"of {report.total_annotations}")
    lines.append(f"Coverage: {report.coverage:.1%}")
    return "\n".join(lines)


def report_to_matrix(report: AccuracyReport) -> list[dict]:
    """Machine-readable cell list keyed by strategy/model/codes."""
    rows = []
    for (strategy, model) in sorted(report.cells):
        for (c, h), count in sorted(report.cells[(strategy, model)].items()):
            rows.append({"strategy": strategy, "model_id": model,
                         "correctness": c, "hallucination": h,
                         "count": count})
    return rows
