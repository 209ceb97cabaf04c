"""Command-line entry point: ingest transcripts, run assessments, annotate
results, and render cost/accuracy reports.

Exit codes: 0 full success, 1 partial failure, 2 configuration error.
Every command runs fully offline with --backend mock and the hashing
embedder.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .annotation import (
    AnnotationStore,
    aggregate,
    annotate_interactive,
    render_accuracy_report,
    report_to_matrix,
)
from .assessment import AssessConfig, AssessmentRun, assess
from .cost_ledger import CostLedger, PriceTable, cost_report, render_cost_report
from .errors import SelAssessError
from .llm_client import MockBackend, OpenAICompatBackend
from .principles import default_rubric, load_rubric, render_criteria
from .rag_store import (
    EmbeddingRecord,
    HashingEmbedder,
    SourceKind,
    VectorStore,
    embed_texts,
)
from .strategies import Strategy
from .transcript import (
    Transcript,
    TranscriptFormat,
    chunk_turns,
    parse_transcript,
    transcript_to_jsonl,
)

STRATEGY_ORDER = (Strategy.ZERO_SHOT_1, Strategy.ZERO_SHOT_2, Strategy.TOT,
                  Strategy.RAG)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def _fail_config(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_CONFIG)


def _read_transcript(path: Path, fmt: TranscriptFormat) -> Transcript:
    return parse_transcript(path.read_text(encoding="utf-8"), fmt,
                            session_id=path.stem)


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Assess tutors' social-emotional-learning practice from transcripts."""


@main.command()
@click.option("--transcript", "transcripts", multiple=True, required=True,
              type=click.Path(path_type=Path), help="Transcript file(s).")
@click.option("--format", "fmt", type=click.Choice(["plain", "jsonl"]),
              default="plain", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("out"),
              show_default=True)
def ingest(transcripts: tuple[Path, ...], fmt: str, out: Path) -> None:
    """Parse and validate transcripts; persist them as JsonLines."""
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    for path in transcripts:
        try:
            t = _read_transcript(path, TranscriptFormat(fmt))
        except (SelAssessError, OSError) as exc:
            click.echo(f"{path}: {exc}", err=True)
            failures += 1
            continue
        target = out / f"{t.session_id}.jsonl"
        target.write_text(transcript_to_jsonl(t) + "\n", encoding="utf-8")
        click.echo(f"{path} -> {target} ({len(t.turns)} turns)")
    sys.exit(EXIT_PARTIAL if failures else EXIT_OK)


def _build_store(transcript: Transcript, rubric, embedder,
                 window: int, overlap: int) -> VectorStore:
    chunks = chunk_turns(transcript, window=window, overlap=overlap)
    texts = [c.text for c in chunks]
    principle_texts = [f"{p.name}: {p.description}\n{render_criteria(p)}"
                       for p in rubric.principles]
    vectors = embed_texts(texts + principle_texts, embedder)
    store = VectorStore(embedder.dimension, embedder.embedder_id)
    records = [
        EmbeddingRecord(c.chunk_id, SourceKind.TRANSCRIPT_CHUNK, c.chunk_id,
                        c.text, tuple(v))
        for c, v in zip(chunks, vectors)
    ] + [
        EmbeddingRecord(f"principle:{p.principle_id}",
                        SourceKind.PRINCIPLE_TEXT, p.principle_id, text,
                        tuple(v))
        for p, text, v in zip(rubric.principles, principle_texts,
                              vectors[len(chunks):])
    ]
    store.index(records)
    return store


@main.command(name="assess")
@click.option("--transcript", "transcripts", multiple=True, required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["plain", "jsonl"]),
              default="plain", show_default=True)
@click.option("--rubric", "rubric_path", type=click.Path(path_type=Path),
              default=None, help="Rubric JSON; defaults to the built-in rubric.")
@click.option("--strategy", type=click.Choice(
    [s.value for s in STRATEGY_ORDER] + ["all"]), default="all",
    show_default=True)
@click.option("--model", "model_id", default="gpt-3.5-turbo", show_default=True)
@click.option("--backend", "backend_kind", type=click.Choice(["real", "mock"]),
              default="real", show_default=True)
@click.option("--mock-script", type=click.Path(path_type=Path), default=None,
              help="Mock script JSON (required with --backend mock).")
@click.option("--embedder", "embedder_kind",
              type=click.Choice(["hashing", "remote"]), default="hashing",
              show_default=True)
@click.option("--window", default=10, show_default=True)
@click.option("--overlap", default=2, show_default=True)
@click.option("--top-k", default=4, show_default=True)
@click.option("--prices", "prices_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=Path("out"),
              show_default=True)
@click.option("--parallelism", default=4, show_default=True)
def assess_cmd(transcripts: tuple[Path, ...], fmt: str,
               rubric_path: Optional[Path], strategy: str, model_id: str,
               backend_kind: str, mock_script: Optional[Path],
               embedder_kind: str, window: int, overlap: int, top_k: int,
               prices_path: Path, out: Path, parallelism: int) -> None:
    """Run assessments; one artifact per (transcript, strategy)."""
    if backend_kind == "mock" and mock_script is None:
        _fail_config("--backend mock requires --mock-script")
    if embedder_kind == "remote":
        _fail_config("remote embedder needs endpoint config; "
                     "use --embedder hashing for offline runs")
    try:
        rubric = load_rubric(rubric_path) if rubric_path else default_rubric()
        prices = PriceTable.load(prices_path)
    except (SelAssessError, OSError, ValueError) as exc:
        _fail_config(str(exc))
    strategies = (STRATEGY_ORDER if strategy == "all"
                  else (Strategy(strategy),))
    if backend_kind == "real":
        try:
            OpenAICompatBackend()  # fail fast on missing key
        except SelAssessError as exc:
            _fail_config(str(exc))
    out.mkdir(parents=True, exist_ok=True)
    embedder = HashingEmbedder()
    ledger = CostLedger()
    cfg = AssessConfig(top_k=top_k, parallelism=parallelism)
    failures = 0
    for path in transcripts:
        try:
            t = _read_transcript(path, TranscriptFormat(fmt))
        except (SelAssessError, OSError) as exc:
            click.echo(f"{path}: {exc}", err=True)
            failures += 1
            continue
        for strat in strategies:
            try:
                backend = (MockBackend.from_file(mock_script)
                           if backend_kind == "mock"
                           else OpenAICompatBackend())
                store = (_build_store(t, rubric, embedder, window, overlap)
                         if strat is Strategy.RAG else None)
                run = assess(t, rubric, strat, model_id, backend,
                             ledger=ledger, prices=prices, store=store,
                             embedder=embedder, config=cfg)
            except SelAssessError as exc:
                click.echo(f"{path} [{strat.value}]: {exc}", err=True)
                failures += 1
                continue
            target = out / f"run-{run.run_id}.json"
            target.write_text(run.to_json(), encoding="utf-8")
            click.echo(f"{path} [{strat.value}] -> {target} "
                       f"(cost {run.total_cost})")
    ledger.save(out / "ledger.jsonl")
    sys.exit(EXIT_PARTIAL if failures else EXIT_OK)


@main.command()
@click.argument("run_path", type=click.Path(exists=True, path_type=Path))
@click.option("--coder", "coder_id", required=True)
@click.option("--store", "store_path", type=click.Path(path_type=Path),
              default=Path("annotations.jsonl"), show_default=True)
@click.option("--rubric", "rubric_path", type=click.Path(path_type=Path),
              default=None)
def annotate(run_path: Path, coder_id: str, store_path: Path,
             rubric_path: Optional[Path]) -> None:
    """Interactively code one run's assessments."""
    try:
        run = AssessmentRun.from_dict(
            json.loads(run_path.read_text(encoding="utf-8")))
        rubric = load_rubric(rubric_path) if rubric_path else default_rubric()
    except (SelAssessError, OSError, ValueError, KeyError) as exc:
        _fail_config(str(exc))
    criteria = {p.principle_id: f"{p.name}\n{render_criteria(p)}"
                for p in rubric.principles}
    store = AnnotationStore(store_path)
    try:
        records = annotate_interactive(run, coder_id, store,
                                       criteria_by_principle=criteria)
    except (EOFError, KeyboardInterrupt):
        click.echo("aborted; progress saved", err=True)
        sys.exit(EXIT_PARTIAL)
    click.echo(f"wrote {len(records)} annotation(s) to {store_path}")


@main.command()
@click.argument("kind", type=click.Choice(["cost", "accuracy"]))
@click.option("--ledger", "ledger_path", type=click.Path(path_type=Path),
              default=None)
@click.option("--annotations", "annotations_path",
              type=click.Path(path_type=Path), default=None)
@click.option("--runs", "runs_dir", type=click.Path(path_type=Path),
              default=None, help="Directory of run-*.json artifacts.")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Also write the report file(s) here.")
def report(kind: str, ledger_path: Optional[Path],
           annotations_path: Optional[Path], runs_dir: Optional[Path],
           out: Optional[Path]) -> None:
    """Render a cost table or an accuracy grid."""
    if kind == "cost":
        if ledger_path is None:
            _fail_config("report cost requires --ledger")
        if not ledger_path.exists():
            _fail_config(f"ledger not found: {ledger_path}")
        rendered = render_cost_report(cost_report(CostLedger.load(ledger_path)))
        click.echo(rendered)
        if out:
            out.mkdir(parents=True, exist_ok=True)
            (out / "cost_report.md").write_text(rendered + "\n",
                                                encoding="utf-8")
        return
    if annotations_path is None or runs_dir is None:
        _fail_config("report accuracy requires --annotations and --runs")
    runs = []
    for path in sorted(Path(runs_dir).glob("run-*.json")):
        runs.append(AssessmentRun.from_dict(
            json.loads(path.read_text(encoding="utf-8"))))
    annotations = AnnotationStore(annotations_path).records()
    try:
        acc = aggregate(annotations, runs)
    except SelAssessError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_PARTIAL)
    rendered = render_accuracy_report(acc)
    click.echo(rendered)
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "accuracy_report.md").write_text(rendered + "\n",
                                                encoding="utf-8")
        (out / "accuracy_matrix.json").write_text(
            json.dumps(report_to_matrix(acc), indent=2) + "\n",
            encoding="utf-8")


if __name__ == "__main__":
    main()
