"""Token-usage cost accounting against a configurable price table.

All currency arithmetic is exact decimal; entries record cost to 6 decimal
places and reports format to 3 (the precision of per-lesson dollar
figures). Prices live in a config file, never in code.
"""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Optional

from .errors import UnknownModel, ValidationError
from .llm_client import TokenUsage, UsageSource

ENTRY_QUANTUM = Decimal("0.000001")
REPORT_QUANTUM = Decimal("0.001")


@dataclass(frozen=True)
class ModelPrice:
    input_per_1k: Decimal
    output_per_1k: Decimal

    def __post_init__(self):
        if self.input_per_1k < 0 or self.output_per_1k < 0:
            raise ValidationError("prices must be non-negative")


@dataclass(frozen=True)
class PriceTable:
    entries: dict[str, ModelPrice]
    currency_code: str = "USD"
    as_of_date: str = ""

    @classmethod
    def from_dict(cls, obj: dict) -> "PriceTable":
        entries = {}
        for m in obj["models"]:
            model_id = m["model_id"]
            if model_id in entries:
                raise ValidationError(f"duplicate model_id {model_id!r}")
            entries[model_id] = ModelPrice(Decimal(str(m["input_per_1k"])),
                                           Decimal(str(m["output_per_1k"])))
        return cls(entries=entries,
                   currency_code=obj.get("currency_code", "USD"),
                   as_of_date=obj.get("as_of_date", ""))

    @classmethod
    def load(cls, path: str | Path) -> "PriceTable":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def cost_of(usage: TokenUsage, model_id: str, table: PriceTable) -> Decimal:
    """Exact decimal cost of one request, recorded to 6 decimal places."""
    if model_id not in table.entries:
        raise UnknownModel(model_id)
    price = table.entries[model_id]
    raw = (Decimal(usage.input_tokens) / 1000 * price.input_per_1k
           + Decimal(usage.output_tokens) / 1000 * price.output_per_1k)
    return raw.quantize(ENTRY_QUANTUM, rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class CostEntry:
    entry_id: str
    run_id: str
    request_tag: str
    model_id: str
    usage: TokenUsage
    cost: Decimal

    def to_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "run_id": self.run_id,
            "request_tag": self.request_tag,
            "model_id": self.model_id,
            "input_tokens": self.usage.input_tokens,
            "output_tokens": self.usage.output_tokens,
            "usage_source": self.usage.source.value,
            "cost": str(self.cost),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CostEntry":
        return cls(
            entry_id=obj["entry_id"],
            run_id=obj["run_id"],
            request_tag=obj["request_tag"],
            model_id=obj["model_id"],
            usage=TokenUsage(obj["input_tokens"], obj["output_tokens"],
                             UsageSource(obj["usage_source"])),
            cost=Decimal(obj["cost"]),
        )


class CostLedger:
    """Append-only ledger; appends are atomic and totally ordered."""

    def __init__(self):
        self._entries: list[CostEntry] = []
        self._counter = itertools.count(1)
        self._lock = threading.Lock()

    def record(self, run_id: str, request_tag: str, model_id: str,
               usage: TokenUsage, table: PriceTable) -> CostEntry:
        cost = cost_of(usage, model_id, table)
        with self._lock:
            entry = CostEntry(
                entry_id=f"e{next(self._counter):08d}",
                run_id=run_id,
                request_tag=request_tag,
                model_id=model_id,
                usage=usage,
                cost=cost,
            )
            self._entries.append(entry)
        return entry

    def entries(self, run_id: Optional[str] = None) -> list[CostEntry]:
        with self._lock:
            snapshot = list(self._entries)
        if run_id is None:
            return snapshot
        return [e for e in snapshot if e.run_id == run_id]

    def total(self, run_id: Optional[str] = None) -> Decimal:
        return sum((e.cost for e in self.entries(run_id)), Decimal(0))

    def __len__(self) -> int:
        return len(self._entries)

    def save(self, path: str | Path) -> None:
        lines = [json.dumps(e.to_dict(), ensure_ascii=False)
                 for e in self.entries()]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""),
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CostLedger":
        ledger = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                entry = CostEntry.from_dict(json.loads(line))
                with ledger._lock:
                    ledger._entries.append(entry)
                    ledger._counter = itertools.count(len(ledger._entries) + 1)
        return ledger


def strategy_of_tag(request_tag: str) -> str:
    """Strategy component of a 'strategy:principle:step' request tag."""
    return request_tag.split(":", 1)[0] if request_tag else ""


@dataclass(frozen=True)
class CostReport:
    rows: dict[tuple[str, str], Decimal]  # (strategy, model_id) -> total
    grand_total: Decimal
    currency_code: str
    estimated_token_share: float  # fraction of tokens with Estimated usage
    entry_count: int = 0

    def strategies(self) -> list[str]:
        return sorted({s for s, _ in self.rows})

    def models(self) -> list[str]:
        return sorted({m for _, m in self.rows})


def cost_report(ledger: CostLedger, currency_code: str = "USD") -> CostReport:
    """Group entry costs by (strategy, model); exact sums."""
    rows: dict[tuple[str, str], Decimal] = {}
    total_tokens = 0
    estimated_tokens = 0
    entries = ledger.entries()
    for e in entries:
        key = (strategy_of_tag(e.request_tag), e.model_id)
        rows[key] = rows.get(key, Decimal(0)) + e.cost
        tokens = e.usage.input_tokens + e.usage.output_tokens
        total_tokens += tokens
        if e.usage.source is UsageSource.ESTIMATED:
            estimated_tokens += tokens
    return CostReport(
        rows=rows,
        grand_total=sum(rows.values(), Decimal(0)),
        currency_code=currency_code,
        estimated_token_share=(estimated_tokens / total_tokens
                               if total_tokens else 0.0),
        entry_count=len(entries),
    )


def render_cost_report(report: CostReport) -> str:
    """Markdown table: one row per strategy, one column per model."""
    strategies = report.strategies()
    models = report.models()
    lines = []
    header = "| Prompt | " + " | ".join(models) + " |" if models else "| Prompt |"
    lines.append(header)
    lines.append("|" + "---|" * (len(models) + 1))
    for strategy in strategies:
        cells = []
        for model in models:
            value = report.rows.get((strategy, model))
            cells.append(f"${value.quantize(REPORT_QUANTUM)}"
                         if value is not None else "-")
        lines.append(f"| {strategy} | " + " | ".join(cells) + " |"
                     if models else f"| {strategy} |")
    lines.append("")
    lines.append(f"Grand total: ${report.grand_total.quantize(ENTRY_QUANTUM)} "
                 f"{report.currency_code}")
    lines.append(f"Estimated-usage token share: "
                 f"{report.estimated_token_share:.1%}")
    return "\n".join(lines)
