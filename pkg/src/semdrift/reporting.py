"""Strategy evaluation: fact precision, recall vs baseline, cost model,
and trade-off report emission.

Precision here is macro-averaged per-paragraph fact precision (a
micro-average over all facts is available behind a flag and both appear
in reports). Zero-fact paragraphs count as "no answer" and are excluded
from precision means. All aggregation is pure and order-independent.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import AnnotatedParagraph
from .drift import sd_score_fast
from .errors import ConfigurationError, ValidationError


@dataclass(frozen=True, slots=True)
class PrecisionSummary:
    macro: float | None
    micro: float | None
    n_paragraphs: int
    no_answer_count: int


def factscore_star(corpus: Sequence[AnnotatedParagraph]) -> PrecisionSummary:
    """Aggregate fact precision over a corpus.

    Macro: mean of per-paragraph supported-fact fractions, excluding
    zero-fact paragraphs (counted as no-answer). Micro: supported / total
    over the whole corpus. Corpora with no scored facts report None.
    """
    if not corpus:
        raise ValidationError("factscore_star requires a non-empty corpus")
    precisions = []
    supported = 0
    total = 0
    no_answer = 0
    for p in corpus:
        labels = p.labels()
        if not labels:
            no_answer += 1
            continue
        precisions.append(sum(labels) / len(labels))
        supported += sum(labels)
        total += len(labels)
    return PrecisionSummary(
        macro=sum(precisions) / len(precisions) if precisions else None,
        micro=supported / total if total else None,
        n_paragraphs=len(corpus),
        no_answer_count=no_answer,
    )


def _pair_by_topic(
    truncated: Sequence[AnnotatedParagraph],
    baseline: Sequence[AnnotatedParagraph],
) -> list[tuple[AnnotatedParagraph, AnnotatedParagraph]]:
    base_by_topic = {p.topic: p for p in baseline}
    pairs = []
    for t in truncated:
        if t.topic not in base_by_topic:
            raise ValidationError(f"topic {t.topic!r} missing from baseline corpus", field="topic")
        b = base_by_topic[t.topic]
        if t.labels() != b.labels()[: t.n_facts]:
            raise ValidationError(
                f"topic {t.topic!r}: truncated facts are not a prefix of baseline facts",
                field="facts",
            )
        pairs.append((t, b))
    return pairs


def recall_vs_baseline(
    truncated: Sequence[AnnotatedParagraph],
    baseline: Sequence[AnnotatedParagraph],
) -> float | None:
    """Fraction of the baseline's correct facts still present after a
    strategy truncated each paragraph. Paragraphs pair by topic."""
    pairs = _pair_by_topic(truncated, baseline)
    remaining = sum(sum(t.labels()) for t, _ in pairs)
    total = sum(sum(b.labels()) for _, b in pairs)
    return remaining / total if total else None


@dataclass(frozen=True, slots=True)
class FactPRBreakdown:
    """Precision/recall over removed (incorrect) and kept (correct) facts.

    Each field is None when its denominator is zero (e.g. nothing was
    removed, or the baseline had no incorrect facts).
    """

    incorrect_precision: float | None
    incorrect_recall: float | None
    correct_precision: float | None
    correct_recall: float | None
    removed_total: int
    baseline_incorrect: int
    baseline_correct: int


def fact_pr_breakdown(
    truncated: Sequence[AnnotatedParagraph],
    baseline: Sequence[AnnotatedParagraph],
) -> FactPRBreakdown:
    pairs = _pair_by_topic(truncated, baseline)
    removed_total = 0
    removed_incorrect = 0
    remaining_total = 0
    remaining_correct = 0
    baseline_incorrect = 0
    baseline_correct = 0
    for t, b in pairs:
        kept = t.n_facts
        blabels = b.labels()
        removed = blabels[kept:]
        removed_total += len(removed)
        removed_incorrect += sum(1 for s in removed if s == 0)
        remaining_total += kept
        remaining_correct += sum(t.labels())
        baseline_incorrect += sum(1 for s in blabels if s == 0)
        baseline_correct += sum(blabels)
    return FactPRBreakdown(
        incorrect_precision=removed_incorrect / removed_total if removed_total else None,
        incorrect_recall=removed_incorrect / baseline_incorrect if baseline_incorrect else None,
        correct_precision=remaining_correct / remaining_total if remaining_total else None,
        correct_recall=remaining_correct / baseline_correct if baseline_correct else None,
        removed_total=removed_total,
        baseline_incorrect=baseline_incorrect,
        baseline_correct=baseline_correct,
    )


# ---------------------------------------------------------------------------
# Cost model
# ---------------------------------------------------------------------------

DEFAULT_COST_MODEL = {
    # Order-of-magnitude defaults for a 70B-class generator, a 350M-class
    # scorer pass per pair, and an 11B-class QA pass per call.
    "generator_flops_per_token": 1.4e11,
    "scorer_flops_per_pair": 7.1e8,
    "qa_flops_per_call": 2.2e10,
}


@dataclass(slots=True)
class SessionLog:
    """What a generation session consumed, for the flops estimate."""

    generator_pass_tokens: list[int] = field(default_factory=list)
    scorer_pairs: int = 0
    qa_calls: int = 0

    def add_generator_pass(self, tokens: int) -> None:
        self.generator_pass_tokens.append(tokens)

    def add_scorer_pairs(self, pairs: int) -> None:
        self.scorer_pairs += pairs

    def add_qa_call(self) -> None:
        self.qa_calls += 1

    def merge(self, other: "SessionLog") -> "SessionLog":
        return SessionLog(
            generator_pass_tokens=self.generator_pass_tokens + other.generator_pass_tokens,
            scorer_pairs=self.scorer_pairs + other.scorer_pairs,
            qa_calls=self.qa_calls + other.qa_calls,
        )


@dataclass(frozen=True, slots=True)
class FlopsEstimate:
    internal: float
    external: float


def load_cost_model(path: str | Path | None) -> dict[str, float]:
    if path is None:
        return dict(DEFAULT_COST_MODEL)
    with open(path, "r", encoding="utf-8") as fh:
        loaded = json.load(fh)
    return {str(k): float(v) for k, v in loaded.items()}


def flops_estimate(session: SessionLog, cost_model: dict[str, float] | None = None) -> FlopsEstimate:
    """Internal (generator) and external (scorer + QA) cost of a session.

    Additive over session concatenation. All unit costs come from the
    cost-model config; a missing entry is a configuration error.
    """
    costs = dict(DEFAULT_COST_MODEL) if cost_model is None else cost_model
    for key in DEFAULT_COST_MODEL:
        if key not in costs:
            raise ConfigurationError(f"cost model missing entry {key!r}")
    internal = sum(session.generator_pass_tokens) * costs["generator_flops_per_token"]
    external = (
        session.scorer_pairs * costs["scorer_flops_per_pair"]
        + session.qa_calls * costs["qa_flops_per_call"]
    )
    return FlopsEstimate(internal=internal, external=external)


# ---------------------------------------------------------------------------
# Run reports and trade-off emission
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class RunReport:
    """Per-strategy aggregates, one row of the trade-off table."""

    strategy: str
    facts_per_gen: float
    no_answer_count: int
    factscore_star: float | None
    factscore_star_micro: float | None = None
    recall_vs_baseline: float | None = None
    sd_score: float | None = None
    flops_internal: float = 0.0
    flops_external: float = 0.0

    def __post_init__(self):
        for name in ("factscore_star", "factscore_star_micro", "recall_vs_baseline", "sd_score"):
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must be in [0,1], got {v}", field=name)


def build_run_report(
    strategy: str,
    corpus: Sequence[AnnotatedParagraph],
    baseline: Sequence[AnnotatedParagraph] | None = None,
    m: int = 0,
    session: SessionLog | None = None,
    cost_model: dict[str, float] | None = None,
) -> RunReport:
    """Assemble the standard aggregates for one strategy's output corpus."""
    precision = factscore_star(corpus)
    scores = [sd_score_fast(p.labels(), m).score for p in corpus if p.n_facts > 0]
    flops = flops_estimate(session, cost_model) if session is not None else FlopsEstimate(0.0, 0.0)
    return RunReport(
        strategy=strategy,
        facts_per_gen=sum(p.n_facts for p in corpus) / len(corpus) if corpus else 0.0,
        no_answer_count=precision.no_answer_count,
        factscore_star=precision.macro,
        factscore_star_micro=precision.micro,
        recall_vs_baseline=(
            recall_vs_baseline(corpus, baseline) if baseline is not None else None
        ),
        sd_score=sum(scores) / len(scores) if scores else None,
        flops_internal=flops.internal,
        flops_external=flops.external,
    )


def report_to_record(r: RunReport) -> dict:
    return {
        "strategy": r.strategy,
        "facts_per_gen": r.facts_per_gen,
        "no_answer_count": r.no_answer_count,
        "factscore_star": r.factscore_star,
        "factscore_star_micro": r.factscore_star_micro,
        "recall_vs_baseline": r.recall_vs_baseline,
        "sd_score": r.sd_score,
        "flops_internal": r.flops_internal,
        "flops_external": r.flops_external,
    }


def report_from_record(record: dict) -> RunReport:
    return RunReport(
        strategy=str(record["strategy"]),
        facts_per_gen=float(record["facts_per_gen"]),
        no_answer_count=int(record["no_answer_count"]),
        factscore_star=record.get("factscore_star"),
        factscore_star_micro=record.get("factscore_star_micro"),
        recall_vs_baseline=record.get("recall_vs_baseline"),
        sd_score=record.get("sd_score"),
        flops_internal=float(record.get("flops_internal", 0.0)),
        flops_external=float(record.get("flops_external", 0.0)),
    )


def fmt(value) -> str:
    """Canonical cell formatting shared by every CSV writer."""
    if value is None:
        return "undefined"
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


TRADEOFF_COLUMNS = [
    "strategy",
    "facts_per_gen",
    "factscore_star",
    "factscore_star_micro",
    "no_answer_count",
    "recall_vs_baseline",
    "sd_score",
    "flops_internal",
    "flops_external",
]


def tradeoff_table(reports: Sequence[RunReport]) -> str:
    """The informativeness-vs-factuality table as CSV text.

    Rows sort by strategy name so emitted files are byte-stable; ties in
    any metric are preserved as distinct rows.
    """
    if not reports:
        raise ValidationError("tradeoff_table requires at least one report")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRADEOFF_COLUMNS)
    for r in sorted(reports, key=lambda r: r.strategy):
        record = report_to_record(r)
        writer.writerow([fmt(record[c]) for c in TRADEOFF_COLUMNS])
    return buf.getvalue()


def tradeoff_scatter_svg(reports: Sequence[RunReport], width: int = 640, height: int = 480) -> str:
    """Minimal deterministic SVG scatter of facts/gen vs precision."""
    pts = [
        (r.factscore_star, r.facts_per_gen, r.strategy)
        for r in sorted(reports, key=lambda r: r.strategy)
        if r.factscore_star is not None
    ]
    max_facts = max((p[1] for p in pts), default=1.0) or 1.0
    margin = 50
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 10}" text-anchor="middle" '
        f'font-size="12">fact precision</text>',
        f'<text x="15" y="{height // 2}" font-size="12" transform="rotate(-90 15 {height // 2})" '
        f'text-anchor="middle">facts per generation</text>',
    ]
    for x_val, y_val, label in pts:
        x = margin + x_val * (width - 2 * margin)
        y = (height - margin) - (y_val / max_facts) * (height - 2 * margin)
        parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="4" fill="steelblue"/>')
        parts.append(f'<text x="{x + 6:.1f}" y="{y - 6:.1f}" font-size="10">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
