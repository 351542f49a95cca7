"""Domain types, canonical file formats, and corpus ingestion.

Two line-delimited JSON formats are canonical (see docs/FORMATS.md):

* ``annotated-jsonl`` — one labeled paragraph per line: topic, sentences,
  atomic facts with binary labels and sentence indices, popularity class.
  Unknown fields are preserved on round-trip.
* ``trace-jsonl`` — one generation trace per line: per-token text,
  logprob, top-k alternatives, sentence boundaries, EOS token.

All types are immutable after construction and safe to share across
workers. Fact labels arrive pre-computed; nothing here extracts or
verifies facts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ValidationError

POPULARITY_CLASSES = (
    "very-rare",
    "rare",
    "medium",
    "frequent",
    "very-frequent",
    "unknown",
)

_POPULARITY_ALIASES = {c.replace("-", " "): c for c in POPULARITY_CLASSES}
_POPULARITY_ALIASES.update({c.replace("-", "_"): c for c in POPULARITY_CLASSES})
_POPULARITY_ALIASES.update({c: c for c in POPULARITY_CLASSES})

FactLabels = tuple[int, ...]


def fact_sequence(labels: Iterable[int]) -> FactLabels:
    """Validate and freeze an ordered sequence of binary fact labels.

    Every element must be exactly 0 or 1 (bools are accepted and
    normalized). Empty sequences are valid.
    """
    out = []
    for i, v in enumerate(labels):
        if isinstance(v, bool):
            v = int(v)
        if not isinstance(v, int) or v not in (0, 1):
            raise ValidationError(f"label at position {i} is {v!r}, expected 0 or 1", field="labels")
        out.append(v)
    return tuple(out)


def normalize_popularity(value: str | None) -> str:
    """Map a prevalence label onto the canonical class set.

    Records lacking a class (or carrying an unrecognized one) get
    ``unknown``.
    """
    if value is None:
        return "unknown"
    return _POPULARITY_ALIASES.get(str(value).strip().lower(), "unknown")


@dataclass(frozen=True, slots=True)
class AtomicFact:
    """A minimal verifiable statement with its correctness label.

    ``fact_index`` is the position in generation order; ``sentence_index``
    points into the owning paragraph's sentence list.
    """

    text: str
    label: int
    sentence_index: int
    fact_index: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValidationError(f"fact label must be 0 or 1, got {self.label!r}", field="label")
        if self.sentence_index < 0:
            raise ValidationError("sentence_index must be non-negative", field="sentence_index")
        if self.fact_index < 0:
            raise ValidationError("fact_index must be non-negative", field="fact_index")


@dataclass(frozen=True, slots=True)
class AnnotatedParagraph:
    """One generated paragraph with its sentences and labeled facts."""

    topic: str
    sentences: tuple[str, ...]
    facts: tuple[AtomicFact, ...]
    popularity_class: str = "unknown"
    source_strategy: str = "baseline"
    extra: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        for i, s in enumerate(self.sentences):
            if not isinstance(s, str) or not s.strip():
                raise ValidationError(f"sentence {i} is empty", field="sentences")
        if self.popularity_class not in POPULARITY_CLASSES:
            raise ValidationError(
                f"popularity_class {self.popularity_class!r} not one of {POPULARITY_CLASSES}",
                field="popularity_class",
            )
        for pos, f in enumerate(self.facts):
            if f.fact_index != pos:
                raise ValidationError(
                    f"fact_index values must be contiguous from 0; position {pos} has {f.fact_index}",
                    field="fact_index",
                )
            if f.sentence_index >= len(self.sentences):
                raise ValidationError(
                    f"fact {pos} has sentence_index {f.sentence_index} "
                    f"but paragraph has {len(self.sentences)} sentences",
                    field="sentence_index",
                )

    def labels(self) -> FactLabels:
        """Project facts onto their binary labels, in generation order."""
        return tuple(f.label for f in self.facts)

    @property
    def n_facts(self) -> int:
        return len(self.facts)

    def text(self) -> str:
        return " ".join(self.sentences)


@dataclass(frozen=True, slots=True)
class TokenStep:
    """One generated token with its logprob and ranked top-k alternatives."""

    text: str
    logprob: float
    top_alternatives: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if self.logprob > 0:
            raise ValidationError(f"logprob must be <= 0, got {self.logprob}", field="logprob")
        prev = None
        for alt_text, alt_lp in self.top_alternatives:
            if alt_lp > 0:
                raise ValidationError(
                    f"alternative logprob must be <= 0, got {alt_lp} for {alt_text!r}",
                    field="top_alternatives",
                )
            if prev is not None and alt_lp > prev:
                raise ValidationError(
                    "top_alternatives must be sorted by descending logprob",
                    field="top_alternatives",
                )
            prev = alt_lp


@dataclass(frozen=True, slots=True)
class GenerationTrace:
    """Per-token record of one completion plus sentence boundaries.

    ``sentence_boundaries`` are token offsets one past the last token of
    each sentence, strictly increasing and bounded by the token count.
    """

    tokens: tuple[TokenStep, ...]
    sentence_boundaries: tuple[int, ...]
    eos_token: str

    def __post_init__(self):
        k = None
        for i, t in enumerate(self.tokens):
            if k is None:
                k = len(t.top_alternatives)
            elif len(t.top_alternatives) != k:
                raise ValidationError(
                    f"token {i} has {len(t.top_alternatives)} alternatives, expected {k}",
                    field="top_alternatives",
                )
        prev = -1
        for b in self.sentence_boundaries:
            if b <= prev:
                raise ValidationError(
                    "sentence_boundaries must be strictly increasing",
                    field="sentence_boundaries",
                )
            if b > len(self.tokens):
                raise ValidationError(
                    f"sentence boundary {b} exceeds token count {len(self.tokens)}",
                    field="sentence_boundaries",
                )
            prev = b

    @property
    def k_max(self) -> int:
        """Number of recorded alternatives per token (0 for empty traces)."""
        return len(self.tokens[0].top_alternatives) if self.tokens else 0

    def sentence_token_spans(self) -> list[tuple[int, int]]:
        """Token spans of complete sentences; tokens past the last boundary
        form an unterminated tail and are not returned."""
        spans = []
        start = 0
        for b in self.sentence_boundaries:
            spans.append((start, b))
            start = b
        return spans

    def sentence_index_of_token(self, offset: int) -> int:
        """Index of the sentence containing the token at ``offset``; tokens
        past the last boundary map to the would-be next sentence."""
        idx = 0
        for b in self.sentence_boundaries:
            if offset < b:
                return idx
            idx += 1
        return idx

    def text(self) -> str:
        return "".join(t.text for t in self.tokens)


@dataclass(frozen=True, slots=True)
class SampledPassage:
    """One resampled passage, sentence-segmented, with the seed that made it."""

    sentences: tuple[str, ...]
    seed: int


@dataclass(frozen=True, slots=True)
class SamplePassageSet:
    """A passage plus N resamples used by consistency scoring."""

    original_sentences: tuple[str, ...]
    samples: tuple[SampledPassage, ...]
    temperature: float = 0.6
    top_p: float = 0.9

    def __post_init__(self):
        if len(self.samples) < 1:
            raise ValidationError("at least one sampled passage is required", field="samples")

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def seeds(self) -> tuple[int, ...]:
        return tuple(s.seed for s in self.samples)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_PARAGRAPH_FIELDS = frozenset(
    {"topic", "sentences", "facts", "popularity_class", "source_strategy"}
)


def paragraph_from_record(record: dict) -> AnnotatedParagraph:
    if not isinstance(record, dict):
        raise ValidationError("record must be a JSON object")
    try:
        topic = record["topic"]
        sentences = record["sentences"]
        raw_facts = record["facts"]
    except KeyError as e:
        raise ValidationError(f"missing required field {e.args[0]!r}", field=e.args[0]) from None
    facts = []
    for pos, rf in enumerate(raw_facts):
        try:
            facts.append(
                AtomicFact(
                    text=rf["text"],
                    label=int(rf["label"]),
                    sentence_index=int(rf["sentence_index"]),
                    fact_index=int(rf.get("fact_index", pos)),
                )
            )
        except KeyError as e:
            raise ValidationError(
                f"fact {pos} missing field {e.args[0]!r}", field=e.args[0]
            ) from None
    extra = tuple(sorted((k, v) for k, v in record.items() if k not in _PARAGRAPH_FIELDS))
    return AnnotatedParagraph(
        topic=str(topic),
        sentences=tuple(str(s) for s in sentences),
        facts=tuple(facts),
        popularity_class=normalize_popularity(record.get("popularity_class")),
        source_strategy=str(record.get("source_strategy", "baseline")),
        extra=extra,
    )


def paragraph_to_record(p: AnnotatedParagraph) -> dict:
    record = {
        "topic": p.topic,
        "sentences": list(p.sentences),
        "facts": [
            {
                "text": f.text,
                "label": f.label,
                "sentence_index": f.sentence_index,
                "fact_index": f.fact_index,
            }
            for f in p.facts
        ],
        "popularity_class": p.popularity_class,
        "source_strategy": p.source_strategy,
    }
    for k, v in p.extra:
        record[k] = v
    return record


def trace_from_record(record: dict) -> GenerationTrace:
    if not isinstance(record, dict):
        raise ValidationError("record must be a JSON object")
    try:
        raw_tokens = record["tokens"]
        eos_token = record["eos_token"]
    except KeyError as e:
        raise ValidationError(f"missing required field {e.args[0]!r}", field=e.args[0]) from None
    tokens = []
    for i, rt in enumerate(raw_tokens):
        try:
            tokens.append(
                TokenStep(
                    text=rt["text"],
                    logprob=float(rt["logprob"]),
                    top_alternatives=tuple((str(a), float(lp)) for a, lp in rt.get("top", [])),
                )
            )
        except KeyError as e:
            raise ValidationError(
                f"token {i} missing field {e.args[0]!r}", field=e.args[0]
            ) from None
    trace = GenerationTrace(
        tokens=tuple(tokens),
        sentence_boundaries=tuple(int(b) for b in record.get("sentence_boundaries", [])),
        eos_token=str(eos_token),
    )
    declared = record.get("k_max")
    if declared is not None and trace.tokens and int(declared) != trace.k_max:
        raise ValidationError(
            f"declared k_max {declared} does not match recorded alternatives {trace.k_max}",
            field="k_max",
        )
    return trace


def trace_to_record(t: GenerationTrace) -> dict:
    return {
        "tokens": [
            {"text": tok.text, "logprob": tok.logprob, "top": [list(a) for a in tok.top_alternatives]}
            for tok in t.tokens
        ],
        "sentence_boundaries": list(t.sentence_boundaries),
        "eos_token": t.eos_token,
        "k_max": t.k_max,
    }


@dataclass(frozen=True, slots=True)
class IngestIssue:
    """One rejected input line, with enough context to find and fix it."""

    line_no: int
    field: str | None
    message: str


@dataclass(slots=True)
class IngestResult:
    records: list = field(default_factory=list)
    issues: list[IngestIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues


FORMATS = ("annotated-jsonl", "trace-jsonl")


def ingest_corpus(path: str | Path, fmt: str = "annotated-jsonl") -> IngestResult:
    """Read and validate a line-delimited corpus file.

    Invalid lines are collected as :class:`IngestIssue` entries with their
    line numbers; valid lines are retained. An unreadable file raises
    ``OSError``.
    """
    if fmt not in FORMATS:
        raise ValidationError(f"unknown corpus format {fmt!r}; expected one of {FORMATS}", field="format")
    parse = paragraph_from_record if fmt == "annotated-jsonl" else trace_from_record
    result = IngestResult()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                result.issues.append(IngestIssue(line_no, None, f"invalid JSON: {e.msg}"))
                continue
            try:
                result.records.append(parse(record))
            except ValidationError as e:
                result.issues.append(IngestIssue(line_no, e.field, str(e)))
    return result


def serialize_corpus(records: Iterable[AnnotatedParagraph | GenerationTrace]) -> Iterator[str]:
    """Canonical JSONL lines for ``records`` (deterministic byte-for-byte)."""
    for r in records:
        record = paragraph_to_record(r) if isinstance(r, AnnotatedParagraph) else trace_to_record(r)
        yield json.dumps(record, ensure_ascii=False)


def write_corpus(records: Iterable[AnnotatedParagraph | GenerationTrace], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in serialize_corpus(records):
            fh.write(line + "\n")
