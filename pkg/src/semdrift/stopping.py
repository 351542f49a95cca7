"""Early-stopping policies over paragraphs, traces, and consistency profiles.

Four policy kinds:

* ``oracle-drift-point`` — truncate at the label-derived drift point;
  evaluation-only (needs ground truth), the upper bound for the family.
* ``eos-top-k`` — stop at the first token step whose top-k alternatives
  contain the end-of-sequence token.
* ``sc-relative-increase`` — stop before the first sentence whose
  consistency score rose relative to the opening sentence by more than T.
* ``sc-absolute`` — stop before the first sentence whose score exceeds A,
  with configurable handling when the opening sentence already does.

Stopping is always mapped to a sentence boundary; truncated output is a
prefix of the input sentences.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .consistency import METRIC_SIMILARITY, ConsistencyProfile
from .corpus import AnnotatedParagraph, GenerationTrace
from .drift import sd_score_fast
from .errors import ConfigurationError, ValidationError
from .segmentation import strip_unfinished_tail

ZERO_SCORE_EPSILON = 1e-6

KIND_ORACLE = "oracle-drift-point"
KIND_EOS_TOP_K = "eos-top-k"
KIND_SC_RELATIVE = "sc-relative-increase"
KIND_SC_ABSOLUTE = "sc-absolute"

POLICY_KINDS = (KIND_ORACLE, KIND_EOS_TOP_K, KIND_SC_RELATIVE, KIND_SC_ABSOLUTE)


@dataclass(frozen=True, slots=True)
class StopPolicy:
    """A stopping rule plus exactly the parameters its kind requires."""

    kind: str
    k: int | None = None
    threshold: float | None = None
    absolute: float | None = None
    first_sentence_mode: str | None = None
    m: int | None = None

    def __post_init__(self):
        required = {
            KIND_ORACLE: {"m"},
            KIND_EOS_TOP_K: {"k"},
            KIND_SC_RELATIVE: {"threshold"},
            KIND_SC_ABSOLUTE: {"absolute", "first_sentence_mode"},
        }
        if self.kind not in required:
            raise ConfigurationError(f"unknown policy kind {self.kind!r}")
        want = required[self.kind]
        have = {
            name
            for name in ("k", "threshold", "absolute", "first_sentence_mode", "m")
            if getattr(self, name) is not None
        }
        if have != want:
            raise ConfigurationError(
                f"policy {self.kind} requires exactly {sorted(want)}, got {sorted(have)}"
            )
        if self.k is not None and self.k < 1:
            raise ConfigurationError("k must be a positive integer")
        if self.threshold is not None and self.threshold <= 0:
            raise ConfigurationError("relative-increase threshold must be positive")
        if self.absolute is not None and not (0 < self.absolute < 1):
            raise ConfigurationError("absolute threshold must be in (0, 1)")
        if self.first_sentence_mode is not None and self.first_sentence_mode not in ("keep", "delete"):
            raise ConfigurationError("first_sentence_mode must be 'keep' or 'delete'")

    @classmethod
    def oracle(cls, m: int = 0) -> "StopPolicy":
        return cls(kind=KIND_ORACLE, m=m)

    @classmethod
    def eos_top_k(cls, k: int) -> "StopPolicy":
        return cls(kind=KIND_EOS_TOP_K, k=k)

    @classmethod
    def relative_increase(cls, threshold: float) -> "StopPolicy":
        return cls(kind=KIND_SC_RELATIVE, threshold=threshold)

    @classmethod
    def absolute_threshold(cls, absolute: float, first_sentence_mode: str = "keep") -> "StopPolicy":
        return cls(kind=KIND_SC_ABSOLUTE, absolute=absolute, first_sentence_mode=first_sentence_mode)

    def label(self) -> str:
        if self.kind == KIND_ORACLE:
            return f"oracle(m={self.m})"
        if self.kind == KIND_EOS_TOP_K:
            return f"eos-top-{self.k}"
        if self.kind == KIND_SC_RELATIVE:
            return f"sc-relative({self.threshold})"
        return f"sc-absolute({self.absolute},{self.first_sentence_mode})"


@dataclass(frozen=True, slots=True)
class StopDecision:
    """Where a policy halted, if anywhere, and why.

    ``stop_sentence_index`` is the index of the first sentence NOT kept;
    0 means empty output. When a token offset is set too, it lies inside
    the stop sentence.
    """

    stop_sentence_index: int | None
    stop_token_offset: int | None
    reason: str
    triggering_value: float | None = None

    @property
    def stopped(self) -> bool:
        return self.stop_sentence_index is not None or self.stop_token_offset is not None


NO_STOP = StopDecision(None, None, "no-stop")


def oracle_stop(paragraph: AnnotatedParagraph, m: int = 0) -> StopDecision:
    """Stop before the sentence containing the drift-point fact.

    Declines to stop when no admissible split exists or when the best
    split has nothing unsupported to its right (an all-correct tail is
    not worth cutting).
    """
    result = sd_score_fast(paragraph.labels(), m)
    k = result.drift_point
    if k is None:
        return StopDecision(None, None, "oracle:no-admissible-split")
    if not result.right_fraction:
        return StopDecision(None, None, "oracle:clean-tail", triggering_value=result.score)
    if k >= len(paragraph.facts):
        return StopDecision(None, None, "oracle:clean-tail", triggering_value=result.score)
    sentence = paragraph.facts[k].sentence_index
    return StopDecision(
        stop_sentence_index=sentence,
        stop_token_offset=None,
        reason=f"oracle:drift-point(k={k})",
        triggering_value=result.score,
    )


def eos_stop(trace: GenerationTrace, k: int) -> StopDecision:
    """Stop at the first token whose top-k alternatives include EOS."""
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    if trace.tokens and k > trace.k_max:
        raise ConfigurationError(
            f"k={k} exceeds the trace's recorded alternatives (k_max={trace.k_max})"
        )
    for offset, token in enumerate(trace.tokens):
        top = token.top_alternatives[:k]
        if any(text == trace.eos_token for text, _ in top):
            rank = next(i for i, (text, _) in enumerate(top) if text == trace.eos_token)
            return StopDecision(
                stop_sentence_index=trace.sentence_index_of_token(offset),
                stop_token_offset=offset,
                reason=f"eos-top-{k}:rank-{rank}",
            )
    return StopDecision(None, None, f"eos-top-{k}:never-in-top-k")


def _similarity_scores(profile: ConsistencyProfile | Sequence[float]) -> list[float]:
    if isinstance(profile, ConsistencyProfile):
        return profile.values(METRIC_SIMILARITY)
    return list(profile)


def sc_relative_stop(
    profile: ConsistencyProfile | Sequence[float],
    threshold: float,
    epsilon: float = ZERO_SCORE_EPSILON,
) -> StopDecision:
    """Stop before the first sentence whose score rose more than
    ``threshold`` relative to the opening sentence.

    With an opening score of exactly zero the ratio is undefined; any
    later score above ``epsilon`` then counts as a trigger.
    """
    scores = _similarity_scores(profile)
    if not scores:
        return StopDecision(None, None, "sc-relative:empty-profile")
    s0 = scores[0]
    for i, s in enumerate(scores[1:], start=1):
        if s0 > 0:
            increase = (s - s0) / s0
            if increase > threshold:
                return StopDecision(i, None, f"sc-relative>{threshold}", triggering_value=increase)
        elif s > epsilon:
            return StopDecision(i, None, f"sc-relative>{threshold}:zero-base", triggering_value=s)
    return StopDecision(None, None, f"sc-relative>{threshold}:never-triggered")


def sc_absolute_stop(
    profile: ConsistencyProfile | Sequence[float],
    absolute: float,
    first_sentence_mode: str = "keep",
) -> StopDecision:
    """Stop before the first sentence whose score exceeds ``absolute``.

    When the opening sentence itself exceeds the threshold, ``keep``
    retains it and keeps scanning from the second sentence; ``delete``
    yields empty output (a no-answer paragraph).
    """
    if first_sentence_mode not in ("keep", "delete"):
        raise ConfigurationError("first_sentence_mode must be 'keep' or 'delete'")
    scores = _similarity_scores(profile)
    if not scores:
        return StopDecision(None, None, "sc-absolute:empty-profile")
    if scores[0] > absolute and first_sentence_mode == "delete":
        return StopDecision(0, None, f"sc-absolute>{absolute}:first-sentence-deleted",
                            triggering_value=scores[0])
    for i, s in enumerate(scores[1:], start=1):
        if s > absolute:
            return StopDecision(i, None, f"sc-absolute>{absolute}", triggering_value=s)
    return StopDecision(None, None, f"sc-absolute>{absolute}:never-triggered")


def apply_policy(
    policy: StopPolicy,
    paragraph: AnnotatedParagraph | None = None,
    trace: GenerationTrace | None = None,
    profile: ConsistencyProfile | None = None,
) -> StopDecision:
    """Dispatch a policy against whichever inputs it needs."""
    if policy.kind == KIND_ORACLE:
        if paragraph is None:
            raise ConfigurationError("oracle policy needs an annotated paragraph")
        return oracle_stop(paragraph, policy.m)
    if policy.kind == KIND_EOS_TOP_K:
        if trace is None:
            raise ConfigurationError("eos-top-k policy needs a generation trace")
        return eos_stop(trace, policy.k)
    if profile is None:
        raise ConfigurationError(f"{policy.kind} policy needs a consistency profile")
    if policy.kind == KIND_SC_RELATIVE:
        return sc_relative_stop(profile, policy.threshold)
    return sc_absolute_stop(profile, policy.absolute, policy.first_sentence_mode)


def truncate_paragraph(paragraph: AnnotatedParagraph, decision: StopDecision,
                       strategy: str | None = None) -> AnnotatedParagraph:
    """Apply a sentence-level stop to an annotated paragraph.

    Keeps the sentence prefix before the stop index and the facts living
    in it. Fact indices stay contiguous because facts are ordered by
    generation position and sentences are cut as a prefix.
    """
    if decision.stop_sentence_index is None:
        return paragraph if strategy is None else replace(paragraph, source_strategy=strategy)
    stop = decision.stop_sentence_index
    kept_sentences = paragraph.sentences[:stop]
    kept_facts = tuple(f for f in paragraph.facts if f.sentence_index < stop)
    for pos, f in enumerate(kept_facts):
        if f.fact_index != pos:
            raise ValidationError(
                "facts are not in sentence-prefix order; cannot truncate cleanly",
                field="fact_index",
            )
    return AnnotatedParagraph(
        topic=paragraph.topic,
        sentences=kept_sentences,
        facts=kept_facts,
        popularity_class=paragraph.popularity_class,
        source_strategy=strategy or paragraph.source_strategy,
        extra=paragraph.extra,
    )


def truncate_trace_text(trace: GenerationTrace, decision: StopDecision) -> str:
    """Token-level stop for traces: cut at the stop offset, then strip any
    unfinished tail so the output ends at a sentence boundary."""
    if decision.stop_token_offset is None:
        if decision.stop_sentence_index is None:
            return strip_unfinished_tail(trace.text())
        spans = trace.sentence_token_spans()
        stop = decision.stop_sentence_index
        end = 0 if stop == 0 else spans[min(stop, len(spans)) - 1][1]
        return strip_unfinished_tail("".join(t.text for t in trace.tokens[:end]))
    kept = trace.tokens[: decision.stop_token_offset]
    return strip_unfinished_tail("".join(t.text for t in kept))
