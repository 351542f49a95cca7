"""Sentence-level uncertainty and consistency metrics.

Three metric families:

* intrinsic — entropy statistics and likelihood computed from one trace's
  token distributions. Traces expose only top-k logprobs, so entropies are
  computed on the renormalized top-k mass (a lower bound on the full
  entropy); the k in effect is recorded on the profile.
* intrinsic averaged — the same metrics averaged over fresh regenerations
  of a sentence given its passage prefix.
* sampling-based — agreement between a sentence and N resampled passages:
  a smoothed n-gram novelty score and a best-match similarity score
  (0 = consistent, 1 = inconsistent).
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from scipy import stats

from .cache import GeneratorRequest
from .clients import GeneratorClient, SimilarityBackend
from .corpus import AnnotatedParagraph, GenerationTrace, SamplePassageSet
from .errors import EndpointError, ValidationError

log = logging.getLogger(__name__)

METRIC_MEAN_ENTROPY = "mean-entropy"
METRIC_ENTROPY_VARIANCE = "entropy-variance"
METRIC_NLL = "neg-log-likelihood"
METRIC_MEAN_ENTROPY_AVG = "mean-entropy-avg5"
METRIC_ENTROPY_VARIANCE_AVG = "entropy-variance-avg5"
METRIC_NLL_AVG = "nll-avg5"
METRIC_NGRAM_1 = "selfcheck-ngram-1"
METRIC_NGRAM_5 = "selfcheck-ngram-5"
METRIC_NGRAM_10 = "selfcheck-ngram-10"
METRIC_SIMILARITY = "selfcheck-similarity"

ALL_METRICS = frozenset(
    {
        METRIC_MEAN_ENTROPY,
        METRIC_ENTROPY_VARIANCE,
        METRIC_NLL,
        METRIC_MEAN_ENTROPY_AVG,
        METRIC_ENTROPY_VARIANCE_AVG,
        METRIC_NLL_AVG,
        METRIC_NGRAM_1,
        METRIC_NGRAM_5,
        METRIC_NGRAM_10,
        METRIC_SIMILARITY,
    }
)


@dataclass(frozen=True, slots=True)
class SentenceScore:
    sentence_index: int
    metric: str
    value: float

    def __post_init__(self):
        if self.metric not in ALL_METRICS:
            raise ValidationError(f"unknown metric {self.metric!r}", field="metric")
        if self.metric == METRIC_SIMILARITY and not (0.0 <= self.value <= 1.0):
            raise ValidationError(
                f"{METRIC_SIMILARITY} must be in [0,1], got {self.value}", field="value"
            )
        if self.metric != METRIC_SIMILARITY and self.value < 0:
            raise ValidationError(
                f"{self.metric} must be >= 0, got {self.value}", field="value"
            )


@dataclass(frozen=True, slots=True)
class ConsistencyProfile:
    """All (sentence, metric) scores for one passage."""

    scores: tuple[SentenceScore, ...]
    sample_count: int
    similarity_backend: str = "token-overlap-f1"
    passage_id: str = ""
    k_max: int | None = None

    def __post_init__(self):
        seen = set()
        for s in self.scores:
            key = (s.sentence_index, s.metric)
            if key in seen:
                raise ValidationError(f"duplicate score for {key}", field="scores")
            seen.add(key)

    def values(self, metric: str) -> list[float]:
        """Scores for one metric, ordered by sentence index."""
        pairs = sorted(
            (s.sentence_index, s.value) for s in self.scores if s.metric == metric
        )
        return [v for _, v in pairs]


def profile_to_record(p: ConsistencyProfile) -> dict:
    return {
        "passage_id": p.passage_id,
        "sample_count": p.sample_count,
        "similarity_backend": p.similarity_backend,
        "k_max": p.k_max,
        "scores": [[s.sentence_index, s.metric, s.value] for s in p.scores],
    }


def profile_from_record(record: dict) -> ConsistencyProfile:
    return ConsistencyProfile(
        scores=tuple(SentenceScore(int(i), str(m), float(v)) for i, m, v in record["scores"]),
        sample_count=int(record.get("sample_count", 0)),
        similarity_backend=str(record.get("similarity_backend", "token-overlap-f1")),
        passage_id=str(record.get("passage_id", "")),
        k_max=record.get("k_max"),
    )


# ---------------------------------------------------------------------------
# Intrinsic metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class IntrinsicScores:
    mean_entropy: float
    entropy_variance: float
    nll: float


def _token_entropy(alternatives: Sequence[tuple[str, float]]) -> float:
    # Renormalized top-k entropy; degenerate one-way distributions give 0.
    if not alternatives:
        return 0.0
    mx = max(lp for _, lp in alternatives)
    weights = [math.exp(lp - mx) for _, lp in alternatives]
    total = sum(weights)
    h = 0.0
    for w in weights:
        p = w / total
        if p > 0:
            h -= p * math.log(p)
    return h


def intrinsic_metrics(trace: GenerationTrace) -> list[IntrinsicScores]:
    """Per-sentence mean entropy, entropy variance, and sentence NLL.

    Sentences are delimited by the trace's boundaries. The NLL is the
    summed per-token negative logprob, i.e. the literal negative log
    likelihood of the sentence. Variances are population variances over
    the tokens of the sentence.
    """
    out = []
    for i, (start, end) in enumerate(trace.sentence_token_spans()):
        if end <= start:
            raise ValidationError(
                f"sentence {i} has zero tokens (boundary at offset {end})",
                field="sentence_boundaries",
            )
        tokens = trace.tokens[start:end]
        entropies = [_token_entropy(t.top_alternatives) for t in tokens]
        mean_h = sum(entropies) / len(entropies)
        var_h = sum((h - mean_h) ** 2 for h in entropies) / len(entropies)
        nll = -sum(t.logprob for t in tokens)
        out.append(IntrinsicScores(mean_entropy=mean_h, entropy_variance=var_h, nll=nll))
    return out


def intrinsic_profile(trace: GenerationTrace, passage_id: str = "") -> ConsistencyProfile:
    scores = []
    for i, m in enumerate(intrinsic_metrics(trace)):
        scores.append(SentenceScore(i, METRIC_MEAN_ENTROPY, m.mean_entropy))
        scores.append(SentenceScore(i, METRIC_ENTROPY_VARIANCE, m.entropy_variance))
        scores.append(SentenceScore(i, METRIC_NLL, m.nll))
    return ConsistencyProfile(
        scores=tuple(scores),
        sample_count=1,
        passage_id=passage_id,
        k_max=trace.k_max,
    )


def intrinsic_metrics_avg(
    prefix: str,
    generator: GeneratorClient,
    n_samples: int = 5,
    seeds: Sequence[int] | None = None,
    max_tokens: int = 64,
    temperature: float = 0.6,
    top_p: float = 0.9,
    logprobs_k: int = 5,
) -> IntrinsicScores:
    """Average intrinsic metrics over regenerations of the next sentence.

    Each sample regenerates the sentence following ``prefix`` (the passage
    as generated so far) with its own seed; the first complete sentence of
    each regeneration is scored and the metrics are averaged. A generator
    failure surfaces as a retriable error carrying the sample index.
    """
    if seeds is None:
        seeds = list(range(n_samples))
    if len(seeds) != n_samples:
        raise ValidationError("seeds must match n_samples", field="seeds")
    samples = []
    for i, seed in enumerate(seeds):
        request = GeneratorRequest(
            prompt=prefix,
            max_tokens=max_tokens,
            temperature=temperature,
            top_p=top_p,
            seed=seed,
            logprobs_k=logprobs_k,
        )
        try:
            completion = generator.complete(request)
        except EndpointError as e:
            raise EndpointError(
                f"regeneration sample {i} failed: {e}", retriable=True, sample_index=i
            ) from e
        trace = completion.trace
        if trace is None:
            raise EndpointError(
                f"regeneration sample {i} returned no trace", retriable=False, sample_index=i
            )
        spans = trace.sentence_token_spans()
        if spans:
            per_sentence = intrinsic_metrics(trace)
            samples.append(per_sentence[0])
        else:
            # No complete sentence: score the whole fragment as one unit.
            fragment = GenerationTrace(
                tokens=trace.tokens,
                sentence_boundaries=(len(trace.tokens),),
                eos_token=trace.eos_token,
            )
            samples.append(intrinsic_metrics(fragment)[0])
    n = len(samples)
    return IntrinsicScores(
        mean_entropy=sum(s.mean_entropy for s in samples) / n,
        entropy_variance=sum(s.entropy_variance for s in samples) / n,
        nll=sum(s.nll for s in samples) / n,
    )


# ---------------------------------------------------------------------------
# Sampling-based metrics
# ---------------------------------------------------------------------------


def selfcheck_similarity(
    sentence: str,
    samples: SamplePassageSet,
    backend: SimilarityBackend,
) -> float:
    """1 minus the mean best-match similarity against each sampled passage.

    0 means every sample contains a close match (consistent); 1 means no
    sample does. A sample with zero sentences contributes similarity 0 and
    logs a warning.
    """
    best: list[float] = []
    for passage in samples.samples:
        if not passage.sentences:
            log.warning("sampled passage (seed=%d) has no sentences", passage.seed)
            best.append(0.0)
            continue
        scores = backend.similarity_batch([(sentence, cand) for cand in passage.sentences])
        best.append(max(scores))
    return 1.0 - sum(best) / len(best)


def selfcheck_similarity_profile(
    sentences: Sequence[str],
    samples: SamplePassageSet,
    backend: SimilarityBackend,
    passage_id: str = "",
) -> ConsistencyProfile:
    """Similarity scores for every sentence of a passage, one batched call.

    Equivalent to calling :func:`selfcheck_similarity` per sentence, but
    all (sentence, candidate) pairs go to the backend in a single batch in
    deterministic order.
    """
    pairs: list[tuple[str, str]] = []
    for sentence in sentences:
        for passage in samples.samples:
            for cand in passage.sentences:
                pairs.append((sentence, cand))
    flat = backend.similarity_batch(pairs) if pairs else []
    scores = []
    pos = 0
    for i, sentence in enumerate(sentences):
        best: list[float] = []
        for passage in samples.samples:
            n_cand = len(passage.sentences)
            if n_cand == 0:
                log.warning("sampled passage (seed=%d) has no sentences", passage.seed)
                best.append(0.0)
                continue
            best.append(max(flat[pos : pos + n_cand]))
            pos += n_cand
        value = 1.0 - sum(best) / len(best)
        scores.append(SentenceScore(i, METRIC_SIMILARITY, value))
    return ConsistencyProfile(
        scores=tuple(scores),
        sample_count=samples.n_samples,
        similarity_backend=getattr(backend, "name", backend.__class__.__name__),
        passage_id=passage_id,
    )


def _ngram_tokens(text: str) -> list[str]:
    from .clients import overlap_tokens

    return overlap_tokens(text)


class NgramScorer:
    """Add-one-smoothed n-gram model over a passage and its resamples.

    Trained on the token streams of the original passage and every sample;
    a sentence's score is the mean negative log-probability of its tokens,
    each conditioned on up to n-1 preceding tokens of the same sentence
    (shorter histories near the start use what exists). Higher = less
    consistent with the sampled consensus.
    """

    def __init__(self, passages: Sequence[str], n: int):
        if n < 1:
            raise ValidationError("n must be >= 1", field="n")
        self.n = n
        self.context_counts: Counter = Counter()
        self.ngram_counts: Counter = Counter()
        vocab: set[str] = set()
        for passage in passages:
            tokens = _ngram_tokens(passage)
            vocab.update(tokens)
            for j, tok in enumerate(tokens):
                context = tuple(tokens[max(0, j - (n - 1)) : j])
                self.context_counts[context] += 1
                self.ngram_counts[context + (tok,)] += 1
        # +1 reserves smoothed mass for unseen tokens.
        self.vocab_size = len(vocab) + 1

    def token_neg_logprob(self, context: tuple[str, ...], token: str) -> float:
        c_ngram = self.ngram_counts[context + (token,)]
        c_context = self.context_counts[context]
        return -math.log((c_ngram + 1) / (c_context + self.vocab_size))

    def sentence_score(self, sentence: str) -> float:
        tokens = _ngram_tokens(sentence)
        if not tokens:
            return 0.0
        total = 0.0
        for j, tok in enumerate(tokens):
            context = tuple(tokens[max(0, j - (self.n - 1)) : j])
            total += self.token_neg_logprob(context, tok)
        return total / len(tokens)


def selfcheck_ngram(
    sentences: Sequence[str],
    samples: SamplePassageSet,
    n: int,
) -> list[float]:
    """Per-sentence n-gram novelty scores against the sampled consensus."""
    passages = [" ".join(samples.original_sentences)]
    passages += [" ".join(p.sentences) for p in samples.samples]
    scorer = NgramScorer(passages, n)
    return [scorer.sentence_score(s) for s in sentences]


def build_profile(
    sentences: Sequence[str],
    samples: SamplePassageSet,
    backend: SimilarityBackend,
    ngram_orders: Sequence[int] = (1, 5, 10),
    passage_id: str = "",
) -> ConsistencyProfile:
    """Similarity plus n-gram scores for a passage, in one profile."""
    sim = selfcheck_similarity_profile(sentences, samples, backend, passage_id)
    scores = list(sim.scores)
    metric_names = {1: METRIC_NGRAM_1, 5: METRIC_NGRAM_5, 10: METRIC_NGRAM_10}
    for n in ngram_orders:
        values = selfcheck_ngram(sentences, samples, n)
        name = metric_names.get(n)
        if name is None:
            raise ValidationError(f"no metric name for n-gram order {n}", field="ngram_orders")
        scores.extend(SentenceScore(i, name, v) for i, v in enumerate(values))
    return ConsistencyProfile(
        scores=tuple(scores),
        sample_count=samples.n_samples,
        similarity_backend=sim.similarity_backend,
        passage_id=passage_id,
    )


# ---------------------------------------------------------------------------
# Correlation with fact accuracy
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CorrelationResult:
    metric: str
    r: float | None
    n_sentences: int
    note: str = ""


def sentence_fact_accuracy(paragraph: AnnotatedParagraph) -> list[float | None]:
    """Fraction of supported facts per sentence; None where a sentence has
    no facts (those sentences are excluded from correlations)."""
    totals = [0] * len(paragraph.sentences)
    supported = [0] * len(paragraph.sentences)
    for f in paragraph.facts:
        totals[f.sentence_index] += 1
        supported[f.sentence_index] += f.label
    return [s / t if t else None for s, t in zip(supported, totals)]


def correlate_with_labels(
    accuracy: Sequence[float],
    metric_values: dict[str, Sequence[float]],
) -> list[CorrelationResult]:
    """Pearson r between each metric and per-sentence fact accuracy.

    Zero variance on either side yields an explicit undefined marker
    (r=None) instead of a NaN.
    """
    results = []
    acc = list(accuracy)
    for metric in sorted(metric_values):
        vals = list(metric_values[metric])
        if len(vals) != len(acc):
            raise ValidationError(
                f"metric {metric} has {len(vals)} values for {len(acc)} sentences",
                field="metric_values",
            )
        n = len(acc)
        if n < 2:
            results.append(CorrelationResult(metric, None, n, "fewer than 2 sentences"))
            continue
        if len(set(acc)) == 1 or len(set(vals)) == 1:
            results.append(CorrelationResult(metric, None, n, "zero variance"))
            continue
        r = float(stats.pearsonr(vals, acc).statistic)
        results.append(CorrelationResult(metric, r, n))
    return results
