"""Semantic-drift scoring, drift-point location, and significance testing.

The drift score of a label sequence is the best achievable average of
(a) the supported-fact proportion left of a split point and (b) the
unsupported-fact proportion right of it, over all admissible splits. A
score near 1 means the sequence is cleanly correct-then-incorrect; a
sequence with no separation scores near 0.5.

``sd_score`` is the direct reference evaluation (re-sums both sides for
every split); ``sd_score_fast`` is the O(N) prefix-sum evaluation. Both
compute each split value as ``0.5 * (left_sum / k + right_sum / (N - k))``
on exact integer sums, so their results are bit-identical by construction
and the pair forms a self-checking dual route.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import AnnotatedParagraph, FactLabels, fact_sequence

SCORE_BIN_WIDTH = 0.05
POSITION_BIN_WIDTH = 0.1
HIGH_DRIFT_THRESHOLD = 0.75
FIRST_DECILE = 0.1


@dataclass(frozen=True, slots=True)
class DriftResult:
    """Outcome of drift scoring for one label sequence.

    ``drift_point`` is the admissible split index attaining the maximum
    (smallest index on ties), or ``None`` when no admissible split exists.
    ``per_split_scores`` holds the raw two-sided split values (before
    halving) for k = max(m, 0) .. N - m, when requested.
    """

    score: float
    drift_point: int | None
    m: int
    n_facts: int
    left_fraction: float | None = None
    right_fraction: float | None = None
    per_split_scores: tuple[float, ...] | None = None

    @property
    def relative_position(self) -> float | None:
        if self.drift_point is None or self.n_facts == 0:
            return None
        return self.drift_point / self.n_facts


def _side_fraction(total: int, count: int) -> float:
    # An empty side contributes nothing to the split average.
    return total / count if count else 0.0


def sd_score(labels: Sequence[int], m: int = 0, keep_splits: bool = False) -> DriftResult:
    """Reference drift score: evaluates every admissible split directly.

    A split at k is admissible when k >= m, N - k >= m and N >= 2m; ties
    between equal-valued splits resolve to the smallest k. With no
    admissible split the score is 0 and the drift point is absent.
    """
    seq = fact_sequence(labels)
    if m < 0:
        raise ValueError(f"truncation parameter must be non-negative, got {m}")
    n = len(seq)
    if n == 0 or n < 2 * m:
        return DriftResult(0.0, None, m, n, per_split_scores=() if keep_splits else None)
    best_k = None
    best_value = 0.0
    splits = []
    for k in range(m, n - m + 1):
        left = _side_fraction(sum(seq[:k]), k)
        right = _side_fraction(sum(1 - s for s in seq[k:]), n - k)
        value = left + right
        splits.append(value)
        if best_k is None or value > best_value:
            best_k = k
            best_value = value
    left = _side_fraction(sum(seq[:best_k]), best_k)
    right = _side_fraction(sum(1 - s for s in seq[best_k:]), n - best_k)
    return DriftResult(
        score=0.5 * best_value,
        drift_point=best_k,
        m=m,
        n_facts=n,
        left_fraction=left,
        right_fraction=right,
        per_split_scores=tuple(splits) if keep_splits else None,
    )


def sd_score_fast(labels: Sequence[int], m: int = 0, keep_splits: bool = False) -> DriftResult:
    """Prefix-sum drift score; exactly equal to :func:`sd_score` on all inputs."""
    seq = fact_sequence(labels)
    if m < 0:
        raise ValueError(f"truncation parameter must be non-negative, got {m}")
    n = len(seq)
    if n == 0 or n < 2 * m:
        return DriftResult(0.0, None, m, n, per_split_scores=() if keep_splits else None)
    prefix = [0] * (n + 1)
    for i, s in enumerate(seq):
        prefix[i + 1] = prefix[i] + s
    total_ones = prefix[n]
    best_k = None
    best_value = 0.0
    splits = []
    for k in range(m, n - m + 1):
        left_sum = prefix[k]
        right_zeros = (n - k) - (total_ones - prefix[k])
        # Same arithmetic expression as sd_score so floats match exactly.
        value = _side_fraction(left_sum, k) + _side_fraction(right_zeros, n - k)
        splits.append(value)
        if best_k is None or value > best_value:
            best_k = k
            best_value = value
    left = _side_fraction(prefix[best_k], best_k)
    right = _side_fraction((n - best_k) - (total_ones - prefix[best_k]), n - best_k)
    return DriftResult(
        score=0.5 * best_value,
        drift_point=best_k,
        m=m,
        n_facts=n,
        left_fraction=left,
        right_fraction=right,
        per_split_scores=tuple(splits) if keep_splits else None,
    )


# ---------------------------------------------------------------------------
# Permutation significance test
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class PermutationTestResult:
    """Shuffle-test outcome for one sequence.

    ``p_value`` uses the add-one estimator (count + 1) / (n + 1) counting
    shuffles that score >= the observed value; it is never exactly zero.
    ``raw_proportion`` is the plain count / n reported alongside it.
    ``randomized_p_value`` splits tied scores with a uniform draw, the
    construction that is exactly uniform under the null for discrete
    statistics; calibration diagnostics use it because the drift score
    has substantial tie mass and the deterministic estimator is
    conservative by design.
    """

    p_value: float
    raw_proportion: float
    randomized_p_value: float
    n_shuffles: int
    seed: int
    observed_score: float
    m: int


def _shuffle_rng(seed: int, index: int) -> random.Random:
    # Per-shuffle derived RNG: any sharding of the index range reproduces
    # the sequential result for a fixed master seed.
    return random.Random(f"{seed}:{index}")


def permutation_pvalue(
    labels: Sequence[int],
    m: int = 0,
    n_shuffles: int = 1000,
    seed: int = 0,
) -> PermutationTestResult:
    """Probability that a random relabeling scores at least as high.

    Shuffles the labels ``n_shuffles`` times and counts shuffles whose
    drift score is >= the observed score. Deterministic for a fixed seed.
    """
    if n_shuffles < 1:
        raise ValueError(f"n_shuffles must be >= 1, got {n_shuffles}")
    seq = list(fact_sequence(labels))
    observed = sd_score_fast(seq, m).score
    greater = 0
    equal = 0
    for i in range(n_shuffles):
        rng = _shuffle_rng(seed, i)
        shuffled = seq[:]
        rng.shuffle(shuffled)
        score = sd_score_fast(shuffled, m).score
        if score > observed:
            greater += 1
        elif score == observed:
            equal += 1
    count = greater + equal
    tie_break = random.Random(f"{seed}:tie").random()
    return PermutationTestResult(
        p_value=(count + 1) / (n_shuffles + 1),
        raw_proportion=count / n_shuffles,
        randomized_p_value=(greater + tie_break * (equal + 1)) / (n_shuffles + 1),
        n_shuffles=n_shuffles,
        seed=seed,
        observed_score=observed,
        m=m,
    )


# ---------------------------------------------------------------------------
# Corpus-level summaries
# ---------------------------------------------------------------------------


def _labels_of(item) -> FactLabels:
    if isinstance(item, AnnotatedParagraph):
        return item.labels()
    return fact_sequence(item)


def score_histogram(scores: Iterable[float]) -> list[int]:
    """Counts over 20 fixed bins of width 0.05 on [0, 1]; the last bin is
    right-closed so a score of exactly 1.0 lands in it."""
    bins = [0] * 20
    for s in scores:
        bins[min(int(s / SCORE_BIN_WIDTH), 19)] += 1
    return bins


def position_histogram(positions: Iterable[float]) -> list[int]:
    """Counts over 10 fixed bins of width 0.1 on [0, 1], last bin closed."""
    bins = [0] * 10
    for p in positions:
        bins[min(int(p / POSITION_BIN_WIDTH), 9)] += 1
    return bins


@dataclass(frozen=True, slots=True)
class SweepRow:
    """Per-m summary produced by :func:`truncation_sweep`."""

    m: int
    n_sequences: int
    n_with_drift_point: int
    mean_score: float
    frac_above_threshold: float
    score_hist: tuple[int, ...]
    rel_position_hist: tuple[int, ...]
    mean_drift_point: float | None
    mean_relative_position: float | None


def truncation_sweep(
    corpus: Sequence[Sequence[int] | AnnotatedParagraph],
    m_values: Sequence[int],
    threshold: float = HIGH_DRIFT_THRESHOLD,
) -> list[SweepRow]:
    """Score a corpus at several truncation settings.

    Reports, per m: the score distribution, the drift-position distribution
    (absolute mean and relative histogram), and the fraction of sequences
    scoring above ``threshold``.
    """
    if not corpus:
        raise ValueError("truncation_sweep requires a non-empty corpus")
    label_sets = [_labels_of(item) for item in corpus]
    rows = []
    for m in m_values:
        results = [sd_score_fast(labels, m) for labels in label_sets]
        scores = [r.score for r in results]
        pointed = [r for r in results if r.drift_point is not None]
        rel = [r.relative_position for r in pointed if r.relative_position is not None]
        rows.append(
            SweepRow(
                m=m,
                n_sequences=len(results),
                n_with_drift_point=len(pointed),
                mean_score=sum(scores) / len(scores),
                frac_above_threshold=sum(1 for s in scores if s > threshold) / len(scores),
                score_hist=tuple(score_histogram(scores)),
                rel_position_hist=tuple(position_histogram(rel)),
                mean_drift_point=(
                    sum(r.drift_point for r in pointed) / len(pointed) if pointed else None
                ),
                mean_relative_position=(sum(rel) / len(rel) if rel else None),
            )
        )
    return rows


@dataclass(frozen=True, slots=True)
class DriftRow:
    topic: str
    n_facts: int
    score: float
    drift_point: int | None
    relative_position: float | None
    popularity_class: str


@dataclass(frozen=True, slots=True)
class DriftDistributionReport:
    """Binned summaries of drift behavior over an annotated corpus."""

    m: int
    rows: tuple[DriftRow, ...]
    score_hist: tuple[int, ...]
    rel_position_hist: tuple[int, ...]
    class_densities: tuple[tuple[str, tuple[float, ...]], ...]
    first_decile_fraction: float | None

    @property
    def mean_score(self) -> float:
        return sum(r.score for r in self.rows) / len(self.rows) if self.rows else 0.0


def drift_distribution_report(
    paragraphs: Sequence[AnnotatedParagraph],
    m: int = 0,
) -> DriftDistributionReport:
    """Histogram the drift scores and drift positions of a corpus.

    Score bins are 0.05 wide and position bins 0.1 wide so emitted report
    files are byte-stable. Per-popularity-class densities are normalized
    within each class. The first-decile fraction is computed over
    paragraphs that have a drift point (relative position < 0.1).
    """
    rows = []
    for p in paragraphs:
        r = sd_score_fast(p.labels(), m)
        rows.append(
            DriftRow(
                topic=p.topic,
                n_facts=r.n_facts,
                score=r.score,
                drift_point=r.drift_point,
                relative_position=r.relative_position,
                popularity_class=p.popularity_class,
            )
        )
    scores = [r.score for r in rows]
    rel = [r.relative_position for r in rows if r.relative_position is not None]
    by_class: dict[str, list[float]] = {}
    for r in rows:
        by_class.setdefault(r.popularity_class, []).append(r.score)
    densities = []
    for cls in sorted(by_class):
        hist = score_histogram(by_class[cls])
        total = sum(hist)
        densities.append((cls, tuple(c / total for c in hist)))
    first_decile = None
    if rel:
        first_decile = sum(1 for p_ in rel if p_ < FIRST_DECILE) / len(rel)
    return DriftDistributionReport(
        m=m,
        rows=tuple(rows),
        score_hist=tuple(score_histogram(scores)),
        rel_position_hist=tuple(position_histogram(rel)),
        class_densities=tuple(densities),
        first_decile_fraction=first_decile,
    )


@dataclass(frozen=True, slots=True)
class FilterResult:
    kept: tuple
    n_all_correct: int
    n_all_incorrect: int


def filter_degenerate(corpus: Sequence) -> FilterResult:
    """Drop sequences whose labels are constant, counting each kind.

    Paragraphs with zero facts are retained; they are a no-answer case,
    not a degenerate separation.
    """
    kept = []
    n_correct = 0
    n_incorrect = 0
    for item in corpus:
        labels = _labels_of(item)
        if labels and all(s == 1 for s in labels):
            n_correct += 1
        elif labels and all(s == 0 for s in labels):
            n_incorrect += 1
        else:
            kept.append(item)
    return FilterResult(tuple(kept), n_correct, n_incorrect)
