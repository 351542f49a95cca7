"""Drift scoring: frozen examples, oracle equivalence, shuffle test."""

import random

import pytest

from semdrift.drift import (
    filter_degenerate,
    permutation_pvalue,
    sd_score,
    sd_score_fast,
    truncation_sweep,
)

# 17-fact sequence whose best split is k=8 with side proportions 7/8 and 7/9
# (verified by exhaustive search over all split placements).
SEVENTEEN = [1, 1, 1, 1, 0, 1, 1, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0]


class TestSdScore:
    def test_seventeen_fact_split(self):
        r = sd_score(SEVENTEEN, m=1)
        assert r.score == 0.5 * (7 / 8 + 7 / 9)
        assert r.drift_point == 8
        assert round(r.left_fraction, 2) == 0.88
        assert round(r.right_fraction, 2) == 0.78
        assert round(r.score, 2) == 0.83

    def test_perfect_separation(self):
        r = sd_score([1, 1, 1, 0, 0, 0], m=1)
        assert r.score == 1.0
        assert r.drift_point == 3

    def test_too_short_for_truncation(self):
        r = sd_score([1, 1], m=3)
        assert r.score == 0.0
        assert r.drift_point is None

    def test_reversed_drift_scores_low(self):
        # Brute force over k in 1..5 puts the max at k=1 with value 0.4.
        r = sd_score([0, 0, 0, 1, 1, 1], m=1)
        assert r.score == pytest.approx(0.2)
        assert r.drift_point == 1

    def test_empty_sequence(self):
        r = sd_score([], m=0)
        assert r.score == 0.0
        assert r.drift_point is None

    def test_tie_breaks_to_smallest_k(self):
        # k=1 and k=3 both reach (1 + 2/3); the smaller split wins.
        r = sd_score([1, 0, 1, 0], m=1)
        assert r.drift_point == 1
        assert r.score == 0.5 * (1 + 2 / 3)

    def test_rejects_bad_labels(self):
        from semdrift.errors import ValidationError

        with pytest.raises(ValidationError):
            sd_score([1, 2, 0], m=0)

    def test_rejects_negative_m(self):
        with pytest.raises(ValueError):
            sd_score([1, 0], m=-1)

    def test_per_split_scores_expose_raw_values(self):
        r = sd_score([1, 1, 0, 0], m=1, keep_splits=True)
        # k = 1..3: values are left_frac + right_frac before halving.
        assert r.per_split_scores == (1 / 1 + 2 / 3, 2 / 2 + 2 / 2, 2 / 3 + 1 / 1)
        assert r.score == 0.5 * max(r.per_split_scores)


class TestFastEquivalence:
    def test_matches_on_examples(self):
        cases = [
            (SEVENTEEN, 1),
            ([1, 1, 1, 0, 0, 0], 1),
            ([1, 1], 3),
            ([0, 0, 0, 1, 1, 1], 1),
            ([], 0),
            ([1], 0),
            ([0], 0),
        ]
        for labels, m in cases:
            a = sd_score(labels, m, keep_splits=True)
            b = sd_score_fast(labels, m, keep_splits=True)
            assert a == b

    def test_matches_on_random_sequences(self):
        rng = random.Random(1234)
        for _ in range(1000):
            n = rng.randint(0, 100)
            labels = [rng.randint(0, 1) for _ in range(n)]
            m = rng.randint(0, 5)
            a = sd_score(labels, m)
            b = sd_score_fast(labels, m)
            assert a.score == b.score, (labels, m)
            assert a.drift_point == b.drift_point, (labels, m)


class TestPermutation:
    def test_separated_sequence_is_significant(self):
        labels = [1] * 20 + [0] * 20
        r = permutation_pvalue(labels, m=1, n_shuffles=10_000, seed=7)
        assert r.p_value < 0.005
        assert r.observed_score == 1.0

    def test_constant_sequence_is_invariant(self):
        r = permutation_pvalue([1] * 12, m=1, n_shuffles=200, seed=0)
        assert r.p_value == 1.0
        assert r.raw_proportion == 1.0

    def test_deterministic_for_fixed_seed(self):
        labels = [1, 1, 0, 1, 0, 0, 1, 0, 0, 0]
        a = permutation_pvalue(labels, m=1, n_shuffles=500, seed=42)
        b = permutation_pvalue(labels, m=1, n_shuffles=500, seed=42)
        assert a == b

    def test_estimator_identity(self):
        labels = [1, 0, 1, 0, 1, 0]
        r = permutation_pvalue(labels, m=1, n_shuffles=99, seed=3)
        assert r.p_value == (round(r.raw_proportion * 99) + 1) / 100
        assert 0 < r.p_value <= 1

    def test_rejects_zero_shuffles(self):
        with pytest.raises(ValueError):
            permutation_pvalue([1, 0], n_shuffles=0)


class TestTruncationSweep:
    def test_single_sequence_across_m(self):
        rows = truncation_sweep([[1, 1, 1, 0, 0, 0]], m_values=[1, 2, 3])
        assert [r.m for r in rows] == [1, 2, 3]
        # N = 6 = 2m still admits k = 3 at m = 3.
        assert [r.mean_score for r in rows] == [1.0, 1.0, 1.0]

    def test_all_correct_corpus_never_exceeds_threshold(self):
        corpus = [[1] * n for n in range(2, 8)]
        rows = truncation_sweep(corpus, m_values=[0, 1])
        for row in rows:
            assert row.frac_above_threshold == 0.0
            assert row.mean_score <= 0.5

    def test_empty_m_values(self):
        assert truncation_sweep([[1, 0]], m_values=[]) == []

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            truncation_sweep([], m_values=[0])


class TestFilterDegenerate:
    def test_removes_constant_sequences(self):
        r = filter_degenerate([[1, 1], [0, 0], [1, 0]])
        assert r.kept == ([1, 0],)
        assert r.n_all_correct == 1
        assert r.n_all_incorrect == 1

    def test_empty_corpus(self):
        r = filter_degenerate([])
        assert r.kept == ()
        assert (r.n_all_correct, r.n_all_incorrect) == (0, 0)

    def test_no_constant_sequences(self):
        corpus = [[1, 0], [0, 1, 1]]
        r = filter_degenerate(corpus)
        assert list(r.kept) == corpus


class TestDriftDistributionReport:
    def _paragraph(self, labels, topic, cls="unknown"):
        from helpers import make_paragraph

        return make_paragraph(labels, topic=topic, cls=cls)

    def test_first_decile_fraction(self):
        from semdrift.drift import drift_distribution_report

        early = self._paragraph([1] + [0] * 19, "early")   # k=1, rel 0.05
        late = self._paragraph([1] * 19 + [0], "late")     # k=19, rel 0.95
        report = drift_distribution_report([early, late], m=1)
        positions = sorted(r.relative_position for r in report.rows)
        assert positions == [0.05, 0.95]
        assert report.first_decile_fraction == 0.5

    def test_unknown_only_corpus_single_density_group(self):
        from semdrift.drift import drift_distribution_report

        corpus = [self._paragraph([1, 0, 1], f"t{i}") for i in range(3)]
        report = drift_distribution_report(corpus, m=1)
        assert len(report.class_densities) == 1
        assert report.class_densities[0][0] == "unknown"
        assert sum(report.class_densities[0][1]) == pytest.approx(1.0)

    def test_planted_drift_lands_in_expected_bin(self):
        from semdrift.drift import drift_distribution_report

        # Clean separation at 10-15% of 20 facts: all relative positions
        # fall in [0.1, 0.2), which must be the histogram mode.
        corpus = []
        for i in range(30):
            k = 2 + (i % 2)  # rel position 0.10 or 0.15
            corpus.append(self._paragraph([1] * k + [0] * (20 - k), f"t{i}"))
        report = drift_distribution_report(corpus, m=1)
        mode_bin = max(range(10), key=lambda b: report.rel_position_hist[b])
        assert mode_bin == 1
        assert report.rel_position_hist[1] == 30

    def test_histograms_count_everything(self):
        from semdrift.drift import drift_distribution_report

        corpus = [self._paragraph([1, 0, 1, 0], f"t{i}", cls="rare") for i in range(5)]
        report = drift_distribution_report(corpus, m=1)
        assert sum(report.score_hist) == 5
        assert report.mean_score == pytest.approx(
            sum(r.score for r in report.rows) / 5
        )
