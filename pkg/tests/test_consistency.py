"""Uncertainty and consistency metrics."""

import math

import pytest

from semdrift.clients import Completion, TokenOverlapBackend
from semdrift.consistency import (
    METRIC_SIMILARITY,
    NgramScorer,
    build_profile,
    correlate_with_labels,
    intrinsic_metrics,
    intrinsic_metrics_avg,
    profile_from_record,
    profile_to_record,
    selfcheck_ngram,
    selfcheck_similarity,
    selfcheck_similarity_profile,
    sentence_fact_accuracy,
)
from semdrift.errors import EndpointError, ValidationError

from helpers import (
    ConstantBackend,
    FnBackend,
    FnGenerator,
    make_paragraph,
    make_samples,
    make_trace,
)

LN2 = math.log(2)


class TestIntrinsic:
    def test_degenerate_single_token(self):
        trace = make_trace([("x.", 0.0, [("x.", 0.0)])], boundaries=(1,))
        (m,) = intrinsic_metrics(trace)
        assert m.mean_entropy == 0.0
        assert m.entropy_variance == 0.0
        assert m.nll == 0.0

    def test_uniform_two_way(self):
        alts = [("a", math.log(0.5)), ("b", math.log(0.5))]
        trace = make_trace(
            [("a", math.log(0.5), alts), ("b.", math.log(0.5), alts)], boundaries=(2,)
        )
        (m,) = intrinsic_metrics(trace)
        assert m.mean_entropy == pytest.approx(LN2)
        assert m.entropy_variance == pytest.approx(0.0)
        assert m.nll == pytest.approx(2 * LN2)

    def test_three_token_trace_direct_summation(self):
        # Expected values recomputed here with explicit arithmetic.
        probs = [(0.7, 0.2, 0.1), (0.5, 0.3, 0.2), (0.85, 0.1, 0.05)]
        token_lps = [math.log(0.7), math.log(0.4), math.log(0.9)]
        specs = []
        for i, (dist, lp) in enumerate(zip(probs, token_lps)):
            alts = [(f"t{i}{j}", math.log(p)) for j, p in enumerate(dist)]
            specs.append((f"tok{i}", lp, alts))
        trace = make_trace(specs, boundaries=(3,))
        entropies = [-sum(p * math.log(p) for p in dist) for dist in probs]
        mean_h = sum(entropies) / 3
        var_h = sum((h - mean_h) ** 2 for h in entropies) / 3
        nll = -sum(token_lps)
        (m,) = intrinsic_metrics(trace)
        assert m.mean_entropy == pytest.approx(mean_h)
        assert m.entropy_variance == pytest.approx(var_h)
        assert m.nll == pytest.approx(nll)

    def test_renormalizes_partial_mass(self):
        # Equal logprobs over k alternatives renormalize to uniform-k.
        alts = [("a", math.log(0.2)), ("b", math.log(0.2)), ("c", math.log(0.2))]
        trace = make_trace([("a", math.log(0.2), alts)], boundaries=(1,))
        (m,) = intrinsic_metrics(trace)
        assert m.mean_entropy == pytest.approx(math.log(3))

    def test_two_sentences(self):
        alts = [("x", math.log(0.5)), ("y", math.log(0.5))]
        trace = make_trace(
            [("One.", math.log(0.5), alts), ("Two.", math.log(0.25), alts)],
            boundaries=(1, 2),
        )
        m = intrinsic_metrics(trace)
        assert len(m) == 2
        assert m[0].nll == pytest.approx(LN2)
        assert m[1].nll == pytest.approx(-math.log(0.25))

    def test_zero_token_sentence_is_error(self):
        trace = make_trace([("a.", -0.5, [("a.", -0.5)])], boundaries=(0, 1))
        with pytest.raises(ValidationError) as e:
            intrinsic_metrics(trace)
        assert "boundary" in str(e.value)


class TestIntrinsicAvg:
    def _trace_completion(self, p):
        hi, lo = max(p, 1 - p), min(p, 1 - p)
        alts = [("w", math.log(hi)), ("v", math.log(lo))]
        return Completion(
            text="w v.",
            trace=make_trace(
                [("w", math.log(p), alts), (" v.", math.log(p), alts)], boundaries=(2,)
            ),
        )

    def test_identical_samples_equal_single(self):
        gen = FnGenerator(lambda req: self._trace_completion(0.5))
        avg = intrinsic_metrics_avg("prefix", gen, n_samples=5)
        single = intrinsic_metrics(self._trace_completion(0.5).trace)[0]
        assert avg == single

    def test_one_sample_equals_single(self):
        gen = FnGenerator(lambda req: self._trace_completion(0.5))
        avg = intrinsic_metrics_avg("prefix", gen, n_samples=1)
        assert avg == intrinsic_metrics(self._trace_completion(0.5).trace)[0]

    def test_alternating_stub_averages(self):
        gen = FnGenerator(
            lambda req: self._trace_completion(0.5 if req.seed % 2 == 0 else 0.25)
        )
        avg = intrinsic_metrics_avg("prefix", gen, n_samples=2, seeds=[0, 1])
        a = intrinsic_metrics(self._trace_completion(0.5).trace)[0]
        b = intrinsic_metrics(self._trace_completion(0.25).trace)[0]
        assert avg.mean_entropy == pytest.approx((a.mean_entropy + b.mean_entropy) / 2)
        assert avg.nll == pytest.approx((a.nll + b.nll) / 2)

    def test_failure_carries_sample_index(self):
        def fail_on_third(req):
            if req.seed == 2:
                raise EndpointError("backend down")
            return self._trace_completion(0.5)

        gen = FnGenerator(fail_on_third)
        with pytest.raises(EndpointError) as e:
            intrinsic_metrics_avg("prefix", gen, n_samples=5)
        assert e.value.sample_index == 2
        assert e.value.retriable


class TestSelfcheckSimilarity:
    def test_verbatim_match_scores_zero(self):
        s = "Alice was born in 1901."
        samples = make_samples([s, "Other."], [s], ["Junk.", s])
        assert selfcheck_similarity(s, samples, TokenOverlapBackend()) == 0.0

    def test_constant_backend(self):
        samples = make_samples(["a."], ["b."])
        score = selfcheck_similarity("s.", samples, ConstantBackend(0.25))
        assert score == pytest.approx(0.75)

    def test_mean_of_best_matches(self):
        sims = {"p1": 1.0, "p2": 0.5, "p3": 0.0}
        backend = FnBackend(lambda ref, cand: sims[cand])
        samples = make_samples(["p1"], ["p2"], ["p3"])
        assert selfcheck_similarity("s", samples, backend) == pytest.approx(0.5)

    def test_empty_sample_passage_contributes_full_penalty(self, caplog):
        samples = make_samples(["s"], [])
        with caplog.at_level("WARNING"):
            score = selfcheck_similarity("s", samples, ConstantBackend(1.0))
        assert score == pytest.approx(0.5)
        assert any("no sentences" in r.message for r in caplog.records)

    def test_profile_matches_per_sentence_calls(self):
        sentences = ["Alice swims.", "Bob runs.", "Carol reads."]
        samples = make_samples(
            ["Alice swims.", "Dani naps."], ["Bob runs fast.", "Carol reads."]
        )
        backend = TokenOverlapBackend()
        profile = selfcheck_similarity_profile(sentences, samples, backend)
        for i, s in enumerate(sentences):
            assert profile.values(METRIC_SIMILARITY)[i] == pytest.approx(
                selfcheck_similarity(s, samples, backend)
            )
        assert profile.sample_count == 2
        assert profile.similarity_backend == "token-overlap-f1"

    def test_profile_round_trip(self):
        samples = make_samples(["a."], ["b."])
        profile = build_profile(["a.", "c."], samples, TokenOverlapBackend())
        assert profile_from_record(profile_to_record(profile)) == profile


class TestSelfcheckNgram:
    def test_identical_passages_uniform_scores(self):
        sentences = ["alpha beta.", "alpha beta."]
        samples = make_samples(sentences, sentences, original=sentences)
        scores = selfcheck_ngram(sentences, samples, n=1)
        assert scores[0] == pytest.approx(scores[1])

    def test_single_token_vocabulary_hand_arithmetic(self):
        # Streams: [a a a] and [a a] -> 5 unigrams, vocab size 1 (+1 OOV).
        samples = make_samples(["a a."], original=["a a a."])
        (score,) = selfcheck_ngram(["a a."], samples, n=1)
        expected = -math.log((5 + 1) / (5 + 2))
        assert score == pytest.approx(expected)

    def test_n_larger_than_sentence_is_finite(self):
        samples = make_samples(["tiny bit."], original=["tiny bit."])
        (score,) = selfcheck_ngram(["tiny bit."], samples, n=10)
        assert math.isfinite(score) and score > 0

    def test_unseen_tokens_smoothed(self):
        samples = make_samples(["known words here."], original=["known words here."])
        (score,) = selfcheck_ngram(["totally novel material."], samples, n=1)
        assert math.isfinite(score)

    def test_sample_order_invariance(self):
        a = ["one two.", "three four."]
        b = ["five six."]
        sentences = ["one two six."]
        s1 = selfcheck_ngram(sentences, make_samples(a, b, original=sentences), n=2)
        s2 = selfcheck_ngram(sentences, make_samples(b, a, original=sentences), n=2)
        assert s1 == s2

    def test_novel_sentence_scores_higher(self):
        consensus = ["alice was born in paris.", "alice wrote books."]
        samples = make_samples(consensus, consensus, original=consensus)
        familiar, novel = selfcheck_ngram(
            ["alice was born in paris.", "zebra quantum velvet."], samples, n=1
        )
        assert novel > familiar

    def test_invalid_n(self):
        with pytest.raises(ValidationError):
            NgramScorer(["a."], n=0)


class TestCorrelation:
    def test_perfect_positive_and_negative(self):
        acc = [0.0, 0.25, 0.5, 0.75, 1.0]
        results = correlate_with_labels(
            acc, {"same": acc, "flipped": [1 - a for a in acc]}
        )
        by_name = {r.metric: r for r in results}
        assert by_name["same"].r == pytest.approx(1.0)
        assert by_name["flipped"].r == pytest.approx(-1.0)

    def test_five_point_dataset_matches_formula(self):
        acc = [0.2, 0.9, 0.4, 0.6, 0.1]
        vals = [0.8, 0.1, 0.5, 0.3, 0.95]
        (result,) = correlate_with_labels(acc, {"metric": vals})
        n = len(acc)
        mean_a = sum(acc) / n
        mean_v = sum(vals) / n
        cov = sum((a - mean_a) * (v - mean_v) for a, v in zip(acc, vals))
        var_a = sum((a - mean_a) ** 2 for a in acc)
        var_v = sum((v - mean_v) ** 2 for v in vals)
        expected = cov / math.sqrt(var_a * var_v)
        assert result.r == pytest.approx(expected)
        assert result.n_sentences == 5

    def test_zero_variance_marked_undefined(self):
        (result,) = correlate_with_labels([0.5, 0.5, 0.5], {"m": [1.0, 2.0, 3.0]})
        assert result.r is None
        assert "variance" in result.note

    def test_too_few_points(self):
        (result,) = correlate_with_labels([0.5], {"m": [1.0]})
        assert result.r is None

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            correlate_with_labels([0.1, 0.2], {"m": [1.0]})

    def test_antisymmetry(self):
        acc = [0.1, 0.5, 0.3, 0.9, 0.2, 0.7]
        vals = [2.0, 1.0, 4.0, 0.5, 3.0, 1.5]
        r_pos = correlate_with_labels(acc, {"m": vals})[0].r
        r_neg = correlate_with_labels(acc, {"m": [-v for v in vals]})[0].r
        assert r_pos == pytest.approx(-r_neg)


class TestSentenceFactAccuracy:
    def test_mapping_and_exclusion(self):
        p = make_paragraph([1, 0, 1, 1], facts_per_sentence=2)
        assert sentence_fact_accuracy(p) == [0.5, 1.0]

    def test_zero_fact_sentence_is_none(self):
        from semdrift.corpus import AnnotatedParagraph, AtomicFact

        p = AnnotatedParagraph(
            topic="t",
            sentences=("Has facts.", "No facts here."),
            facts=(AtomicFact("f", 1, 0, 0),),
        )
        assert sentence_fact_accuracy(p) == [1.0, None]
