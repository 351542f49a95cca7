"""Corpus types, validation, and JSONL round-trips."""

import json

import pytest

from semdrift.corpus import (
    AnnotatedParagraph,
    AtomicFact,
    GenerationTrace,
    SampledPassage,
    SamplePassageSet,
    TokenStep,
    fact_sequence,
    ingest_corpus,
    normalize_popularity,
    paragraph_from_record,
    paragraph_to_record,
    serialize_corpus,
    trace_from_record,
    trace_to_record,
    write_corpus,
)
from semdrift.errors import ValidationError


def make_paragraph(labels, topic="alice", cls="unknown"):
    sentences = tuple(f"Sentence {i} about {topic}." for i in range(len(labels)))
    facts = tuple(
        AtomicFact(text=f"fact {i}", label=l, sentence_index=i, fact_index=i)
        for i, l in enumerate(labels)
    )
    return AnnotatedParagraph(topic=topic, sentences=sentences, facts=facts, popularity_class=cls)


class TestFactSequence:
    def test_valid(self):
        assert fact_sequence([1, 0, 1]) == (1, 0, 1)
        assert fact_sequence([]) == ()
        assert fact_sequence([True, False]) == (1, 0)

    def test_invalid_element(self):
        with pytest.raises(ValidationError) as e:
            fact_sequence([1, 2])
        assert "position 1" in str(e.value)


class TestParagraphInvariants:
    def test_labels_projection(self):
        p = make_paragraph([1, 0, 1])
        assert p.labels() == (1, 0, 1)
        assert p.n_facts == 3

    def test_noncontiguous_fact_index(self):
        facts = (
            AtomicFact("a", 1, 0, 0),
            AtomicFact("b", 0, 0, 2),
        )
        with pytest.raises(ValidationError) as e:
            AnnotatedParagraph(topic="t", sentences=("S one.",), facts=facts)
        assert e.value.field == "fact_index"

    def test_sentence_index_out_of_range(self):
        facts = (AtomicFact("a", 1, 3, 0),)
        with pytest.raises(ValidationError) as e:
            AnnotatedParagraph(topic="t", sentences=("S one.",), facts=facts)
        assert e.value.field == "sentence_index"

    def test_empty_sentence_rejected(self):
        with pytest.raises(ValidationError):
            AnnotatedParagraph(topic="t", sentences=("ok.", "  "), facts=())

    def test_popularity_normalization(self):
        assert normalize_popularity("Very Rare") == "very-rare"
        assert normalize_popularity("very_frequent") == "very-frequent"
        assert normalize_popularity(None) == "unknown"
        assert normalize_popularity("weird") == "unknown"


class TestTraceInvariants:
    def test_valid_trace(self):
        t = GenerationTrace(
            tokens=(
                TokenStep("Hi", -0.1, (("Hi", -0.1), ("Yo", -2.0))),
                TokenStep(".", -0.2, ((".", -0.2), ("!", -1.5))),
            ),
            sentence_boundaries=(2,),
            eos_token="</s>",
        )
        assert t.k_max == 2
        assert t.sentence_token_spans() == [(0, 2)]
        assert t.sentence_index_of_token(0) == 0
        assert t.sentence_index_of_token(1) == 0

    def test_positive_logprob_rejected(self):
        with pytest.raises(ValidationError):
            TokenStep("x", 0.5, ())

    def test_unsorted_alternatives_rejected(self):
        with pytest.raises(ValidationError):
            TokenStep("x", -1.0, (("a", -3.0), ("b", -1.0)))

    def test_ragged_alternatives_rejected(self):
        with pytest.raises(ValidationError):
            GenerationTrace(
                tokens=(
                    TokenStep("a", -1.0, (("a", -1.0),)),
                    TokenStep("b", -1.0, (("b", -1.0), ("c", -2.0))),
                ),
                sentence_boundaries=(),
                eos_token="</s>",
            )

    def test_nonincreasing_boundaries_rejected(self):
        tok = TokenStep("a", -1.0, (("a", -1.0),))
        with pytest.raises(ValidationError):
            GenerationTrace(tokens=(tok, tok), sentence_boundaries=(2, 2), eos_token="</s>")

    def test_boundary_beyond_tokens_rejected(self):
        tok = TokenStep("a", -1.0, (("a", -1.0),))
        with pytest.raises(ValidationError):
            GenerationTrace(tokens=(tok,), sentence_boundaries=(5,), eos_token="</s>")


class TestSamplePassageSet:
    def test_requires_a_sample(self):
        with pytest.raises(ValidationError):
            SamplePassageSet(original_sentences=("A.",), samples=())

    def test_seeds_exposed(self):
        s = SamplePassageSet(
            original_sentences=("A.",),
            samples=(SampledPassage(("A.",), seed=3), SampledPassage(("B.",), seed=9)),
        )
        assert s.seeds == (3, 9)
        assert s.n_samples == 2


class TestIngestion:
    def test_single_line_paragraph(self, tmp_path):
        record = {
            "topic": "alice",
            "sentences": ["One.", "Two.", "Three."],
            "facts": [
                {"text": "f0", "label": 1, "sentence_index": 0, "fact_index": 0},
                {"text": "f1", "label": 0, "sentence_index": 1, "fact_index": 1},
                {"text": "f2", "label": 1, "sentence_index": 2, "fact_index": 2},
            ],
        }
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        result = ingest_corpus(path, "annotated-jsonl")
        assert result.ok
        assert len(result.records) == 1
        assert result.records[0].labels() == (1, 0, 1)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        result = ingest_corpus(path)
        assert result.records == [] and result.issues == []

    def test_out_of_range_sentence_index_reported(self, tmp_path):
        record = {
            "topic": "alice",
            "sentences": ["Only one."],
            "facts": [{"text": "f0", "label": 1, "sentence_index": 4, "fact_index": 0}],
        }
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        result = ingest_corpus(path)
        assert result.records == []
        assert len(result.issues) == 1
        assert result.issues[0].line_no == 1
        assert result.issues[0].field == "sentence_index"

    def test_bad_json_line_reported_good_lines_kept(self, tmp_path):
        good = json.dumps(paragraph_to_record(make_paragraph([1, 0])))
        path = tmp_path / "mixed.jsonl"
        path.write_text("{not json\n" + good + "\n", encoding="utf-8")
        result = ingest_corpus(path)
        assert len(result.records) == 1
        assert len(result.issues) == 1
        assert result.issues[0].line_no == 1

    def test_unreadable_file_raises(self, tmp_path):
        with pytest.raises(OSError):
            ingest_corpus(tmp_path / "missing.jsonl")

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            ingest_corpus(tmp_path / "x", "csv")


class TestRoundTrip:
    def test_paragraph_records_round_trip(self, tmp_path):
        paragraphs = [
            make_paragraph([1, 0, 1], topic="a", cls="rare"),
            make_paragraph([], topic="b"),
            make_paragraph([0, 0], topic="c", cls="very-frequent"),
        ]
        path = tmp_path / "c.jsonl"
        write_corpus(paragraphs, path)
        result = ingest_corpus(path)
        assert result.ok
        assert result.records == paragraphs

    def test_unknown_fields_preserved(self):
        record = {
            "topic": "a",
            "sentences": ["One."],
            "facts": [{"text": "f", "label": 1, "sentence_index": 0, "fact_index": 0}],
            "popularity_class": "rare",
            "source_strategy": "baseline",
            "zeta": [1, 2],
            "alpha": "keep me",
        }
        p = paragraph_from_record(record)
        out = paragraph_to_record(p)
        assert out["zeta"] == [1, 2]
        assert out["alpha"] == "keep me"

    def test_serialization_is_canonical(self):
        p = make_paragraph([1, 0], topic="x")
        lines1 = list(serialize_corpus([p]))
        lines2 = list(serialize_corpus([paragraph_from_record(json.loads(lines1[0]))]))
        assert lines1 == lines2

    def test_trace_round_trip(self):
        t = GenerationTrace(
            tokens=(
                TokenStep("Hello", -0.5, (("Hello", -0.5), ("Hi", -1.5))),
                TokenStep(" world", -0.25, ((" world", -0.25), (" there", -2.0))),
            ),
            sentence_boundaries=(2,),
            eos_token="</s>",
        )
        assert trace_from_record(trace_to_record(t)) == t

    def test_trace_k_max_mismatch_detected(self):
        record = trace_to_record(
            GenerationTrace(
                tokens=(TokenStep("a", -1.0, (("a", -1.0),)),),
                sentence_boundaries=(),
                eos_token="</s>",
            )
        )
        record["k_max"] = 7
        with pytest.raises(ValidationError):
            trace_from_record(record)
