"""Synthetic corpora with planted drift, for benchmarks and demos.

Each paragraph gets a prefix of mostly-correct facts and a suffix of
mostly-incorrect ones, with the changeover position drawn uniformly.
The planted position is recorded on the record (``planted_drift_point``)
so evaluations can compare found vs planted splits.
"""

from __future__ import annotations

import random
from typing import Sequence

from .consistency import METRIC_SIMILARITY, ConsistencyProfile, SentenceScore
from .corpus import POPULARITY_CLASSES, AnnotatedParagraph, AtomicFact


def planted_paragraph(
    topic: str,
    rng: random.Random,
    prefix_correct: float = 0.9,
    suffix_correct: float = 0.2,
    min_side: int = 3,
    max_side: int = 12,
    facts_per_sentence: int = 1,
) -> AnnotatedParagraph:
    a = rng.randint(min_side, max_side)
    b = rng.randint(min_side, max_side)
    labels = [1 if rng.random() < prefix_correct else 0 for _ in range(a)]
    labels += [1 if rng.random() < suffix_correct else 0 for _ in range(b)]
    n_sentences = -(-len(labels) // facts_per_sentence)
    sentences = tuple(f"Statement {i} about {topic}." for i in range(n_sentences))
    facts = tuple(
        AtomicFact(
            text=f"{topic} fact {i}",
            label=l,
            sentence_index=i // facts_per_sentence,
            fact_index=i,
        )
        for i, l in enumerate(labels)
    )
    return AnnotatedParagraph(
        topic=topic,
        sentences=sentences,
        facts=facts,
        popularity_class=rng.choice(POPULARITY_CLASSES),
        source_strategy="synthetic-planted",
        extra=(("planted_drift_point", a),),
    )


def planted_corpus(
    n_paragraphs: int = 200,
    seed: int = 0,
    prefix_correct: float = 0.9,
    suffix_correct: float = 0.2,
    min_side: int = 3,
    max_side: int = 12,
    facts_per_sentence: int = 1,
) -> list[AnnotatedParagraph]:
    rng = random.Random(seed)
    return [
        planted_paragraph(
            topic=f"entity-{i:04d}",
            rng=rng,
            prefix_correct=prefix_correct,
            suffix_correct=suffix_correct,
            min_side=min_side,
            max_side=max_side,
            facts_per_sentence=facts_per_sentence,
        )
        for i in range(n_paragraphs)
    ]


def planted_drift_point(paragraph: AnnotatedParagraph) -> int:
    for key, value in paragraph.extra:
        if key == "planted_drift_point":
            return int(value)
    raise KeyError(f"paragraph {paragraph.topic!r} has no planted drift point")


def planted_profile(
    paragraph: AnnotatedParagraph,
    seed: int = 0,
    base: float = 0.2,
    rise: float = 0.3,
    ramp: int = 4,
    noise: float = 0.02,
) -> ConsistencyProfile:
    """Consistency scores a well-behaved scorer would produce.

    Sentences before the planted drift sit near ``base``; afterwards the
    score climbs toward ``base + rise`` over ``ramp`` sentences, so
    different relative-increase thresholds stop at visibly different
    depths. Noise keeps the frontier from being a step function.
    """
    rng = random.Random(f"{seed}:{paragraph.topic}")
    k = planted_drift_point(paragraph)
    drift_sentence = paragraph.facts[k].sentence_index if k < paragraph.n_facts else None
    scores = []
    for i in range(len(paragraph.sentences)):
        value = base
        if drift_sentence is not None and i >= drift_sentence:
            value += rise * min(1.0, (i - drift_sentence + 1) / ramp)
        value += rng.uniform(-noise, noise)
        scores.append(SentenceScore(i, METRIC_SIMILARITY, min(max(value, 0.0), 1.0)))
    return ConsistencyProfile(
        scores=tuple(scores),
        sample_count=3,
        similarity_backend="planted-synthetic",
        passage_id=paragraph.topic,
    )


def planted_profiles(
    corpus: Sequence[AnnotatedParagraph], seed: int = 0, **kwargs
) -> list[ConsistencyProfile]:
    return [planted_profile(p, seed=seed, **kwargs) for p in corpus]
