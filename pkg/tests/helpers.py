"""Shared builders and stub clients for the test suite."""

from __future__ import annotations

from semdrift.clients import Completion
from semdrift.corpus import (
    AnnotatedParagraph,
    AtomicFact,
    GenerationTrace,
    SampledPassage,
    SamplePassageSet,
    TokenStep,
)


def make_paragraph(labels, topic="alice", cls="unknown", facts_per_sentence=1, strategy="baseline"):
    """Paragraph with ``facts_per_sentence`` facts mapped to each sentence."""
    n_sentences = -(-len(labels) // facts_per_sentence) if labels else 1
    sentences = tuple(f"Sentence {i} about {topic}." for i in range(n_sentences))
    facts = tuple(
        AtomicFact(
            text=f"fact {i}",
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
        popularity_class=cls,
        source_strategy=strategy,
    )


def make_trace(token_specs, boundaries=None, eos="</s>"):
    """Trace from (text, logprob, [(alt, lp), ...]) triples."""
    tokens = tuple(
        TokenStep(text=t, logprob=lp, top_alternatives=tuple(alts))
        for t, lp, alts in token_specs
    )
    if boundaries is None:
        boundaries = (len(tokens),) if tokens else ()
    return GenerationTrace(tokens=tokens, sentence_boundaries=tuple(boundaries), eos_token=eos)


def uniform_alts(texts, logprob):
    return [(t, logprob) for t in texts]


def make_samples(*passages, seeds=None, original=()):
    seeds = seeds or list(range(len(passages)))
    return SamplePassageSet(
        original_sentences=tuple(original),
        samples=tuple(
            SampledPassage(tuple(p), seed=s) for p, s in zip(passages, seeds)
        ),
    )


class FnGenerator:
    """Generator stub driven by a (request -> text | Completion) function."""

    def __init__(self, fn):
        self.fn = fn
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        out = self.fn(request)
        return out if isinstance(out, Completion) else Completion(text=out)


class ScriptedGenerator:
    """Generator stub returning queued completions in order."""

    def __init__(self, outputs):
        self.outputs = list(outputs)
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        out = self.outputs.pop(0)
        return out if isinstance(out, Completion) else Completion(text=out)


class FnBackend:
    """Similarity stub driven by a (reference, candidate) -> score function."""

    name = "fn-backend"

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def similarity_batch(self, pairs):
        self.calls += 1
        return [self.fn(ref, cand) for ref, cand in pairs]


class ConstantBackend(FnBackend):
    def __init__(self, value):
        super().__init__(lambda ref, cand: value)
        self.name = f"constant-{value}"
