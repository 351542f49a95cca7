"""Resample-then-rerank decoding controller.

Builds a passage one sentence at a time: sample several candidate
continuations with distinct seeds and identical decoding parameters,
discard candidates whose normalized text already appears in the passage,
and keep the novel candidate with the lowest consistency score (ties go
to the lowest seed). Generation ends when no novel candidate survives,
the token budget is spent, or an optional consistency stop policy fires.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .cache import GeneratorRequest
from .clients import BIOGRAPHY_PROMPT, GeneratorClient, SimilarityBackend
from .consistency import selfcheck_similarity
from .corpus import SampledPassage, SamplePassageSet
from .errors import ConfigurationError, SemdriftError
from .reporting import SessionLog
from .segmentation import (
    is_terminated,
    normalize_for_dedup,
    split_sentences,
    strip_unfinished_tail,
)
from .stopping import KIND_SC_ABSOLUTE, KIND_SC_RELATIVE, StopPolicy, apply_policy

log = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class RerankConfig:
    options_per_sentence: int = 5
    n_reference_samples: int = 3
    max_tokens: int = 500
    sentence_max_tokens: int = 64
    temperature: float = 0.6
    top_p: float = 0.9
    seed: int = 0
    max_sentences: int = 60


@dataclass(frozen=True, slots=True)
class SentenceChoice:
    text: str
    seed: int
    score: float
    n_candidates: int
    n_novel: int


@dataclass(slots=True)
class RerankResult:
    topic: str
    passage: str
    sentences: list[str] = field(default_factory=list)
    choices: list[SentenceChoice] = field(default_factory=list)
    terminated: str = ""
    error: str | None = None
    session: SessionLog = field(default_factory=SessionLog)


def _first_sentence(text: str) -> str | None:
    sentences = split_sentences(text)
    if not sentences:
        return None
    first = sentences[0]
    if not is_terminated(first):
        return None
    return first.strip()


def _sample_references(
    topic: str,
    generator: GeneratorClient,
    config: RerankConfig,
    session: SessionLog,
) -> SamplePassageSet:
    prompt = BIOGRAPHY_PROMPT.format(topic=topic)
    samples = []
    for i in range(config.n_reference_samples):
        seed = config.seed + 1_000_003 + i
        completion = generator.complete(
            GeneratorRequest(
                prompt=prompt,
                max_tokens=config.max_tokens,
                temperature=config.temperature,
                top_p=config.top_p,
                seed=seed,
            )
        )
        session.add_generator_pass(len(completion.text.split()))
        cleaned = strip_unfinished_tail(completion.text)
        samples.append(SampledPassage(tuple(split_sentences(cleaned)), seed=seed))
    return SamplePassageSet(
        original_sentences=(),
        samples=tuple(samples),
        temperature=config.temperature,
        top_p=config.top_p,
    )


def rerank_generate(
    topic: str,
    generator: GeneratorClient,
    backend: SimilarityBackend,
    config: RerankConfig = RerankConfig(),
    stop_policy: StopPolicy | None = None,
) -> RerankResult:
    """Generate a passage for ``topic`` by per-sentence best-of-N selection.

    Candidate scoring uses the consistency score against N reference
    passages sampled up front for the topic. A generator or scorer failure
    aborts the run but preserves the partial passage and the error record.
    """
    if stop_policy is not None and stop_policy.kind not in (KIND_SC_RELATIVE, KIND_SC_ABSOLUTE):
        raise ConfigurationError(
            f"rerank supports consistency stop policies only, got {stop_policy.kind}"
        )
    result = RerankResult(topic=topic, passage="")
    prompt_base = BIOGRAPHY_PROMPT.format(topic=topic)
    try:
        references = _sample_references(topic, generator, config, result.session)
    except SemdriftError as e:
        result.error = f"reference sampling failed: {e}"
        result.terminated = "error"
        return result

    seen: set[str] = set()
    chosen_scores: list[float] = []
    tokens_used = 0
    for t in range(config.max_sentences):
        if tokens_used >= config.max_tokens:
            result.terminated = "max-tokens"
            break
        prompt = prompt_base + (" " + result.passage if result.passage else "")
        candidates: list[tuple[int, str]] = []
        try:
            for j in range(config.options_per_sentence):
                seed = config.seed + 1000 * t + j
                completion = generator.complete(
                    GeneratorRequest(
                        prompt=prompt,
                        max_tokens=config.sentence_max_tokens,
                        temperature=config.temperature,
                        top_p=config.top_p,
                        seed=seed,
                    )
                )
                result.session.add_generator_pass(len(completion.text.split()))
                sentence = _first_sentence(completion.text)
                if sentence:
                    candidates.append((seed, sentence))
        except SemdriftError as e:
            result.error = f"generator failed at sentence {t}: {e}"
            result.terminated = "error"
            break
        if (
            config.temperature > 0
            and len(candidates) > 1
            and len({c for _, c in candidates}) == 1
        ):
            log.warning(
                "all %d candidates identical at temperature %.2f; "
                "backend may be ignoring seeds",
                len(candidates),
                config.temperature,
            )
        novel = [(seed, c) for seed, c in candidates if normalize_for_dedup(c) not in seen]
        if not novel:
            result.terminated = "no-novel-candidates"
            break
        try:
            scored = []
            for seed, c in novel:
                score = selfcheck_similarity(c, references, backend)
                result.session.add_scorer_pairs(
                    sum(len(p.sentences) for p in references.samples)
                )
                scored.append((score, seed, c))
        except SemdriftError as e:
            result.error = f"scorer failed at sentence {t}: {e}"
            result.terminated = "error"
            break
        best_score, best_seed, best_text = min(scored, key=lambda x: (x[0], x[1]))
        tentative = chosen_scores + [best_score]
        if stop_policy is not None:
            decision = apply_policy(stop_policy, profile=tentative)
            if decision.stop_sentence_index is not None and decision.stop_sentence_index <= t:
                result.terminated = f"stop-policy:{decision.reason}"
                break
        chosen_scores.append(best_score)
        seen.add(normalize_for_dedup(best_text))
        result.sentences.append(best_text)
        result.choices.append(
            SentenceChoice(
                text=best_text,
                seed=best_seed,
                score=best_score,
                n_candidates=len(candidates),
                n_novel=len(novel),
            )
        )
        tokens_used += len(best_text.split())
        result.passage = " ".join(result.sentences)
    else:
        result.terminated = "max-sentences"
    result.passage = " ".join(result.sentences)
    return result
