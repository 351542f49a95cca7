"""Wire-protocol clients for generators, similarity scorers, and QA.

Endpoints speak JSON over HTTP (schemas in docs/FORMATS.md). Every client
has an in-process deterministic counterpart so the whole pipeline runs
offline in tests:

* :class:`EchoGenerator` — deterministic completion stub.
* :class:`TokenOverlapBackend` — token-overlap F1 similarity stub; its
  exact arithmetic is part of the shared backend contract.
* :class:`FixtureQAClient` — answers from a fixed question->answer map.

Endpoint URLs come from config or the environment (``SEMDRIFT_GENERATOR_URL``,
``SEMDRIFT_SIMILARITY_URL``, ``SEMDRIFT_QA_URL``).
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import requests

from .cache import GeneratorRequest, ResponseCache
from .corpus import GenerationTrace, TokenStep
from .errors import CapabilityError, EndpointError, ProtocolError, ValidationError
from .segmentation import is_terminated, sentence_spans

log = logging.getLogger(__name__)

BIOGRAPHY_PROMPT = "This is a Wikipedia article about {topic}. {topic}"


@dataclass(frozen=True, slots=True)
class Completion:
    text: str
    trace: GenerationTrace | None = None


@runtime_checkable
class GeneratorClient(Protocol):
    def complete(self, request: GeneratorRequest) -> Completion: ...


@runtime_checkable
class SimilarityBackend(Protocol):
    name: str

    def similarity_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]: ...


@runtime_checkable
class QAClient(Protocol):
    def answer(self, question: str) -> str: ...


# ---------------------------------------------------------------------------
# Trace assembly
# ---------------------------------------------------------------------------


def boundaries_from_tokens(token_texts: Sequence[str], text: str | None = None) -> tuple[int, ...]:
    """Token offsets (one past the end) of each complete sentence.

    Wire responses carry tokens but not sentence structure; this maps the
    segmenter's character spans back onto token offsets. A sentence ends at
    the first token whose cumulative text covers its terminator.
    """
    if text is None:
        text = "".join(token_texts)
    spans = sentence_spans(text)
    # An unterminated trailing fragment is not a sentence ending.
    ends = [b for a, b in spans if is_terminated(text[a:b])]
    cum_lengths = []
    cum = 0
    for t in token_texts:
        cum += len(t)
        cum_lengths.append(cum)
    boundaries: list[int] = []
    idx = 0
    for end in ends:
        while idx < len(token_texts) and cum_lengths[idx] < end:
            idx += 1
        if idx >= len(token_texts):
            break
        b = idx + 1
        if not boundaries or b > boundaries[-1]:
            boundaries.append(b)
    return tuple(boundaries)


def trace_from_wire(payload: dict, eos_token: str) -> GenerationTrace:
    tokens = tuple(
        TokenStep(
            text=t["text"],
            logprob=float(t["logprob"]),
            top_alternatives=tuple((str(a), float(lp)) for a, lp in t.get("top", [])),
        )
        for t in payload
    )
    return GenerationTrace(
        tokens=tokens,
        sentence_boundaries=boundaries_from_tokens([t.text for t in tokens]),
        eos_token=eos_token,
    )


# ---------------------------------------------------------------------------
# Generator clients
# ---------------------------------------------------------------------------


class HttpGenerator:
    """Client for a JSON-over-HTTP completion endpoint.

    Request body mirrors :class:`GeneratorRequest`; the response must carry
    ``text``, ``eos_token`` and, when ``logprobs_k > 0``, per-token ``top``
    alternatives. Transient failures are retried with exponential backoff
    up to ``max_retries``.
    """

    def __init__(self, base_url: str, timeout: float = 60.0, max_retries: int = 3):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries
        self._session = requests.Session()

    def complete(self, request: GeneratorRequest) -> Completion:
        payload = request.to_payload()
        last_error = None
        for attempt in range(self.max_retries):
            try:
                resp = self._session.post(
                    f"{self.base_url}/v1/complete", json=payload, timeout=self.timeout
                )
                resp.raise_for_status()
                body = resp.json()
                break
            except (requests.RequestException, ValueError) as e:
                last_error = e
                time.sleep(min(2.0**attempt * 0.25, 4.0))
        else:
            raise EndpointError(f"completion endpoint failed: {last_error}", retriable=True)
        return _completion_from_body(body, request)


def _completion_from_body(body: dict, request: GeneratorRequest) -> Completion:
    if "text" not in body:
        raise ProtocolError("completion response missing 'text'")
    trace = None
    if request.logprobs_k > 0:
        raw_tokens = body.get("tokens")
        if not raw_tokens or not raw_tokens[0].get("top"):
            raise CapabilityError(
                f"endpoint returned no token logprobs but logprobs_k={request.logprobs_k}"
            )
        trace = trace_from_wire(raw_tokens, body.get("eos_token", "</s>"))
        if trace.k_max < request.logprobs_k:
            raise CapabilityError(
                f"endpoint returned {trace.k_max} alternatives, "
                f"fewer than logprobs_k={request.logprobs_k}"
            )
    return Completion(text=body["text"], trace=trace)


class CachingGenerator:
    """Read-through cache around any generator client.

    With ``inner=None`` the client is cache-only (offline): a miss is an
    error rather than a network call.
    """

    def __init__(self, cache: ResponseCache, inner: GeneratorClient | None = None):
        self.cache = cache
        self.inner = inner

    def complete(self, request: GeneratorRequest) -> Completion:
        hit = self.cache.get(request)
        if hit is not None:
            trace = None
            if hit.get("tokens"):
                trace = trace_from_wire(hit["tokens"], hit.get("eos_token", "</s>"))
            return Completion(text=hit["text"], trace=trace)
        if self.inner is None:
            raise EndpointError(
                "cache miss in offline mode; run online first to record responses",
                retriable=False,
            )
        completion = self.inner.complete(request)
        payload: dict = {"text": completion.text}
        if completion.trace is not None:
            payload["eos_token"] = completion.trace.eos_token
            payload["tokens"] = [
                {"text": t.text, "logprob": t.logprob, "top": [list(a) for a in t.top_alternatives]}
                for t in completion.trace.tokens
            ]
        self.cache.put(request, payload)
        return completion


class EchoGenerator:
    """Deterministic stub: emits sentences derived from prompt and seed.

    The same (prompt, seed) pair always yields the same completion, which
    is the seed contract real backends are expected to honor.
    """

    def __init__(self, eos_token: str = "</s>", sentences_per_call: int = 3):
        self.eos_token = eos_token
        self.sentences_per_call = sentences_per_call

    def _words(self, request: GeneratorRequest) -> list[str]:
        digest = hashlib.sha256(f"{request.prompt}|{request.seed}".encode()).hexdigest()
        return [digest[i : i + 6] for i in range(0, 6 * self.sentences_per_call, 6)]

    def complete(self, request: GeneratorRequest) -> Completion:
        words = self._words(request)
        text = " ".join(f"Fact {w} stands." for w in words)
        token_texts: list[str] = []
        for i, sentence in enumerate(text.split(" ")):
            token_texts.append((" " if i else "") + sentence)
        k = max(request.logprobs_k, 1)
        tokens = tuple(
            TokenStep(
                text=t,
                logprob=-0.5,
                top_alternatives=tuple(
                    (t if j == 0 else f"alt{j}", -0.5 - j) for j in range(k)
                ),
            )
            for t in token_texts
        )
        trace = GenerationTrace(
            tokens=tokens,
            sentence_boundaries=boundaries_from_tokens(token_texts),
            eos_token=self.eos_token,
        )
        return Completion(text=text, trace=trace if request.logprobs_k > 0 else None)


# ---------------------------------------------------------------------------
# Similarity backends
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\w+")


def overlap_tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.casefold())


def token_overlap_f1(reference: str, candidate: str) -> float:
    """Multiset token-overlap F1; the deterministic stub similarity.

    Both empty -> 1.0; one empty -> 0.0. The exact expression
    ``2 * overlap / (len(ref) + len(cand))`` is normative: remote stub
    implementations must match it bit-for-bit.
    """
    ref = overlap_tokens(reference)
    cand = overlap_tokens(candidate)
    if not ref and not cand:
        return 1.0
    if not ref or not cand:
        return 0.0
    overlap = sum((Counter(ref) & Counter(cand)).values())
    return 2 * overlap / (len(ref) + len(cand))


class TokenOverlapBackend:
    """In-process stub backend used for tests and offline runs."""

    name = "token-overlap-f1"

    def similarity_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [token_overlap_f1(ref, cand) for ref, cand in pairs]


class HttpSimilarityBackend:
    """Client for the similarity wire protocol.

    POST ``{base_url}/score`` with ``{"pairs": [[reference, candidate], ...]}``;
    the response must return ``{"scores": [...]}`` of the same length.
    Out-of-range scores are clamped with a warning; a length mismatch is a
    protocol error.
    """

    def __init__(self, base_url: str, timeout: float = 60.0, max_retries: int = 3,
                 name: str | None = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries
        self.name = name or f"http:{self.base_url}"
        self._session = requests.Session()

    def similarity_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        payload = {"pairs": [[ref, cand] for ref, cand in pairs]}
        last_error = None
        for attempt in range(self.max_retries):
            try:
                resp = self._session.post(
                    f"{self.base_url}/score", json=payload, timeout=self.timeout
                )
                resp.raise_for_status()
                body = resp.json()
                break
            except (requests.RequestException, ValueError) as e:
                last_error = e
                time.sleep(min(2.0**attempt * 0.25, 4.0))
        else:
            raise EndpointError(f"similarity endpoint failed: {last_error}", retriable=True)
        scores = body.get("scores")
        if not isinstance(scores, list) or len(scores) != len(pairs):
            raise ProtocolError(
                f"similarity backend returned {0 if scores is None else len(scores)} "
                f"scores for {len(pairs)} pairs"
            )
        out = []
        clamped = 0
        for s in scores:
            v = float(s)
            if not math.isfinite(v) or v < 0.0 or v > 1.0:
                clamped += 1
                v = min(max(v, 0.0), 1.0) if math.isfinite(v) else 0.0
            out.append(v)
        if clamped:
            log.warning("similarity backend returned %d out-of-range scores; clamped", clamped)
        return out


# ---------------------------------------------------------------------------
# QA clients
# ---------------------------------------------------------------------------


class FixtureQAClient:
    """Answers questions from a fixed mapping (a dict or a JSON file)."""

    def __init__(self, fixture: dict[str, str] | str | Path):
        if isinstance(fixture, (str, Path)):
            with open(fixture, "r", encoding="utf-8") as fh:
                fixture = json.load(fh)
        self.mapping = dict(fixture)

    def answer(self, question: str) -> str:
        if not question or not question.strip():
            raise ValidationError("question must be non-empty", field="question")
        if question not in self.mapping:
            raise EndpointError(f"no fixture answer for question: {question!r}", retriable=False)
        return self.mapping[question]


class HttpQAClient:
    """Client for a question-answering endpoint (POST ``/answer``)."""

    def __init__(self, base_url: str, timeout: float = 60.0, max_retries: int = 3):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries
        self._session = requests.Session()

    def answer(self, question: str) -> str:
        if not question or not question.strip():
            raise ValidationError("question must be non-empty", field="question")
        last_error = None
        for attempt in range(self.max_retries):
            try:
                resp = self._session.post(
                    f"{self.base_url}/answer", json={"question": question}, timeout=self.timeout
                )
                resp.raise_for_status()
                body = resp.json()
                break
            except (requests.RequestException, ValueError) as e:
                last_error = e
                time.sleep(min(2.0**attempt * 0.25, 4.0))
        else:
            raise EndpointError(f"QA endpoint failed: {last_error}", retriable=True)
        if "answer" not in body:
            raise ProtocolError("QA response missing 'answer'")
        return str(body["answer"])
