"""QA tool-call syntax: parsing, rendering, splicing, and the two-prompt
generation flow that lets a completion model ask a QA endpoint questions
mid-text.

Call syntax is a regular grammar with no nesting:

    [QA(<question>)]                 a pending call
    [QA(<question>) -> <answer>]     an answered call

Cleaning removes the bracketed span entirely (models re-emit the answer
as ordinary following text), collapsing one adjacent space so prose reads
naturally. Unbalanced syntax is reported as a malformed span and left
verbatim.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from importlib import resources
from .cache import GeneratorRequest
from .clients import GeneratorClient, QAClient
from .errors import SemdriftError
from .reporting import SessionLog
from .segmentation import sentence_spans, strip_unfinished_tail

log = logging.getLogger(__name__)

CALL_OPEN = "[QA("
ANSWER_SEP = ") -> "


def load_prompt(name: str) -> str:
    return resources.files("semdrift.prompts").joinpath(name).read_text("utf-8").rstrip("\n")


def biography_prompt(topic: str) -> str:
    return load_prompt("biography_prompt.txt").format(topic=topic)


@dataclass(frozen=True, slots=True)
class ToolCall:
    """One recognized call span. ``answer`` is None while pending."""

    question: str
    answer: str | None
    span: tuple[int, int]

    @property
    def pending(self) -> bool:
        return self.answer is None


@dataclass(frozen=True, slots=True)
class ParseResult:
    calls: tuple[ToolCall, ...]
    cleaned: str
    malformed_spans: tuple[tuple[int, int], ...] = ()


def _parse_inner(inner: str) -> tuple[str, str | None] | None:
    """Split the text between ``[QA(`` and ``]`` into question/answer."""
    sep = inner.rfind(ANSWER_SEP)
    if sep != -1:
        return inner[:sep], inner[sep + len(ANSWER_SEP):]
    if inner.endswith(")"):
        return inner[:-1], None
    return None


def parse_tool_calls(text: str) -> ParseResult:
    """Find every call span in ``text`` and produce the cleaned text.

    Spans are scanned left to right and never overlap. Cleaning removes
    each well-formed span plus one neighboring space; malformed spans
    (opener without a closing bracket, or no closing paren) stay verbatim.
    """
    calls: list[ToolCall] = []
    malformed: list[tuple[int, int]] = []
    pieces: list[str] = []
    pos = 0
    n = len(text)
    while True:
        start = text.find(CALL_OPEN, pos)
        if start == -1:
            pieces.append(text[pos:])
            break
        close = text.find("]", start)
        if close == -1:
            malformed.append((start, n))
            pieces.append(text[pos:])
            break
        parsed = _parse_inner(text[start + len(CALL_OPEN) : close])
        if parsed is None:
            malformed.append((start, close + 1))
            pieces.append(text[pos : close + 1])
            pos = close + 1
            continue
        question, answer = parsed
        end = close + 1
        calls.append(ToolCall(question=question, answer=answer, span=(start, end)))
        before = text[pos:start]
        # Drop one adjacent space so removal does not leave doubles.
        if end < n and text[end] == " " and (start == 0 or (before and before[-1] == " ")):
            end += 1
        elif before and before[-1] == " " and (end >= n or not text[end].isalnum()):
            before = before[:-1]
        pieces.append(before)
        pos = end
    return ParseResult(calls=tuple(calls), cleaned="".join(pieces), malformed_spans=tuple(malformed))


def render_tool_call(question: str, answer: str | None = None) -> str:
    if answer is None:
        return f"{CALL_OPEN}{question})]"
    return f"{CALL_OPEN}{question}{ANSWER_SEP}{answer}]"


def splice_answer(text: str, call: ToolCall, answer: str) -> str:
    """Rewrite a pending call span into its answered form."""
    start, end = call.span
    return text[:start] + render_tool_call(call.question, answer) + text[end:]


# ---------------------------------------------------------------------------
# Tool-call generation flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ToolCallRecord:
    question: str
    answer: str | None
    status: str  # executed | failed | skipped


@dataclass(frozen=True, slots=True)
class ToolCallResult:
    topic: str
    passage: str
    calls: tuple[ToolCallRecord, ...]
    session: SessionLog
    rounds: int


_API_WORD = re.compile(r"\bAPI\b", re.IGNORECASE)


def strip_api_meta_paragraphs(text: str) -> str:
    """Drop trailing paragraphs whose opening sentence talks about the API.

    Call-splicing prompts leak meta-text ("To make API calls use ...");
    any paragraph whose first sentence mentions the API (after call spans
    are removed) is discarded along with everything after it.
    """
    paragraphs = text.split("\n\n")
    kept = []
    for para in paragraphs:
        spans = sentence_spans(para)
        first = para[spans[0][0] : spans[0][1]] if spans else para
        if _API_WORD.search(first):
            break
        kept.append(para)
    return "\n\n".join(kept)


def toolcall_generate(
    topic: str,
    generator: GeneratorClient,
    qa: QAClient,
    max_calls: int | None = None,
    max_tokens: int = 500,
    temperature: float = 0.6,
    top_p: float = 0.9,
    seed: int = 0,
    max_rounds: int = 16,
    strip_api_meta: bool = True,
    session: SessionLog | None = None,
) -> ToolCallResult:
    """Alternate call-emitting and answer-splicing prompts around a QA API.

    Each round: ask the model to continue the passage, allowing it to emit
    a pending call; execute the first pending call; show the model the
    answered call and let it integrate the answer; strip the call span and
    repeat with the grown passage. ``max_calls=None`` means unlimited. A
    QA failure logs a failed call and generation continues without the
    splice.
    """
    session = session if session is not None else SessionLog()
    call_prompt = load_prompt("qa_call_prompt.txt")
    splice_prompt = load_prompt("qa_splice_prompt.txt")
    bio = biography_prompt(topic)
    passage = ""
    records: list[ToolCallRecord] = []
    tokens_used = 0
    rounds = 0
    for round_no in range(max_rounds):
        rounds += 1
        if tokens_used >= max_tokens:
            break
        prompt1 = f"{call_prompt}\n{bio}{passage}"
        completion = generator.complete(
            GeneratorRequest(
                prompt=prompt1,
                max_tokens=max_tokens - tokens_used,
                temperature=temperature,
                top_p=top_p,
                seed=seed + round_no,
            )
        )
        tokens_used += _token_count(completion.text)
        session.add_generator_pass(_token_count(completion.text))
        parsed = parse_tool_calls(completion.text)
        pending = next((c for c in parsed.calls if c.pending), None)
        if pending is None:
            passage += _clean_segment(completion.text)
            break
        before = completion.text[: pending.span[0]]
        executed_budget_left = max_calls is None or sum(
            1 for r in records if r.status == "executed"
        ) < max_calls
        if not executed_budget_left:
            # Budget spent: finish with a plain completion so the call
            # prompt cannot keep inviting more calls.
            records.append(ToolCallRecord(pending.question, None, "skipped"))
            passage += _clean_segment(before)
            final = generator.complete(
                GeneratorRequest(
                    prompt=f"{bio}{passage}",
                    max_tokens=max(max_tokens - tokens_used, 1),
                    temperature=temperature,
                    top_p=top_p,
                    seed=seed + round_no,
                )
            )
            tokens_used += _token_count(final.text)
            session.add_generator_pass(_token_count(final.text))
            passage += _clean_segment(final.text)
            break
        try:
            answer = qa.answer(pending.question)
        except SemdriftError as e:
            log.warning("QA call failed for %r: %s", pending.question, e)
            records.append(ToolCallRecord(pending.question, None, "failed"))
            passage += _clean_segment(before)
            continue
        session.add_qa_call()
        records.append(ToolCallRecord(pending.question, answer, "executed"))
        answered = render_tool_call(pending.question, answer)
        prompt2 = f"{splice_prompt}\n{bio}{passage}{before}{answered}"
        completion2 = generator.complete(
            GeneratorRequest(
                prompt=prompt2,
                max_tokens=max_tokens - tokens_used,
                temperature=temperature,
                top_p=top_p,
                seed=seed + round_no,
            )
        )
        tokens_used += _token_count(completion2.text)
        session.add_generator_pass(_token_count(completion2.text))
        continuation = completion2.text
        next_pending = next(
            (c for c in parse_tool_calls(continuation).calls if c.pending), None
        )
        if next_pending is not None:
            continuation = continuation[: next_pending.span[0]]
        passage += _clean_segment(before) + _clean_segment(continuation)
    passage = strip_unfinished_tail(passage)
    if strip_api_meta:
        passage = strip_api_meta_paragraphs(passage)
    return ToolCallResult(
        topic=topic,
        passage=passage,
        calls=tuple(records),
        session=session,
        rounds=rounds,
    )


def _clean_segment(text: str) -> str:
    return parse_tool_calls(text).cleaned


def _token_count(text: str) -> int:
    return len(text.split())
