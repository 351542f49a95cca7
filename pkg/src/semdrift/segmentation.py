"""Deterministic rule-based sentence segmentation and tail cleanup.

The segmenter splits on ``.``, ``!`` and ``?`` when the terminator is
followed by whitespace and an uppercase letter or digit, with an
abbreviation exception list shipped as a data file. It is intentionally
rule-based: reproducibility matters more here than linguistic coverage,
and every consumer accepts a pluggable segmenter.
"""

from __future__ import annotations

import re
from importlib import resources
from typing import Callable, Sequence

TERMINATORS = ".!?"
# Characters that may trail a terminator and still belong to the sentence.
_CLOSERS = "\"'”’)]"

Segmenter = Callable[[str], list[str]]


def _load_abbreviations() -> frozenset[str]:
    text = resources.files("semdrift.data").joinpath("abbreviations.txt").read_text("utf-8")
    entries = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.add(line)
            entries.add(line.lower())
    return frozenset(entries)


_ABBREVIATIONS = _load_abbreviations()
_WORD_BEFORE = re.compile(r"[\w.’']+$")


def _is_abbreviation(text: str, dot_index: int) -> bool:
    """True if the period at ``dot_index`` ends an abbreviation token."""
    token = _WORD_BEFORE.search(text[: dot_index + 1])
    if token is None:
        return False
    word = token.group(0)
    if word in _ABBREVIATIONS:
        return True
    bare = word[:-1]
    if len(bare) == 1 and bare.isalpha() and bare.isupper():
        # Name initials ("George W. Bush", "J. K. Rowling") follow another
        # capitalized word or open the text; "A is X." does not.
        before = _WORD_BEFORE.search(text[: token.start()].rstrip())
        return before is None or before.group(0)[0].isupper()
    return False


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of sentences, in order.

    Spans cover the sentence text without surrounding whitespace. The final
    span may be an unterminated fragment; ``is_terminated`` distinguishes it.
    """
    spans: list[tuple[int, int]] = []
    n = len(text)
    start = 0
    i = 0
    while i < n:
        ch = text[i]
        if ch in TERMINATORS:
            if ch == "." and _is_abbreviation(text, i):
                i += 1
                continue
            end = i + 1
            while end < n and text[end] in _CLOSERS:
                end += 1
            # Boundary only at end of text or before whitespace + new-sentence cue.
            if end >= n:
                spans.append((start, end))
                start = end
                i = end
                continue
            if text[end].isspace():
                j = end
                while j < n and text[j].isspace():
                    j += 1
                nxt = text[j] if j < n else ""
                if nxt in _CLOSERS and j + 1 < n:
                    nxt = text[j + 1]
                if j >= n or nxt.isupper() or nxt.isdigit() or nxt in "\"'“‘([":
                    spans.append((start, end))
                    start = j
                    i = j
                    continue
            i = end
            continue
        i += 1
    if start < n:
        tail = text[start:].strip()
        if tail:
            first = start + (len(text[start:]) - len(text[start:].lstrip()))
            last = start + len(text[start:].rstrip())
            spans.append((first, last))
    return spans


def split_sentences(text: str) -> list[str]:
    """Sentence strings for ``text`` under the default rule segmenter."""
    return [text[a:b] for a, b in sentence_spans(text)]


def is_terminated(sentence: str) -> bool:
    """True if ``sentence`` ends at a terminator (closing quotes allowed)."""
    s = sentence.rstrip()
    while s and s[-1] in _CLOSERS:
        s = s[:-1]
    return bool(s) and s[-1] in TERMINATORS


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


_PUNCT = re.compile(r"[^\w\s]")


def normalize_for_dedup(text: str) -> str:
    """Case-folded, whitespace-collapsed, punctuation-stripped form used by
    the repeated-sentence checks in the rerank controller."""
    return normalize_whitespace(_PUNCT.sub(" ", text.casefold()))


def strip_unfinished_tail(text: str, spans: Sequence[tuple[int, int]] | None = None) -> str:
    """Cut ``text`` back to the last finished sentence.

    Removes a trailing fragment that never reached a terminator, and, after
    that, a final sentence that exactly repeats its predecessor (whitespace
    normalized). Returns a prefix of ``text``; idempotent by construction.
    """
    if not text:
        return ""
    if spans is None:
        spans = sentence_spans(text)
    if not spans:
        return ""
    kept = list(spans)
    if not is_terminated(text[kept[-1][0]:kept[-1][1]]):
        kept.pop()
    if len(kept) >= 2:
        last = normalize_whitespace(text[kept[-1][0]:kept[-1][1]])
        prev = normalize_whitespace(text[kept[-2][0]:kept[-2][1]])
        if last == prev:
            kept.pop()
    if not kept:
        return ""
    return text[: kept[-1][1]]
