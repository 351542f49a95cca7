"""Similarity scorers behind the /score endpoint.

Two modes:

* ``stub`` — token-overlap F1, bit-identical to the in-process stub the
  client library ships. The formula is normative (see the protocol doc
  and the shared vectors in contracts/): tokens are ``\\w+`` matches on
  the casefolded string, score = 2 * |multiset overlap| / (|ref| + |cand|),
  both empty -> 1.0, one empty -> 0.0.
* ``embedding`` — deterministic hashed-feature sentence embeddings
  (word unigrams + character trigrams, signed feature hashing) compared
  by cosine, clamped to [0, 1]. Self-contained: no model assets to
  download, fully reproducible across runs and platforms. Any stronger
  sentence encoder can be dropped in behind the same interface.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from typing import Callable, Sequence

_TOKEN_RE = re.compile(r"\w+")

EMBEDDING_DIM = 1024


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.casefold())


def token_overlap_f1(reference: str, candidate: str) -> float:
    ref = _tokens(reference)
    cand = _tokens(candidate)
    if not ref and not cand:
        return 1.0
    if not ref or not cand:
        return 0.0
    overlap = sum((Counter(ref) & Counter(cand)).values())
    return 2 * overlap / (len(ref) + len(cand))


def _features(text: str) -> Counter:
    normalized = " ".join(_tokens(text))
    feats = Counter()
    for tok in normalized.split():
        feats[f"w:{tok}"] += 1
    padded = f"^{normalized}$"
    for i in range(len(padded) - 2):
        feats[f"c:{padded[i : i + 3]}"] += 1
    return feats


def embed(text: str, dim: int = EMBEDDING_DIM) -> list[float]:
    """Signed-hash feature embedding, L2-normalized (zero vector for
    feature-less input)."""
    vec = [0.0] * dim
    for feat, count in _features(text).items():
        digest = hashlib.md5(feat.encode("utf-8")).digest()
        index = int.from_bytes(digest[:4], "big") % dim
        sign = 1.0 if digest[4] & 1 else -1.0
        vec[index] += sign * count
    norm = math.sqrt(sum(v * v for v in vec))
    if norm == 0.0:
        return vec
    return [v / norm for v in vec]


def embedding_similarity(reference: str, candidate: str, dim: int = EMBEDDING_DIM) -> float:
    """Cosine of the hashed embeddings, clamped into [0, 1].

    Identical sentences score exactly 1.0; unrelated sentences land
    near 0 (negative cosines from signed hashing clamp to 0). Two empty
    inputs count as identical.
    """
    a = embed(reference, dim)
    b = embed(candidate, dim)
    if not any(a) and not any(b):
        return 1.0
    cos = sum(x * y for x, y in zip(a, b))
    return min(max(cos, 0.0), 1.0)


Scorer = Callable[[str, str], float]

MODES: dict[str, Scorer] = {
    "stub": token_overlap_f1,
    "embedding": embedding_similarity,
}


def score_batch(pairs: Sequence[tuple[str, str]], mode: str) -> list[float]:
    scorer = MODES[mode]
    return [scorer(ref, cand) for ref, cand in pairs]
