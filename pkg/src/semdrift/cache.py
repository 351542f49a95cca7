"""Persistent, replayable response cache keyed by canonical request digests.

Storage is an append-only JSONL log; no database involved. Replaying a
cached experiment in offline mode reproduces responses byte-identically
because entries store the exact response payload.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ValidationError


@dataclass(frozen=True, slots=True)
class GeneratorRequest:
    """One completion request; the canonical unit of caching."""

    prompt: str
    max_tokens: int = 500
    temperature: float = 0.6
    top_p: float = 0.9
    seed: int = 0
    logprobs_k: int = 0
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self):
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0", field="temperature")
        if not (0 < self.top_p <= 1):
            raise ValidationError("top_p must be in (0, 1]", field="top_p")
        if self.logprobs_k < 0:
            raise ValidationError("logprobs_k must be >= 0", field="logprobs_k")

    def to_payload(self) -> dict:
        payload = asdict(self)
        payload["stop_sequences"] = list(self.stop_sequences)
        return payload


def canonical_request(request: GeneratorRequest) -> str:
    """Key-sorted JSON form; field order never affects the digest."""
    return json.dumps(request.to_payload(), sort_keys=True, ensure_ascii=False)


def request_digest(request: GeneratorRequest) -> str:
    return hashlib.sha256(canonical_request(request).encode("utf-8")).hexdigest()


@dataclass(slots=True)
class ResponseCache:
    """Append-only response log with in-memory index.

    Later entries for the same digest win, so re-recording a request is
    harmless. ``readonly`` supports cache-only (offline) replay.
    """

    path: Path
    readonly: bool = False
    _index: dict[str, dict] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.path = Path(self.path)
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        entry = json.loads(line)
                        self._index[entry["digest"]] = entry["response"]

    def __len__(self) -> int:
        return len(self._index)

    def get(self, request: GeneratorRequest) -> dict | None:
        return self._index.get(request_digest(request))

    def put(self, request: GeneratorRequest, response: dict) -> None:
        if self.readonly:
            return
        digest = request_digest(request)
        entry = {
            "digest": digest,
            "request": json.loads(canonical_request(request)),
            "response": response,
            "timestamp": time.time(),
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        self._index[digest] = response
