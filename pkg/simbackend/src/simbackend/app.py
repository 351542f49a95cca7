"""HTTP service implementing the similarity wire protocol.

POST /score with ``{"pairs": [[reference, candidate], ...]}`` returns
``{"scores": [...]}`` of the same length and order, every value in
[0, 1]. GET /health reports the active mode. Request handling is
stateless, so any interleaving of concurrent requests yields
order-correct responses.
"""

from __future__ import annotations

from fastapi import FastAPI
from pydantic import BaseModel, field_validator

from .scoring import MODES, score_batch


class ScoreRequest(BaseModel):
    pairs: list[tuple[str, str]]

    @field_validator("pairs")
    @classmethod
    def _pairs_are_string_pairs(cls, value):
        for i, pair in enumerate(value):
            if len(pair) != 2:
                raise ValueError(f"pair {i} must have exactly two elements")
        return value


class ScoreResponse(BaseModel):
    scores: list[float]


def create_app(mode: str = "stub") -> FastAPI:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {sorted(MODES)}")
    app = FastAPI(title="simbackend", version="0.1.0")
    app.state.mode = mode

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "mode": app.state.mode}

    @app.post("/score", response_model=ScoreResponse)
    def score(request: ScoreRequest) -> ScoreResponse:
        scores = score_batch(request.pairs, app.state.mode)
        # The contract promises [0, 1]; clamp defensively so a scorer bug
        # can never leak an out-of-range value onto the wire.
        return ScoreResponse(scores=[min(max(s, 0.0), 1.0) for s in scores])

    return app
