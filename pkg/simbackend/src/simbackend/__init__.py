"""Reference similarity-scoring service for the semdrift wire protocol."""

from .app import create_app
from .scoring import embedding_similarity, token_overlap_f1

__version__ = "0.1.0"

__all__ = ["create_app", "embedding_similarity", "token_overlap_f1"]
