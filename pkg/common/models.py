"""Shared enumerations and the SQLAlchemy table behind the embedding cache."""
from __future__ import annotations

from enum import Enum

from sqlalchemy import JSON, String
from sqlalchemy.orm import Mapped, mapped_column

from .database import Base


class PosTag(str, Enum):
    NOUN = "NOUN"
    ADJ = "ADJ"
    VERB = "VERB"
    OTHER = "OTHER"


class Metric(str, Enum):
    JACCARD = "jaccard"
    COSINE = "cosine"


class Technique(str, Enum):
    PATHOCL = "pathocl"
    UML_AUGMENTATION = "uml-augmentation"


class BackendKind(str, Enum):
    LIVE = "live"
    REPLAY = "replay"


class EmbedderKind(str, Enum):
    BUNDLED = "bundled"
    REMOTE = "remote"


class ErrorCategory(str, Enum):
    PARSING_ERROR = "PARSING_ERROR"
    UNDEFINED_OPERATION = "UNDEFINED_OPERATION"
    ITEREXP_INVALID_SOURCE = "ITEREXP_INVALID_SOURCE"
    SIGNATURE_MISMATCH = "SIGNATURE_MISMATCH"


class Correctness(str, Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    UNJUDGED = "unjudged"


class SizeCategory(str, Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


class EmbeddingCacheEntry(Base):
    __tablename__ = "embedding_cache"

    provider: Mapped[str] = mapped_column(String(200), primary_key=True)
    term: Mapped[str] = mapped_column(String(500), primary_key=True)
    vector: Mapped[list[float]] = mapped_column(JSON)
