"""Term embedders: the bundled hashing embedder and a cached remote endpoint."""
from __future__ import annotations

import hashlib
from typing import Mapping, Optional, Protocol, Sequence

import httpx
import numpy as np

from common.cache import SimpleTTLCache
from common.config import Settings
from common.database import session_scope
from common.errors import BackendError, UsageError
from common.logging_setup import get_stage_logger
from common.models import EmbedderKind, EmbeddingCacheEntry

logger = get_stage_logger("rank")


class Embedder(Protocol):
    name: str

    def embed(self, term: str) -> np.ndarray: ...

    def embed_many(self, terms: Sequence[str]) -> np.ndarray: ...


def _unit(vector: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vector)
    return vector if norm == 0 else vector / norm


class HashingEmbedder:
    """Bag of hashed character trigrams, L2-normalized.

    Components are non-negative, so cosine between two terms lies in [0, 1].
    """

    name = "bundled:trigram-256"

    def __init__(self, dimension: int = 256) -> None:
        self.dimension = dimension

    def _bucket(self, trigram: str) -> int:
        digest = hashlib.blake2b(trigram.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dimension

    def embed(self, term: str) -> np.ndarray:
        padded = f"#{term.lower()}#"
        vector = np.zeros(self.dimension, dtype=np.float64)
        for start in range(max(1, len(padded) - 2)):
            vector[self._bucket(padded[start : start + 3])] += 1.0
        return _unit(vector)

    def embed_many(self, terms: Sequence[str]) -> np.ndarray:
        if not terms:
            return np.zeros((0, self.dimension))
        return np.vstack([self.embed(term) for term in terms])


class PrecomputedEmbedder:
    """Serves vectors computed up front, e.g. for one ranking pass."""

    def __init__(self, name: str, vectors: Mapping[str, np.ndarray]) -> None:
        self.name = name
        self._vectors = dict(vectors)

    def embed(self, term: str) -> np.ndarray:
        return self._vectors[term]

    def embed_many(self, terms: Sequence[str]) -> np.ndarray:
        return np.vstack([self._vectors[term] for term in terms]) if terms else np.zeros((0, 0))


class RemoteEmbedder:
    """OpenAI-compatible ``/embeddings`` endpoint behind a memory + disk cache.

    The disk cache is keyed by (provider, term) and survives across runs.
    """

    def __init__(
        self,
        endpoint_url: str,
        model_name: str,
        cache_url: str,
        api_key: Optional[str] = None,
        ttl: int = 3600,
        timeout: float = 60.0,
        client: Optional[httpx.Client] = None,
    ) -> None:
        self.endpoint_url = endpoint_url.rstrip("/")
        self.model_name = model_name
        self.name = f"remote:{model_name}@{self.endpoint_url}"
        self._cache_url = cache_url
        self._memory: SimpleTTLCache[np.ndarray] = SimpleTTLCache(ttl=ttl)
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def embed(self, term: str) -> np.ndarray:
        return self.embed_many([term])[0]

    def embed_many(self, terms: Sequence[str]) -> np.ndarray:
        if not terms:
            return np.zeros((0, 0))
        found: dict[str, np.ndarray] = {}
        for term in terms:
            cached = self._memory.get(term)
            if cached is not None:
                found[term] = cached

        missing = sorted({term for term in terms if term not in found})
        if missing:
            found.update(self._load_from_disk(missing))
            missing = [term for term in missing if term not in found]
        if missing:
            fetched = self._fetch(missing)
            self._store_on_disk(fetched)
            found.update(fetched)
        for term, vector in found.items():
            self._memory.set(term, vector)
        return np.vstack([found[term] for term in terms])

    def _load_from_disk(self, terms: Sequence[str]) -> dict[str, np.ndarray]:
        loaded: dict[str, np.ndarray] = {}
        with session_scope(self._cache_url) as db:
            for term in terms:
                row = db.get(EmbeddingCacheEntry, (self.name, term))
                if row is not None:
                    loaded[term] = np.asarray(row.vector, dtype=np.float64)
        return loaded

    def _store_on_disk(self, vectors: Mapping[str, np.ndarray]) -> None:
        with session_scope(self._cache_url) as db:
            for term, vector in vectors.items():
                db.merge(EmbeddingCacheEntry(provider=self.name, term=term, vector=vector.tolist()))

    def _fetch(self, terms: Sequence[str]) -> dict[str, np.ndarray]:
        logger.info("fetching %d embeddings from %s", len(terms), self.endpoint_url)
        try:
            response = self._client.post(
                f"{self.endpoint_url}/embeddings",
                json={"model": self.model_name, "input": list(terms)},
            )
            response.raise_for_status()
            data = sorted(response.json()["data"], key=lambda item: item["index"])
        except httpx.HTTPError as exc:
            raise BackendError(f"embedding request failed: {exc}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"unexpected embedding response: {exc}") from exc
        if len(data) != len(terms):
            raise BackendError(f"embedding endpoint returned {len(data)} vectors for {len(terms)} terms")
        return {term: _unit(np.asarray(item["embedding"], dtype=np.float64)) for term, item in zip(terms, data)}


def build_embedder(settings: Settings, kind: Optional[EmbedderKind] = None) -> Embedder:
    kind = kind or EmbedderKind(settings.embedder)
    if kind is EmbedderKind.BUNDLED:
        return HashingEmbedder()
    if not settings.embedding_endpoint_url:
        raise UsageError("the remote embedder needs EMBEDDING_ENDPOINT_URL")
    return RemoteEmbedder(
        endpoint_url=settings.embedding_endpoint_url,
        model_name=settings.embedding_model_name,
        cache_url=settings.embedding_cache_url,
        api_key=settings.llm_api_key,
        ttl=settings.embedding_cache_ttl,
        timeout=settings.request_timeout,
    )
