"""Evolving store of error-fix records with two-stage retrieval.

Stage 1 is a recall-oriented keyword prefilter over an inverted index
(any shared token admits a candidate). Stage 2 ranks only those
candidates by cosine similarity of embeddings. The default embedder is
feature-hashed character trigrams (deterministic, no model download);
an external provider can replace it through ``EmbeddingProvider``.

Storage is append-only JSON Lines; the in-memory index is rebuilt on
load, so the file is a complete audit trail of the store's evolution.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterable, Optional, Protocol, Sequence

import numpy as np

from . import kernels

EMBED_DIM = 256

_TOKEN_RE = re.compile(r"[a-z0-9_]+")


def _load_stopwords() -> frozenset:
    text = resources.files("robotriage.data").joinpath("stopwords.txt").read_text()
    return frozenset(line.strip() for line in text.splitlines()
                     if line.strip() and not line.startswith("#"))


STOPWORDS = _load_stopwords()


class KBError(Exception):
    pass


class ProviderUnavailableError(KBError):
    pass


def tokenize(text: str) -> set:
    """Lowercase tokens split on non-alphanumerics; '_' kept, '/' stripped."""
    return {t for t in _TOKEN_RE.findall(text.lower()) if t not in STOPWORDS}


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Feature-hashed character-trigram term frequencies, L2-normalized.

    Degenerate input (fewer than 3 characters) embeds to the zero
    vector; retrieval treats its similarity as 0.
    """

    def __init__(self, dim: int = EMBED_DIM):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        counts = kernels.trigram_counts(text.lower().encode("utf-8"), self.dim)
        vec = counts.astype(np.float64)
        norm = float(np.sqrt(vec @ vec))
        if norm == 0.0:
            return vec
        return vec / norm


class RemoteEmbedder:
    """Embedding provider over HTTP: POST {"text": ...} -> {"vector": [...]}."""

    def __init__(self, url: str, dim: int = EMBED_DIM, timeout: float = 10.0):
        self.url = url
        self.dim = dim
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        import httpx
        try:
            resp = httpx.post(self.url, json={"text": text}, timeout=self.timeout)
            resp.raise_for_status()
            vector = np.asarray(resp.json()["vector"], dtype=np.float64)
        except Exception as exc:
            raise ProviderUnavailableError(f"embedding provider at {self.url}: {exc}") from exc
        if vector.shape != (self.dim,):
            raise ProviderUnavailableError(
                f"provider returned dimension {vector.shape}, expected ({self.dim},)")
        return vector


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0 when either vector is zero."""
    na = float(np.sqrt(a @ a))
    nb = float(np.sqrt(b @ b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b) / (na * nb)


@dataclass(frozen=True)
class ErrorFixRecord:
    id: str
    signature: str
    keywords: frozenset
    description: str
    resolution_steps: tuple
    embedding: np.ndarray
    created_at: float

    def to_dict(self) -> dict:
        return {"id": self.id, "signature": self.signature,
                "keywords": sorted(self.keywords), "description": self.description,
                "resolution_steps": list(self.resolution_steps),
                "embedding": self.embedding.tolist(), "created_at": self.created_at}

    @classmethod
    def from_dict(cls, doc: dict) -> "ErrorFixRecord":
        return cls(id=doc["id"], signature=doc["signature"],
                   keywords=frozenset(doc["keywords"]), description=doc["description"],
                   resolution_steps=tuple(doc["resolution_steps"]),
                   embedding=np.asarray(doc["embedding"], dtype=np.float64),
                   created_at=doc["created_at"])


@dataclass(frozen=True)
class RetrievalResult:
    record_id: str
    stage1_hit: bool
    similarity: float


def keyword_filter(query_tokens: Iterable[str], index: dict) -> set:
    """Stage 1: ids of records sharing at least one token with the query."""
    out: set = set()
    for token in query_tokens:
        out |= index.get(token, set())
    return out


def brute_force_filter(query_tokens: set, records: Sequence[ErrorFixRecord]) -> set:
    """Linear-scan reference for the inverted index (tests compare the two)."""
    return {r.id for r in records if query_tokens & r.keywords}


class KnowledgeBase:
    """Append-only error-fix store with keyword + embedding retrieval."""

    def __init__(self, path=None, embedder: Optional[EmbeddingProvider] = None,
                 clock: Optional[Callable[[], float]] = None):
        self.path = path
        self.embedder = embedder or HashingEmbedder()
        self.clock = clock or time.time
        self.records: list[ErrorFixRecord] = []
        self.index: dict = {}
        self._by_id: dict = {}
        if path is not None:
            self._load()

    def __len__(self) -> int:
        return len(self.records)

    def get(self, record_id: str) -> ErrorFixRecord:
        return self._by_id[record_id]

    def _load(self) -> None:
        try:
            with open(self.path) as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._insert(ErrorFixRecord.from_dict(json.loads(line)))
        except FileNotFoundError:
            pass
        except (json.JSONDecodeError, KeyError) as exc:
            raise KBError(f"corrupt knowledge base file {self.path}: {exc}") from exc

    def _insert(self, record: ErrorFixRecord) -> None:
        self.records.append(record)
        self._by_id[record.id] = record
        for token in record.keywords:
            self.index.setdefault(token, set()).add(record.id)

    def add_record(self, signature: str, description: str,
                   resolution_steps: Sequence[str]) -> ErrorFixRecord:
        if not signature:
            raise KBError("signature must be non-empty")
        steps = [s for s in resolution_steps if s]
        if not steps:
            raise KBError("resolution_steps must be non-empty")
        keywords = tokenize(signature + " " + description)
        if not keywords:
            raise KBError("signature/description yield no keywords")
        record = ErrorFixRecord(
            id=f"kb-{len(self.records) + 1:06d}",
            signature=signature,
            keywords=frozenset(keywords),
            description=description,
            resolution_steps=tuple(steps),
            embedding=self.embedder.embed(signature + " " + description),
            created_at=float(self.clock()),
        )
        self._insert(record)
        if self.path is not None:
            try:
                with open(self.path, "a") as fh:
                    fh.write(json.dumps(record.to_dict()) + "\n")
            except OSError as exc:
                raise KBError(f"storage-error: {exc}") from exc
        return record

    def keyword_filter(self, query_tokens: Iterable[str]) -> set:
        return keyword_filter(query_tokens, self.index)

    def retrieve(self, query: str, k: int = 5) -> list[RetrievalResult]:
        """Two-stage retrieval: keyword prefilter, then cosine ranking of candidates."""
        if k < 1:
            raise ValueError("k must be >= 1")
        candidates = self.keyword_filter(tokenize(query))
        if not candidates:
            return []
        qvec = self.embedder.embed(query)
        qnorm = float(np.sqrt(qvec @ qvec))
        scored = []
        for rid in candidates:
            record = self._by_id[rid]
            if qnorm == 0.0:
                sim = 0.0
            else:
                sim = cosine(qvec, record.embedding)
            scored.append((record, sim))
        scored.sort(key=lambda rs: (-rs[1], -rs[0].created_at, rs[0].id), reverse=False)
        return [RetrievalResult(record_id=r.id, stage1_hit=True, similarity=s)
                for r, s in scored[:k]]
