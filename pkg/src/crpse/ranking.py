"""Candidate source-paper scoring and ordering.

Two criteria: the count criterion scores each candidate by its share of the
entity's total cooccurrence count; the mixed criterion blends that share
with the cosine similarity between the query sentence and the candidate's
title+abstract, weighted by a configurable lambda.
"""

from __future__ import annotations

import json
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from crpse.cooccur import CandidateSet, MappingDataset

COUNT = "count"
MIXED = "mixed"

DEFAULT_EMBEDDING_DIM = 256
DEFAULT_COUNT_WEIGHT = 0.7
DEFAULT_TOP_K = 5


class EntityNotInDataset(KeyError):
    """Requested entity has no entry in the mapping dataset."""


@dataclass(frozen=True)
class RankingConfig:
    """Criterion, lambda weight on the count score, and top-K size."""

    criterion: str = COUNT
    count_weight: float = DEFAULT_COUNT_WEIGHT
    k: int = DEFAULT_TOP_K

    def __post_init__(self) -> None:
        if self.criterion not in (COUNT, MIXED):
            raise ValueError(f"unknown criterion: {self.criterion!r}")
        if not 0.0 <= self.count_weight <= 1.0:
            raise ValueError("count weight (lambda) must be in [0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class ScoredCandidate:
    """One candidate with its score components; context_score is None under
    the count criterion."""

    paper_id: str
    count: int
    count_score: float
    context_score: float | None
    score: float

    def to_json(self) -> dict:
        obj: dict = {
            "paper_id": self.paper_id,
            "count": self.count,
            "count_score": self.count_score,
        }
        if self.context_score is not None:
            obj["context_score"] = self.context_score
        obj["score"] = self.score
        return obj


class EmbeddingProvider(ABC):
    """Deterministic text-to-vector encoder of a fixed dimension."""

    @property
    @abstractmethod
    def dimension(self) -> int:
        raise NotImplementedError

    @abstractmethod
    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError


def baseline_embed(text: str, dim: int = DEFAULT_EMBEDDING_DIM) -> np.ndarray:
    """Hashed bag-of-tokens embedding: lowercase, split on non-alphanumerics,
    hash each token into ``dim`` buckets with weight +1, L2-normalize.

    Deterministic across runs and processes; an empty token set yields the
    zero vector.
    """
    vec = np.zeros(dim, dtype=np.float64)
    token = []
    for ch in text.lower():
        if ch.isalnum():
            token.append(ch)
        elif token:
            vec[zlib.crc32("".join(token).encode("utf-8")) % dim] += 1.0
            token = []
    if token:
        vec[zlib.crc32("".join(token).encode("utf-8")) % dim] += 1.0
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


class HashedEmbedder(EmbeddingProvider):
    """Built-in fallback provider wrapping baseline_embed."""

    def __init__(self, dim: int = DEFAULT_EMBEDDING_DIM) -> None:
        self._dim = dim

    @property
    def dimension(self) -> int:
        return self._dim

    def embed(self, text: str) -> np.ndarray:
        return baseline_embed(text, self._dim)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two vectors; zero norm on either side yields 0.0."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def count_score(candidates: CandidateSet) -> dict[str, float]:
    """Each candidate's share of the entity's total cooccurrence count;
    shares sum to 1 within 1e-9."""
    total = candidates.total
    if total <= 0:
        raise ValueError("candidate set has zero total count")
    return {paper_id: n / total for paper_id, n in candidates.candidates.items()}


def candidate_text(title: str, abstract: str) -> str:
    """Candidate text for embedding: title and abstract concatenated; a
    missing abstract leaves the title alone."""
    return " ".join(part for part in (title, abstract) if part)


def context_score(
    query_sentence: str,
    candidate_title: str,
    candidate_abstract: str,
    embedder: EmbeddingProvider,
) -> float:
    """Cosine similarity between the query sentence and the candidate's
    title+abstract under the given provider."""
    return cosine_similarity(
        embedder.embed(query_sentence),
        embedder.embed(candidate_text(candidate_title, candidate_abstract)),
    )


def mixed_score(count_component: float, context_component: float, count_weight: float) -> float:
    """Blend: count_weight * count_score + (1 - count_weight) * context_score."""
    return count_weight * count_component + (1.0 - count_weight) * context_component


@dataclass(frozen=True)
class PaperInfo:
    paper_id: str
    title: str = ""
    abstract: str = ""
    year: int | None = None


class PaperMetadata:
    """Sidecar lookup of paper titles/abstracts, one JSON object per line:
    {"paper_id": ..., "title": ..., "abstract": ..., "year": optional}."""

    def __init__(self, papers: dict[str, PaperInfo] | None = None) -> None:
        self._papers = papers or {}

    @classmethod
    def load(cls, path: str | Path) -> "PaperMetadata":
        papers: dict[str, PaperInfo] = {}
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{line_no}: bad metadata line: {exc}") from None
                paper_id = raw.get("paper_id", "")
                if not paper_id:
                    raise ValueError(f"{path}:{line_no}: metadata line missing paper_id")
                papers[paper_id] = PaperInfo(
                    paper_id=paper_id,
                    title=raw.get("title", "") or "",
                    abstract=raw.get("abstract", "") or "",
                    year=raw.get("year"),
                )
        return cls(papers)

    def get(self, paper_id: str) -> PaperInfo:
        return self._papers.get(paper_id, PaperInfo(paper_id=paper_id))

    def __len__(self) -> int:
        return len(self._papers)


def rank_candidates(
    entity: str,
    sentence: str,
    ds: MappingDataset,
    cfg: RankingConfig,
    embedder: EmbeddingProvider | None = None,
    metadata: PaperMetadata | None = None,
    vector_cache: dict[str, np.ndarray] | None = None,
) -> list[ScoredCandidate]:
    """Score and order an entity's candidates, returning the top min(K, L).

    Order is strict: descending score, ties broken by descending raw count,
    then ascending paper_id. Under the count criterion the embedder is never
    consulted; under the mixed criterion candidate vectors are memoized in
    vector_cache when one is supplied.
    """
    if entity not in ds.entries:
        raise EntityNotInDataset(entity)
    candidates = ds.entries[entity]
    shares = count_score(candidates)

    scored: list[ScoredCandidate] = []
    if cfg.criterion == COUNT:
        for paper_id, n in candidates.candidates.items():
            scored.append(
                ScoredCandidate(
                    paper_id=paper_id,
                    count=n,
                    count_score=shares[paper_id],
                    context_score=None,
                    score=shares[paper_id],
                )
            )
    else:
        if embedder is None:
            raise ValueError("mixed criterion requires an embedding provider")
        meta = metadata or PaperMetadata()
        query_vec = embedder.embed(sentence)
        for paper_id, n in candidates.candidates.items():
            if vector_cache is not None and paper_id in vector_cache:
                cand_vec = vector_cache[paper_id]
            else:
                info = meta.get(paper_id)
                cand_vec = embedder.embed(candidate_text(info.title, info.abstract))
                if vector_cache is not None:
                    vector_cache[paper_id] = cand_vec
            ctx = cosine_similarity(query_vec, cand_vec)
            scored.append(
                ScoredCandidate(
                    paper_id=paper_id,
                    count=n,
                    count_score=shares[paper_id],
                    context_score=ctx,
                    score=mixed_score(shares[paper_id], ctx, cfg.count_weight),
                )
            )

    scored.sort(key=lambda c: (-c.score, -c.count, c.paper_id))
    return scored[: cfg.k]
