"""End-to-end recommendation over a query document.

For each sentence: extract entities, keep the ones present in the mapping
dataset, and rank their candidate source papers in the sentence's context.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from crpse.cooccur import MappingDataset
from crpse.corpus import QueryDocument
from crpse.ranking import (
    EmbeddingProvider,
    PaperMetadata,
    RankingConfig,
    ScoredCandidate,
    rank_candidates,
)
from crpse.segment import EntityExtractor, extract_entities


@dataclass(frozen=True)
class Recommendation:
    """Top-K source-paper candidates for one entity occurrence."""

    entity: str
    sentence_index: int
    candidates: tuple[ScoredCandidate, ...]

    def to_json(self) -> dict:
        return {
            "entity": self.entity,
            "sentence_index": self.sentence_index,
            "candidates": [c.to_json() for c in self.candidates],
        }


def recommend(
    doc: QueryDocument,
    ds: MappingDataset,
    cfg: RankingConfig,
    extractor: EntityExtractor,
    embedder: EmbeddingProvider | None = None,
    metadata: PaperMetadata | None = None,
) -> list[Recommendation]:
    """Recommend source papers for every dataset entity mentioned in the
    document.

    Entities absent from the dataset are dropped at the gate. An entity
    re-occurring with an identical scored candidate list collapses to its
    first occurrence; context-dependent rankings that differ are reported
    per occurrence.
    """
    results: list[Recommendation] = []
    emitted: set[tuple[str, tuple[tuple[str, float], ...]]] = set()
    vector_cache: dict[str, np.ndarray] = {}

    for sentence in doc.sentences:
        for mention in extract_entities(sentence, extractor):
            if mention.canonical not in ds.entries:
                continue
            candidates = rank_candidates(
                mention.canonical,
                sentence.text,
                ds,
                cfg,
                embedder=embedder,
                metadata=metadata,
                vector_cache=vector_cache,
            )
            if not candidates:
                continue
            key = (
                mention.canonical,
                tuple((c.paper_id, c.score) for c in candidates),
            )
            if key in emitted:
                continue
            emitted.add(key)
            results.append(
                Recommendation(
                    entity=mention.canonical,
                    sentence_index=sentence.index,
                    candidates=tuple(candidates),
                )
            )
    return results
