"""Missing-citation detection and source-paper age statistics.

An entity has a missing citation when it is in the mapping dataset but its
top recommended source paper does not appear in the document's reference
list. Findings can be double-checked against a second reference source
through the ReferenceResolver interface.
"""

from __future__ import annotations

import json
import logging
import string
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from crpse.cooccur import MappingDataset
from crpse.corpus import QueryDocument, ReferenceEntry
from crpse.ranking import (
    MIXED,
    EmbeddingProvider,
    PaperMetadata,
    RankingConfig,
    rank_candidates,
)
from crpse.segment import EntityExtractor, extract_entities

logger = logging.getLogger(__name__)

_PUNCT_TO_SPACE = str.maketrans({ch: " " for ch in string.punctuation})


def normalize_title(title: str) -> str:
    """Lowercase, replace punctuation with spaces, collapse whitespace."""
    return " ".join(title.lower().translate(_PUNCT_TO_SPACE).split())


@dataclass(frozen=True)
class ReferenceSet:
    """A document's reference list as matchable id and title sets."""

    ids: frozenset[str]
    normalized_titles: frozenset[str]

    @classmethod
    def from_references(cls, references: Iterable[ReferenceEntry]) -> "ReferenceSet":
        ids = set()
        titles = set()
        for ref in references:
            if ref.ref_paper_id:
                ids.add(ref.ref_paper_id)
            normalized = normalize_title(ref.raw_title)
            if normalized:
                titles.add(normalized)
        return cls(ids=frozenset(ids), normalized_titles=frozenset(titles))


def match_reference(paper_id: str, title: str, refset: ReferenceSet) -> bool:
    """True when the candidate's id or normalized title appears in the
    reference set."""
    if paper_id and paper_id in refset.ids:
        return True
    normalized = normalize_title(title)
    return bool(normalized) and normalized in refset.normalized_titles


def detect_missing_citation(
    entity: str,
    sentence: str,
    ds: MappingDataset,
    refset: ReferenceSet,
    cfg: RankingConfig,
    embedder: EmbeddingProvider,
    metadata: PaperMetadata | None = None,
    vector_cache: dict[str, np.ndarray] | None = None,
) -> set[str]:
    """Three-branch missing-citation check for one entity occurrence.

    Returns the singleton {top recommendation} only when the entity is in
    the dataset and its top-ranked source paper is absent from the
    references; the empty set otherwise. Requires the mixed criterion.
    """
    if cfg.criterion != MIXED:
        raise ValueError("missing-citation detection uses the mixed (context) criterion")
    if entity not in ds.entries:
        return set()
    top = rank_candidates(
        entity, sentence, ds, cfg, embedder=embedder, metadata=metadata, vector_cache=vector_cache
    )[0]
    info = (metadata or PaperMetadata()).get(top.paper_id)
    if match_reference(top.paper_id, info.title, refset):
        return set()
    return {top.paper_id}


class ReferenceResolver(ABC):
    """Second-source lookup of a document's reference ids; returns None when
    the document is unknown to the resolver."""

    @abstractmethod
    def references(self, doc_id: str) -> list[str] | None:
        raise NotImplementedError


class FixtureResolver(ReferenceResolver):
    """Resolver backed by a JSONL fixture: {"paper_id": ..., "references": [ids]}."""

    def __init__(self, table: dict[str, list[str]]) -> None:
        self._table = table

    @classmethod
    def load(cls, path: str | Path) -> "FixtureResolver":
        table: dict[str, list[str]] = {}
        with Path(path).open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                raw = json.loads(line)
                table[raw["paper_id"]] = list(raw.get("references", []))
        return cls(table)

    def references(self, doc_id: str) -> list[str] | None:
        return self._table.get(doc_id)


@dataclass(frozen=True)
class Finding:
    """One flagged entity with its recommended (uncited) source paper."""

    entity: str
    paper_id: str
    title: str
    sentence_index: int
    year: int | None = None
    confirmed: bool = False

    def to_json(self) -> dict:
        obj = {
            "entity": self.entity,
            "paper_id": self.paper_id,
            "title": self.title,
            "sentence_index": self.sentence_index,
            "confirmed": self.confirmed,
        }
        if self.year is not None:
            obj["year"] = self.year
        return obj


@dataclass
class MissingCitationReport:
    doc_id: str
    findings: list[Finding] = field(default_factory=list)
    potential: list[Finding] = field(default_factory=list)
    checked: int = 0
    flagged: int = 0

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "findings": [f.to_json() for f in self.findings],
            "potential": [f.to_json() for f in self.potential],
            "checked": self.checked,
            "flagged": self.flagged,
        }


def check_document(
    doc: QueryDocument,
    ds: MappingDataset,
    cfg: RankingConfig,
    extractor: EntityExtractor,
    embedder: EmbeddingProvider,
    resolver: ReferenceResolver | None = None,
    metadata: PaperMetadata | None = None,
) -> MissingCitationReport:
    """Flag every dataset entity in the document whose top recommended
    source paper is missing from the reference list.

    Findings are deduplicated per (entity, recommended paper) and then
    double-checked with the resolver: a finding whose paper the resolver
    *does* see among the document's references moves to ``potential``; with
    no resolver data the findings stay, marked unconfirmed.
    """
    refset = ReferenceSet.from_references(doc.references)
    vector_cache: dict[str, np.ndarray] = {}
    meta = metadata or PaperMetadata()

    raw_findings: list[Finding] = []
    seen_pairs: set[tuple[str, str]] = set()
    checked: set[str] = set()
    for sentence in doc.sentences:
        for mention in extract_entities(sentence, extractor):
            if mention.canonical not in ds.entries:
                continue
            checked.add(mention.canonical)
            for rec_id in detect_missing_citation(
                mention.canonical,
                sentence.text,
                ds,
                refset,
                cfg,
                embedder,
                metadata=meta,
                vector_cache=vector_cache,
            ):
                pair = (mention.canonical, rec_id)
                if pair in seen_pairs:
                    continue
                seen_pairs.add(pair)
                info = meta.get(rec_id)
                raw_findings.append(
                    Finding(
                        entity=mention.canonical,
                        paper_id=rec_id,
                        title=info.title,
                        sentence_index=sentence.index,
                        year=info.year,
                    )
                )

    second_source = resolver.references(doc.doc_id) if resolver is not None else None
    if resolver is not None and second_source is None:
        logger.warning("resolver has no reference data for document %r", doc.doc_id)

    findings: list[Finding] = []
    potential: list[Finding] = []
    for finding in raw_findings:
        if second_source is None:
            findings.append(finding)
        elif finding.paper_id in second_source:
            potential.append(finding)
        else:
            findings.append(
                Finding(
                    entity=finding.entity,
                    paper_id=finding.paper_id,
                    title=finding.title,
                    sentence_index=finding.sentence_index,
                    year=finding.year,
                    confirmed=True,
                )
            )

    return MissingCitationReport(
        doc_id=doc.doc_id,
        findings=findings,
        potential=potential,
        checked=len(checked),
        flagged=len(findings),
    )


def _round_half_up(value: float, places: int = 1) -> float:
    return float(Decimal(repr(value)).quantize(Decimal(f"1e-{places}"), rounding=ROUND_HALF_UP))


def age_stats(
    findings: Sequence[tuple[str, int]], baseline_year: int
) -> dict[str, float | int]:
    """Statistics over source-paper ages (baseline_year - publication year).

    Mode is the smallest most-frequent age on ties; mean and median are
    rounded half-up to one decimal (the median of an even count is the
    midpoint of the two middle values).
    """
    if not findings:
        raise ValueError("no findings")
    ages = []
    for entity, year in findings:
        if year > baseline_year:
            raise ValueError(f"{entity}: publication year {year} is after baseline {baseline_year}")
        ages.append(baseline_year - year)

    ages.sort()
    n = len(ages)
    counts = Counter(ages)
    top = max(counts.values())
    mode = min(age for age, c in counts.items() if c == top)
    mean = _round_half_up(sum(ages) / n)
    if n % 2 == 1:
        median = float(ages[n // 2])
    else:
        median = _round_half_up((ages[n // 2 - 1] + ages[n // 2]) / 2)
    return {"max": ages[-1], "min": ages[0], "mode": mode, "mean": mean, "median": median}
