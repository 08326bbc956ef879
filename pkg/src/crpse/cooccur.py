"""Entity-citation cooccurrence accumulation and the mapping dataset.

Counts increment once per (entity, paper) pair per sentence, regardless of
repeated mentions or repeated citation markers. Citation spans that overlap
the mention itself are excluded when the extractor supplied offsets.

Dataset files are a versioned, sorted, line-based text format:

    CRPSE-DS v1 threshold=<k>
    <entity>\t<paper_id>\t<count>

with entities sorted lexicographically and candidates sorted by descending
count then paper_id, so builds are diffable and byte-deterministic.
"""

from __future__ import annotations

import os
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from crpse.segment import EntityMention, Sentence

DATASET_FORMAT = "CRPSE-DS"
DATASET_VERSION = 1

_HEADER_RE = re.compile(r"^CRPSE-DS v(\d+) threshold=(\d+)$")


class DatasetFormatError(ValueError):
    """A dataset file does not parse as the documented format."""


class DatasetVersionError(DatasetFormatError):
    """A dataset file declares an unsupported format version."""

    def __init__(self, expected: int, found: int) -> None:
        super().__init__(f"dataset format version mismatch: expected v{expected}, found v{found}")
        self.expected = expected
        self.found = found


@dataclass(frozen=True)
class CandidateSet:
    """Candidate source papers of one entity with their cooccurrence counts."""

    candidates: dict[str, int]

    @property
    def total(self) -> int:
        """Sum of cooccurrence counts over all candidates."""
        return sum(self.candidates.values())

    def max_count(self) -> int:
        return max(self.candidates.values())

    def ordered(self) -> list[tuple[str, int]]:
        """Candidates by descending count, ties by ascending paper_id."""
        return sorted(self.candidates.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass
class DatasetMeta:
    threshold: int
    corpus_id: str = field(default="", compare=False)
    built_at: str = field(default="", compare=False)


@dataclass
class MappingDataset:
    """The published-entity to candidate-source-papers index."""

    entries: dict[str, CandidateSet]
    meta: DatasetMeta

    def __contains__(self, entity: str) -> bool:
        return entity in self.entries

    def __len__(self) -> int:
        return len(self.entries)


class CooccurrenceAccumulator:
    """Mutable (entity, paper) pair counter; mergeable across workers."""

    def __init__(self) -> None:
        self.counts: dict[str, Counter[str]] = {}

    def add(self, entity: str, paper_id: str, amount: int = 1) -> None:
        self.counts.setdefault(entity, Counter())[paper_id] += amount

    def merge(self, other: "CooccurrenceAccumulator") -> "CooccurrenceAccumulator":
        """Pointwise addition; commutative and associative."""
        for entity, counter in other.counts.items():
            self.counts.setdefault(entity, Counter()).update(counter)
        return self

    def entity_count(self) -> int:
        return len(self.counts)


def _span_clear_of_mention(span: tuple[int, int, str], mention: EntityMention) -> bool:
    if mention.start is None or mention.end is None:
        return True
    start, end, _ = span
    return end <= mention.start or start >= mention.end


def record_cooccurrences(
    sentence: Sentence,
    mentions: Sequence[EntityMention],
    acc: CooccurrenceAccumulator,
) -> CooccurrenceAccumulator:
    """Add one count per distinct (entity, cited paper) pair in the sentence.

    A pair is counted only if at least one citation span for that paper does
    not overlap the mention's own character interval.
    """
    distinct_mentions: dict[str, EntityMention] = {}
    for m in mentions:
        distinct_mentions.setdefault(m.canonical, m)

    spans_by_target: dict[str, list[tuple[int, int, str]]] = {}
    if sentence.citation_spans:
        for span in sentence.citation_spans:
            spans_by_target.setdefault(span[2], []).append(span)
    else:
        for target in sentence.citations:
            spans_by_target.setdefault(target, [])

    for canonical, mention in distinct_mentions.items():
        for target, spans in spans_by_target.items():
            if spans and not any(_span_clear_of_mention(s, mention) for s in spans):
                continue
            acc.add(canonical, target)
    return acc


def apply_threshold(
    acc: CooccurrenceAccumulator, min_count: int = 20, corpus_id: str = ""
) -> MappingDataset:
    """Drop entities whose best candidate count is below min_count.

    Retained entities keep all their candidates, including sub-threshold
    ones; the removal condition quantifies over entities, not candidates.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    entries: dict[str, CandidateSet] = {}
    for entity in sorted(acc.counts):
        counter = acc.counts[entity]
        if not counter:
            continue
        if max(counter.values()) < min_count:
            continue
        entries[entity] = CandidateSet(candidates=dict(counter))
    built_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return MappingDataset(
        entries=entries,
        meta=DatasetMeta(threshold=min_count, corpus_id=corpus_id, built_at=built_at),
    )


def save_dataset(ds: MappingDataset, path: str | Path) -> None:
    """Write the dataset in the versioned text format, atomically."""
    path = Path(path)
    lines = [f"{DATASET_FORMAT} v{DATASET_VERSION} threshold={ds.meta.threshold}"]
    for entity in sorted(ds.entries):
        if "\t" in entity or "\n" in entity:
            raise DatasetFormatError(f"entity key not serializable: {entity!r}")
        for paper_id, count in ds.entries[entity].ordered():
            if "\t" in paper_id or "\n" in paper_id:
                raise DatasetFormatError(f"paper id not serializable: {paper_id!r}")
            lines.append(f"{entity}\t{paper_id}\t{count}")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def load_dataset(path: str | Path) -> MappingDataset:
    """Parse a dataset file; raises on any malformed line, never returning a
    partial dataset."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}: empty file, missing header")
    m = _HEADER_RE.match(lines[0])
    if m is None:
        generic = re.match(r"^CRPSE-DS v(\d+)\b", lines[0])
        if generic and int(generic.group(1)) != DATASET_VERSION:
            raise DatasetVersionError(expected=DATASET_VERSION, found=int(generic.group(1)))
        raise DatasetFormatError(f"{path}: bad header line: {lines[0]!r}")
    version = int(m.group(1))
    if version != DATASET_VERSION:
        raise DatasetVersionError(expected=DATASET_VERSION, found=version)
    threshold = int(m.group(2))

    entries: dict[str, dict[str, int]] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise DatasetFormatError(f"{path}:{line_no}: expected 3 tab-separated fields")
        entity, paper_id, count_text = parts
        if not entity or not paper_id:
            raise DatasetFormatError(f"{path}:{line_no}: empty entity or paper id")
        try:
            count = int(count_text)
        except ValueError:
            raise DatasetFormatError(f"{path}:{line_no}: count is not an integer") from None
        if count < 1:
            raise DatasetFormatError(f"{path}:{line_no}: count must be >= 1")
        bucket = entries.setdefault(entity, {})
        if paper_id in bucket:
            raise DatasetFormatError(f"{path}:{line_no}: duplicate (entity, paper) pair")
        bucket[paper_id] = count

    return MappingDataset(
        entries={entity: CandidateSet(candidates=cands) for entity, cands in entries.items()},
        meta=DatasetMeta(threshold=threshold),
    )


def build_accumulator(
    documents: Iterable[tuple[Sequence[Sentence], Sequence[Sequence[EntityMention]]]],
) -> CooccurrenceAccumulator:
    """Accumulate over (sentences, mentions-per-sentence) pairs for whole documents."""
    acc = CooccurrenceAccumulator()
    for sentences, mention_lists in documents:
        for sentence, mentions in zip(sentences, mention_lists):
            record_cooccurrences(sentence, mentions, acc)
    return acc
