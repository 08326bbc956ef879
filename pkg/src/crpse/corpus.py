"""Corpus data model and line-delimited record ingestion.

Corpus files carry one JSON object per line:

    {"paper_id": str, "title": str, "abstract": str, "body": str,
     "citation_spans": [{"start": int, "end": int, "target": str}],
     "references": [{"id": str, "title": str}], "year": int (optional)}

Records are validated on ingestion. Invalid lines are skipped and counted,
never fatal; an unreadable file is fatal.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterator

if TYPE_CHECKING:
    from crpse.segment import Sentence

logger = logging.getLogger(__name__)


class RecordValidationError(ValueError):
    """A raw record violates a corpus invariant; the message names the first violation."""


@dataclass(frozen=True)
class CitationSpan:
    """A resolved in-text citation marker inside a record's body text.

    The interval is half-open: ``body[start:end]`` is the marker text.
    """

    start: int
    end: int
    target_paper_id: str


@dataclass(frozen=True)
class ReferenceEntry:
    """One entry of a reference list; the id may be empty when unresolved."""

    ref_paper_id: str = ""
    raw_title: str = ""


@dataclass(frozen=True)
class PaperRecord:
    """One corpus paper with body text, citation spans, and its reference list."""

    paper_id: str
    title: str
    abstract: str
    body: str
    citation_spans: tuple[CitationSpan, ...]
    references: tuple[ReferenceEntry, ...]
    year: int | None = None

    def to_json(self) -> dict:
        """Serialize back to the line-delimited wire schema."""
        obj = {
            "paper_id": self.paper_id,
            "title": self.title,
            "abstract": self.abstract,
            "body": self.body,
            "citation_spans": [
                {"start": s.start, "end": s.end, "target": s.target_paper_id}
                for s in self.citation_spans
            ],
            "references": [
                {"id": r.ref_paper_id, "title": r.raw_title} for r in self.references
            ],
        }
        if self.year is not None:
            obj["year"] = self.year
        return obj


@dataclass
class QueryDocument:
    """A document to recommend citations for: segmented sentences plus its reference list."""

    sentences: list["Sentence"]
    references: list[ReferenceEntry]
    doc_id: str = ""

    def __post_init__(self) -> None:
        for i, sentence in enumerate(self.sentences, start=1):
            if sentence.index != i:
                raise RecordValidationError(
                    f"sentence indices must be contiguous from 1; position {i} has index {sentence.index}"
                )


def _string_field(raw: dict, key: str, default: str = "") -> str:
    value = raw.get(key, default)
    if not isinstance(value, str):
        raise RecordValidationError(f"field {key!r} must be a string")
    return value


def validate_record(raw: dict) -> PaperRecord:
    """Validate one parsed record against all corpus invariants.

    Unresolved citation spans (empty target) are dropped. Raises
    RecordValidationError naming the first violated invariant otherwise.
    """
    if not isinstance(raw, dict):
        raise RecordValidationError("record is not a JSON object")

    paper_id = raw.get("paper_id", "")
    if not isinstance(paper_id, str) or not paper_id:
        raise RecordValidationError("empty paper_id")

    title = _string_field(raw, "title")
    abstract = _string_field(raw, "abstract")

    body = raw.get("body", "")
    if not isinstance(body, str) or not body:
        raise RecordValidationError("empty body")

    references: list[ReferenceEntry] = []
    for entry in raw.get("references", []) or []:
        if not isinstance(entry, dict):
            raise RecordValidationError("reference entry is not an object")
        ref_id = entry.get("id", "")
        ref_title = entry.get("title", "")
        if not isinstance(ref_id, str) or not isinstance(ref_title, str):
            raise RecordValidationError("reference fields must be strings")
        if not ref_id and not ref_title:
            raise RecordValidationError("reference entry has neither id nor title")
        references.append(ReferenceEntry(ref_paper_id=ref_id, raw_title=ref_title))
    ref_ids = {r.ref_paper_id for r in references if r.ref_paper_id}

    spans: list[CitationSpan] = []
    for entry in raw.get("citation_spans", []) or []:
        if not isinstance(entry, dict):
            raise RecordValidationError("citation span is not an object")
        start, end = entry.get("start"), entry.get("end")
        target = entry.get("target", "")
        if not isinstance(start, int) or not isinstance(end, int) or isinstance(start, bool) or isinstance(end, bool):
            raise RecordValidationError("span offsets must be integers")
        if not isinstance(target, str):
            raise RecordValidationError("span target must be a string")
        if not target:
            # Unresolved in-text citation: dropped at ingestion.
            continue
        if start >= end:
            raise RecordValidationError(f"span interval invalid: [{start}, {end})")
        if start < 0 or end > len(body):
            raise RecordValidationError("span out of bounds")
        if target not in ref_ids:
            raise RecordValidationError(f"span target {target!r} missing from references")
        spans.append(CitationSpan(start=start, end=end, target_paper_id=target))

    spans.sort(key=lambda s: (s.start, s.end))
    for prev, cur in zip(spans, spans[1:]):
        if cur.start < prev.end:
            raise RecordValidationError("overlapping citation spans")

    year = raw.get("year")
    if year is not None and (not isinstance(year, int) or isinstance(year, bool)):
        raise RecordValidationError("year must be an integer")

    return PaperRecord(
        paper_id=paper_id,
        title=title,
        abstract=abstract,
        body=body,
        citation_spans=tuple(spans),
        references=tuple(references),
        year=year,
    )


@dataclass
class CorpusReader:
    """Lazily yields validated records from a line-delimited corpus file.

    ``loaded`` and ``skipped`` track progress during iteration and hold the
    final summary after exhaustion; loaded + skipped equals the number of
    input lines. Re-iterating resets the counters.
    """

    path: Path
    loaded: int = 0
    skipped: int = 0
    _seen_ids: set[str] = field(default_factory=set, repr=False)

    def __iter__(self) -> Iterator[PaperRecord]:
        self.loaded = 0
        self.skipped = 0
        self._seen_ids = set()
        with self.path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                try:
                    raw = json.loads(line)
                    record = validate_record(raw)
                except (json.JSONDecodeError, RecordValidationError) as exc:
                    self.skipped += 1
                    logger.warning("%s:%d skipped: %s", self.path, line_no, exc)
                    continue
                if record.paper_id in self._seen_ids:
                    self.skipped += 1
                    logger.warning(
                        "%s:%d skipped: duplicate paper_id %r", self.path, line_no, record.paper_id
                    )
                    continue
                self._seen_ids.add(record.paper_id)
                self.loaded += 1
                yield record


def load_corpus(path: str | Path) -> CorpusReader:
    """Open a corpus file for lazy, validated iteration.

    Raises FileNotFoundError for an unreadable path; malformed records are
    skipped per line during iteration, never fatal.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"corpus file not found: {path}")
    return CorpusReader(path=path)
