"""Sentence segmentation, entity-mention extraction, and alias merging.

Segmentation is rule-based so results are reproducible without external
models: a sentence boundary sits after ``.``, ``?`` or ``!`` when followed
by whitespace and an uppercase letter or digit, except after a known
abbreviation, and never inside a citation span.

The baseline extractor is a deterministic stand-in for an external NER
service; a remote provider can be plugged in through the EntityExtractor
interface (see crpse.provider).
"""

from __future__ import annotations

import logging
import string
from abc import ABC, abstractmethod
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from crpse.corpus import CitationSpan, PaperRecord, QueryDocument, ReferenceEntry

logger = logging.getLogger(__name__)

_TERMINALS = ".?!"

# Fixed exception list; matched case-sensitively against the text ending at
# a candidate period. "etc." is excluded on purpose: it often ends sentences.
ABBREVIATIONS = (
    "e.g.",
    "i.e.",
    "et al.",
    "cf.",
    "vs.",
    "viz.",
    "Fig.",
    "Figs.",
    "Eq.",
    "Eqs.",
    "Sec.",
    "Secs.",
    "Tab.",
    "No.",
    "Vol.",
    "Dr.",
    "Prof.",
)

# Lowercase head nouns that may close an entity mention ("Adam optimizer").
HEAD_NOUNS = frozenset({"optimizer", "algorithm", "method", "dataset", "model"})


@dataclass(frozen=True)
class Sentence:
    """One body sentence with the citations whose spans start inside it.

    ``start``/``end`` are offsets into the owning body; ``citation_spans``
    are sentence-relative (start, end, target) triples for the same
    citations listed in ``citations``.
    """

    index: int
    text: str
    citations: tuple[str, ...] = ()
    start: int = 0
    end: int = 0
    citation_spans: tuple[tuple[int, int, str], ...] = ()


@dataclass(frozen=True)
class ExtractedSpan:
    """A raw mention produced by an extractor: surface plus offsets in the text."""

    surface: str
    start: int
    end: int


@dataclass(frozen=True)
class EntityMention:
    """A normalized entity mention located in one sentence."""

    surface: str
    canonical: str
    sentence_index: int
    start: int | None = None
    end: int | None = None


class EntityExtractor(ABC):
    """Provider interface: one operation, text to raw mentions."""

    @abstractmethod
    def extract(self, text: str) -> list[ExtractedSpan]:
        raise NotImplementedError


def _ends_with_abbreviation(body: str, period_index: int) -> bool:
    head = body[: period_index + 1]
    for abbr in ABBREVIATIONS:
        if head.endswith(abbr):
            before = period_index + 1 - len(abbr)
            if before == 0 or body[before - 1].isspace():
                return True
    return False


def segment_sentences(body: str, spans: Sequence[CitationSpan] = ()) -> list[Sentence]:
    """Split body text into sentences and assign each citation span to one.

    A span belongs to the sentence containing its start offset. Sentence
    texts are exact body slices, so joining them with the original
    inter-sentence whitespace reconstructs the body.
    """
    if not body.strip():
        return []

    sorted_spans = sorted(spans, key=lambda s: s.start)

    def inside_span(pos: int) -> bool:
        for s in sorted_spans:
            if s.start > pos:
                break
            if s.start <= pos < s.end:
                return True
        return False

    # Each break is (end_of_sentence, start_of_next); the punctuation mark
    # stays with the sentence it terminates.
    breaks: list[tuple[int, int]] = []
    n = len(body)
    for i, ch in enumerate(body):
        if ch not in _TERMINALS:
            continue
        if inside_span(i):
            continue
        j = i + 1
        k = j
        while k < n and body[k].isspace():
            k += 1
        if k == j or k >= n:
            continue
        nxt = body[k]
        if not (nxt.isupper() or nxt.isdigit()):
            continue
        if ch == "." and _ends_with_abbreviation(body, i):
            continue
        breaks.append((j, k))

    first = n - len(body.lstrip())
    last = len(body.rstrip())
    starts = [first] + [k for _, k in breaks]
    ends = [j for j, _ in breaks] + [last]

    sentences: list[Sentence] = []
    bounds: list[tuple[int, int]] = []
    for start, end in zip(starts, ends):
        text = body[start:end]
        if not text:
            continue
        bounds.append((start, end))

    span_lists: list[list[CitationSpan]] = [[] for _ in bounds]
    sentence_ends = [end for _, end in bounds]
    for span in sorted_spans:
        # The first sentence whose end exceeds the span start owns it; spans
        # falling in inter-sentence whitespace attach to the next sentence.
        pos = bisect_right(sentence_ends, span.start)
        pos = min(pos, len(bounds) - 1)
        span_lists[pos].append(span)

    for idx, ((start, end), owned) in enumerate(zip(bounds, span_lists), start=1):
        rel = tuple(
            (max(s.start - start, 0), min(s.end - start, end - start), s.target_paper_id)
            for s in owned
        )
        sentences.append(
            Sentence(
                index=idx,
                text=body[start:end],
                citations=tuple(s.target_paper_id for s in owned),
                start=start,
                end=end,
                citation_spans=rel,
            )
        )
    return sentences


def normalize_surface(surface: str) -> str:
    """Canonicalize a mention surface: trim, collapse whitespace runs, drop
    trailing punctuation. Case is preserved (it distinguishes entities)."""
    collapsed = " ".join(surface.split())
    return collapsed.rstrip(string.punctuation + " ")


@dataclass(frozen=True)
class _Token:
    text: str
    start: int
    end: int
    core: str
    core_start: int
    core_end: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            break
        j = i
        while j < n and not text[j].isspace():
            j += 1
        word = text[i:j]
        a, b = 0, len(word)
        while a < b and not word[a].isalnum():
            a += 1
        while b > a and not word[b - 1].isalnum():
            b -= 1
        tokens.append(
            _Token(text=word, start=i, end=j, core=word[a:b], core_start=i + a, core_end=i + b)
        )
        i = j
    return tokens


class BaselineExtractor(EntityExtractor):
    """Deterministic capitalization-based mention extractor.

    A token qualifies as a mention head when it has an uppercase letter at
    any character position other than the sentence's first character;
    sentence-initial tokens whose only uppercase is that first character
    qualify only when the same word is seen capitalized elsewhere in the
    document. Maximal runs of qualifying tokens form one mention, optionally
    closed by a lowercase head noun (optimizer, algorithm, ...).
    """

    def __init__(self, document_capitalized: Iterable[str] = ()) -> None:
        self._doc_caps = set(document_capitalized)

    @classmethod
    def for_document(cls, sentence_texts: Iterable[str]) -> "BaselineExtractor":
        """Build an extractor primed with the words capitalized at
        non-initial positions anywhere in the document."""
        caps: set[str] = set()
        for text in sentence_texts:
            for token in _tokenize(text)[1:]:
                if token.core and token.core[0].isupper():
                    caps.add(token.core)
        return cls(caps)

    def _is_head(self, token: _Token, sentence_first_char: int) -> bool:
        if not token.core:
            return False
        for offset, ch in enumerate(token.core):
            if ch.isupper() and token.core_start + offset != sentence_first_char:
                return True
        if token.core[0].isupper() and token.core_start == sentence_first_char:
            return token.core in self._doc_caps
        return False

    def extract(self, text: str) -> list[ExtractedSpan]:
        tokens = _tokenize(text)
        if not tokens:
            return []
        first_char = tokens[0].core_start if tokens[0].core else tokens[0].start
        heads = [self._is_head(t, first_char) for t in tokens]

        mentions: list[ExtractedSpan] = []
        i = 0
        while i < len(tokens):
            if not heads[i]:
                i += 1
                continue
            j = i
            while j + 1 < len(tokens) and heads[j + 1]:
                j += 1
            last = j
            if j + 1 < len(tokens) and tokens[j + 1].core in HEAD_NOUNS:
                last = j + 1
            start = tokens[i].core_start
            end = tokens[last].core_end
            mentions.append(ExtractedSpan(surface=text[start:end], start=start, end=end))
            i = last + 1
        return mentions


def extract_entities(sentence: Sentence, extractor: EntityExtractor) -> list[EntityMention]:
    """Run the extractor over one sentence; mentions come back in
    left-to-right order, deduplicated on canonical form.

    Extractor failures are logged and yield an empty list so the pipeline
    keeps going.
    """
    try:
        raw = extractor.extract(sentence.text)
    except Exception:
        logger.warning(
            "entity extraction failed for sentence %d; skipping", sentence.index, exc_info=True
        )
        return []

    mentions: list[EntityMention] = []
    seen: set[str] = set()
    for span in sorted(raw, key=lambda s: s.start):
        canonical = normalize_surface(span.surface)
        if not canonical or canonical in seen:
            continue
        seen.add(canonical)
        mentions.append(
            EntityMention(
                surface=span.surface,
                canonical=canonical,
                sentence_index=sentence.index,
                start=span.start,
                end=span.end,
            )
        )
    return mentions


def token_lcs(a: Sequence[str], b: Sequence[str]) -> tuple[str, ...]:
    """Longest common subsequence over whitespace tokens (not characters)."""
    la, lb = len(a), len(b)
    dp = [[0] * (lb + 1) for _ in range(la + 1)]
    for i in range(la - 1, -1, -1):
        for j in range(lb - 1, -1, -1):
            if a[i] == b[j]:
                dp[i][j] = dp[i + 1][j + 1] + 1
            else:
                dp[i][j] = max(dp[i + 1][j], dp[i][j + 1])
    out: list[str] = []
    i = j = 0
    while i < la and j < lb:
        if a[i] == b[j]:
            out.append(a[i])
            i += 1
            j += 1
        elif dp[i + 1][j] >= dp[i][j + 1]:
            i += 1
        else:
            j += 1
    return tuple(out)


def merge_aliases(groups: Mapping[str, Sequence[str]]) -> dict[str, str]:
    """Merge alias surface forms that share a top recommended paper.

    Within each group the token-level LCS of all members becomes the merged
    key; a group with an empty LCS keeps each member's own canonical form.
    Idempotent: merging an already-merged group changes nothing.
    """
    alias: dict[str, str] = {}
    for _, members in groups.items():
        forms = list(dict.fromkeys(members))
        if not forms:
            continue
        common: tuple[str, ...] = tuple(forms[0].split())
        for form in forms[1:]:
            common = token_lcs(common, tuple(form.split()))
            if not common:
                break
        merged = " ".join(common)
        for form in forms:
            alias[form] = merged if merged else form
    return alias


def parse_query_document(raw: dict, doc_id: str = "") -> QueryDocument:
    """Build a QueryDocument from a corpus-record-shaped JSON object.

    Body is segmented with any citation spans present; references may be
    empty for pure recommendation runs. ``paper_id`` is optional and falls
    back to the supplied doc_id.
    """
    from crpse.corpus import RecordValidationError, validate_record

    body = raw.get("body", "")
    if not isinstance(body, str) or not body:
        raise RecordValidationError("empty body")
    filled = dict(raw)
    filled.setdefault("paper_id", doc_id or "query")
    if not filled["paper_id"]:
        filled["paper_id"] = doc_id or "query"
    record = validate_record(filled)
    return query_document_from_record(record, doc_id=raw.get("paper_id") or doc_id)


def query_document_from_record(record: PaperRecord, doc_id: str = "") -> QueryDocument:
    """Segment a validated record into a QueryDocument."""
    sentences = segment_sentences(record.body, record.citation_spans)
    return QueryDocument(
        sentences=sentences,
        references=list(record.references),
        doc_id=doc_id or record.paper_id,
    )
