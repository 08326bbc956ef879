"""Rank-based evaluation metrics and seeded synthetic corpora.

The generator plants entities whose source papers dominate their
cooccurrence counts by construction, injects distractor citations at a
configurable rate, and adds flat-distribution outlier terms, emitting the
corpus, gold labels, and paper metadata as line-delimited JSON fully
determined by the seed.
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from crpse.cooccur import MappingDataset
from crpse.outliers import OUTLIER, PUBLISHED, LabeledSample, build_feature
from crpse.ranking import EmbeddingProvider, PaperMetadata, RankingConfig, rank_candidates

Rankings = Sequence[tuple[Sequence[str], str]]


@dataclass(frozen=True)
class GoldLabel:
    """One labeled query: entity, its true source paper, and the sentence
    the entity was seen in."""

    entity: str
    gold_id: str
    sentence: str


@dataclass(frozen=True)
class MetricsReport:
    recall_at_1: float
    recall_at_5: float
    recall_at_10: float
    mrr: float
    map_score: float
    n: int

    def to_json(self) -> dict:
        return {
            "recall@1": self.recall_at_1,
            "recall@5": self.recall_at_5,
            "recall@10": self.recall_at_10,
            "mrr": self.mrr,
            "map": self.map_score,
            "n": self.n,
        }


def recall_at_k(rankings: Rankings, k: int) -> float:
    """Fraction of queries whose gold id appears within the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not rankings:
        raise ValueError("no queries to score")
    hits = sum(1 for ids, gold in rankings if gold in list(ids)[:k])
    return hits / len(rankings)


def mrr(rankings: Rankings) -> float:
    """Mean reciprocal rank of the gold id; absent gold contributes 0."""
    if not rankings:
        raise ValueError("no queries to score")
    total = 0.0
    for ids, gold in rankings:
        ids = list(ids)
        if gold in ids:
            total += 1.0 / (ids.index(gold) + 1)
    return total / len(rankings)


def mean_average_precision(rankings: Rankings) -> float:
    """MAP with one relevant paper per query: average precision reduces to
    precision at the gold's rank, computed independently of mrr()."""
    if not rankings:
        raise ValueError("no queries to score")
    total = 0.0
    for ids, gold in rankings:
        relevant_seen = 0
        ap = 0.0
        for position, paper_id in enumerate(ids, start=1):
            if paper_id == gold:
                relevant_seen += 1
                ap += relevant_seen / position
        total += ap
    return total / len(rankings)


def evaluate(
    ds: MappingDataset,
    cfg: RankingConfig,
    gold: Sequence[GoldLabel],
    embedder: EmbeddingProvider | None = None,
    metadata: PaperMetadata | None = None,
) -> MetricsReport:
    """Rank each gold query in its context sentence and score the results.

    Gold entities absent from the dataset count as misses, not errors; the
    ranking window is max(10, cfg.k) so recall@10 is always measurable.
    """
    if not gold:
        raise ValueError("gold list is empty")
    window_cfg = dataclasses.replace(cfg, k=max(10, cfg.k))
    vector_cache: dict[str, np.ndarray] = {}
    rankings: list[tuple[list[str], str]] = []
    for label in gold:
        if label.entity in ds.entries:
            ranked = rank_candidates(
                label.entity,
                label.sentence,
                ds,
                window_cfg,
                embedder=embedder,
                metadata=metadata,
                vector_cache=vector_cache,
            )
            ids = [c.paper_id for c in ranked]
        else:
            ids = []
        rankings.append((ids, label.gold_id))
    return MetricsReport(
        recall_at_1=recall_at_k(rankings, 1),
        recall_at_5=recall_at_k(rankings, 5),
        recall_at_10=recall_at_k(rankings, 10),
        mrr=mrr(rankings),
        map_score=mean_average_precision(rankings),
        n=len(gold),
    )


def load_gold(path: str | Path) -> list[GoldLabel]:
    """Read gold labels from JSONL: {"entity", "gold_id", "sentence"}."""
    labels: list[GoldLabel] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            labels.append(
                GoldLabel(
                    entity=raw["entity"],
                    gold_id=raw["gold_id"],
                    sentence=raw.get("sentence", ""),
                )
            )
    return labels


# --- synthetic corpus generation -------------------------------------------

_NAME_STEMS = (
    "Brev", "Cald", "Dorn", "Ferro", "Glim", "Hax", "Juno", "Kryl",
    "Lumo", "Marn", "Nexo", "Orin", "Pavo", "Quill", "Rast", "Silv",
    "Tarn", "Ulmo", "Vorn", "Wex", "Xylo", "Yarr", "Zeph", "Ambric",
)
_NAME_SUFFIXES = ("Net", "Rank", "Flow", "Gen", "Form", "Mix", "Seek", "Cast")
_OUTLIER_STEMS = ("Krux", "Veld", "Osk", "Pryn", "Quot", "Ryn", "Stell", "Tov")
_TOPICS = (
    "sequence labeling",
    "graph partitioning",
    "speech enhancement",
    "image retrieval",
    "entity disambiguation",
    "trajectory prediction",
    "program synthesis",
    "anomaly detection",
)
_ADJECTIVES = ("scalable", "robust", "lightweight", "adaptive", "streaming", "sparse")

_CITE_TEMPLATES = (
    "We adopt {e} for {t} in this setting [{m}]{extra}.",
    "Our experiments rely on {e} to handle {t} [{m}]{extra}.",
    "Prior work applies {e} to {t} with strong results [{m}]{extra}.",
    "Performance improves further when {e} is tuned for {t} [{m}]{extra}.",
)
_FILLER_SENTENCES = (
    "Additional implementation details appear in the appendix.",
    "Hyperparameters follow common defaults throughout.",
    "All runs use the same hardware and software stack.",
    "Ablations are deferred to future work.",
)
_QUERY_TEMPLATES = (
    "Our analysis builds on {e} for {t} throughout.",
    "The pipeline applies {e} to large-scale {t}.",
    "Results with {e} are consistent across {t} benchmarks.",
)


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of a generated corpus; cooccurrence floors default above the
    standard inclusion threshold of 20."""

    n_entities: int
    docs_per_entity: int = 4
    distractor_rate: float = 0.0
    outlier_terms: int = 0
    min_cooccurrences: int = 24
    # Outlier terms cooccur with many papers at similar counts; the width
    # matches the flat training shapes so the filter sees them in-distribution.
    outlier_candidates: int = 12
    outlier_pair_count: int = 20

    def __post_init__(self) -> None:
        if self.n_entities < 1:
            raise ValueError("n_entities must be >= 1")
        if not 0.0 <= self.distractor_rate < 1.0:
            raise ValueError("distractor_rate must be in [0, 1)")


@dataclass(frozen=True)
class GeneratedCorpus:
    corpus_path: Path
    gold_path: Path
    metadata_path: Path
    n_documents: int
    n_sentences: int
    planted: dict[str, str]
    outlier_terms: tuple[str, ...]


def _entity_name(i: int) -> str:
    stem = _NAME_STEMS[i % len(_NAME_STEMS)]
    suffix = _NAME_SUFFIXES[(i // len(_NAME_STEMS)) % len(_NAME_SUFFIXES)]
    serial = i // (len(_NAME_STEMS) * len(_NAME_SUFFIXES))
    return f"{stem}{suffix}{serial}" if serial else f"{stem}{suffix}"


def _outlier_name(i: int) -> str:
    stem = _OUTLIER_STEMS[i % len(_OUTLIER_STEMS)]
    return f"{stem}X{i // len(_OUTLIER_STEMS)}" if i >= len(_OUTLIER_STEMS) else f"{stem}X"


def _assemble_record(
    doc_id: str,
    sentences: list[tuple[str, list[tuple[str, str]]]],
    titles: dict[str, str],
    year: int,
) -> dict:
    """Join (sentence, [(marker, target)]) pairs into one corpus record with
    character-accurate citation spans."""
    body_parts: list[str] = []
    spans: list[dict] = []
    offset = 0
    cited: list[str] = []
    for text, markers in sentences:
        for marker, target in markers:
            where = text.index(marker)
            spans.append(
                {"start": offset + where, "end": offset + where + len(marker), "target": target}
            )
            if target not in cited:
                cited.append(target)
        body_parts.append(text)
        offset += len(text) + 1
    body = " ".join(body_parts)
    return {
        "paper_id": doc_id,
        "title": f"Working notes {doc_id}",
        "abstract": "",
        "body": body,
        "citation_spans": spans,
        "references": [{"id": pid, "title": titles.get(pid, "")} for pid in cited],
        "year": year,
    }


def generate_synthetic_corpus(
    spec: SyntheticSpec, seed: int, out_dir: str | Path
) -> GeneratedCorpus:
    """Write corpus.jsonl, gold.jsonl, and papers.jsonl under out_dir.

    Every planted entity cooccurs with its source paper in at least
    spec.min_cooccurrences sentences; distractor citations to other source
    papers are injected per sentence at spec.distractor_rate; outlier terms
    cooccur near-uniformly with spec.outlier_candidates background papers.
    Byte-identical output for a fixed spec and seed.
    """
    rng = random.Random(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entities = [_entity_name(i) for i in range(spec.n_entities)]
    source_ids = {name: f"src-{i:04d}" for i, name in enumerate(entities)}
    titles: dict[str, str] = {}
    papers: list[dict] = []
    for name in entities:
        topic = rng.choice(_TOPICS)
        adj = rng.choice(_ADJECTIVES)
        pid = source_ids[name]
        titles[pid] = f"{name}: {adj} {topic}"
        papers.append(
            {
                "paper_id": pid,
                "title": titles[pid],
                "abstract": f"We introduce {name}, a {adj} approach to {topic}.",
                "year": rng.randrange(1980, 2020),
            }
        )

    outlier_terms = [_outlier_name(i) for i in range(spec.outlier_terms)]
    background_ids: dict[str, list[str]] = {}
    for j, term in enumerate(outlier_terms):
        ids = [f"bg-{j:03d}-{c}" for c in range(spec.outlier_candidates)]
        background_ids[term] = ids
        for c, pid in enumerate(ids):
            topic = rng.choice(_TOPICS)
            titles[pid] = f"A practical survey of {topic} ({j}-{c})"
            papers.append(
                {
                    "paper_id": pid,
                    "title": titles[pid],
                    "abstract": f"Survey notes on {topic}.",
                    "year": rng.randrange(1980, 2020),
                }
            )

    records: list[dict] = []
    n_sentences = 0
    marker_serial = 0

    def next_marker() -> str:
        nonlocal marker_serial
        marker_serial += 1
        return str(marker_serial)

    for i, name in enumerate(entities):
        topic = rng.choice(_TOPICS)
        per_doc = [spec.min_cooccurrences // spec.docs_per_entity] * spec.docs_per_entity
        for extra in range(spec.min_cooccurrences % spec.docs_per_entity):
            per_doc[extra] += 1
        for d, quota in enumerate(per_doc):
            sentences: list[tuple[str, list[tuple[str, str]]]] = []
            for _ in range(quota):
                marker = next_marker()
                markers = [(f"[{marker}]", source_ids[name])]
                extra = ""
                if spec.distractor_rate > 0 and spec.n_entities > 1:
                    if rng.random() < spec.distractor_rate:
                        other = rng.choice([e for e in entities if e != name])
                        marker2 = next_marker()
                        extra = f" following earlier analyses [{marker2}]"
                        markers.append((f"[{marker2}]", source_ids[other]))
                template = rng.choice(_CITE_TEMPLATES)
                sentences.append(
                    (template.format(e=name, t=topic, m=marker, extra=extra), markers)
                )
            sentences.append((rng.choice(_FILLER_SENTENCES), []))
            n_sentences += len(sentences)
            records.append(
                _assemble_record(f"doc-{i:04d}-{d}", sentences, titles, year=2020)
            )

    for j, term in enumerate(outlier_terms):
        pair_counts = [spec.outlier_pair_count + rng.choice((0, 1)) for _ in background_ids[term]]
        pending: list[tuple[str, list[tuple[str, str]]]] = []
        chunk = 0
        for pid, count in zip(background_ids[term], pair_counts):
            for _ in range(count):
                marker = next_marker()
                topic = rng.choice(_TOPICS)
                pending.append(
                    (
                        f"The {term} configuration follows standard guidance for {topic} [{marker}].",
                        [(f"[{marker}]", pid)],
                    )
                )
        rng.shuffle(pending)
        while pending:
            batch, pending = pending[:8], pending[8:]
            n_sentences += len(batch)
            records.append(
                _assemble_record(f"odoc-{j:03d}-{chunk}", batch, titles, year=2020)
            )
            chunk += 1

    gold_rows = [
        {
            "entity": name,
            "gold_id": source_ids[name],
            "sentence": rng.choice(_QUERY_TEMPLATES).format(e=name, t=rng.choice(_TOPICS)),
        }
        for name in entities
    ]

    corpus_path = out_dir / "corpus.jsonl"
    gold_path = out_dir / "gold.jsonl"
    metadata_path = out_dir / "papers.jsonl"
    with corpus_path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    with gold_path.open("w", encoding="utf-8") as fh:
        for row in gold_rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    with metadata_path.open("w", encoding="utf-8") as fh:
        for paper in papers:
            fh.write(json.dumps(paper, ensure_ascii=False) + "\n")

    return GeneratedCorpus(
        corpus_path=corpus_path,
        gold_path=gold_path,
        metadata_path=metadata_path,
        n_documents=len(records),
        n_sentences=n_sentences,
        planted=dict(source_ids),
        outlier_terms=tuple(outlier_terms),
    )


def synthetic_count_samples(
    n_flat: int, n_peaked: int, seed: int, feature_length: int = 50
) -> list[LabeledSample]:
    """Labeled flat (outlier-shaped) and peaked (published-shaped) count
    distributions; linearly separable by construction."""
    rng = random.Random(seed)
    samples: list[LabeledSample] = []
    for i in range(n_flat):
        width = rng.randrange(12, 40)
        base = rng.randrange(20, 60)
        counts = [max(1, base + rng.choice((-1, 0, 1))) for _ in range(width)]
        samples.append(
            LabeledSample(
                entity=f"flat-{i}",
                feature=build_feature(counts, feature_length),
                label=OUTLIER,
            )
        )
    for i in range(n_peaked):
        width = rng.randrange(2, 30)
        peak = rng.randrange(100, 1000)
        counts = [peak] + [rng.randrange(1, max(2, peak // 20)) for _ in range(width - 1)]
        samples.append(
            LabeledSample(
                entity=f"peak-{i}",
                feature=build_feature(counts, feature_length),
                label=PUBLISHED,
            )
        )
    return samples
