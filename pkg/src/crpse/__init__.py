"""crpse: citation recommendation for published scientific entities.

Mines entity-citation cooccurrences from annotated corpora into a
mapping dataset, ranks candidate source papers per entity, and flags
entities whose top recommendation is missing from a document's references.
"""

__version__ = "0.1.0"

from crpse.cooccur import (
    CandidateSet,
    CooccurrenceAccumulator,
    MappingDataset,
    apply_threshold,
    load_dataset,
    record_cooccurrences,
    save_dataset,
)
from crpse.corpus import (
    CitationSpan,
    PaperRecord,
    QueryDocument,
    RecordValidationError,
    ReferenceEntry,
    load_corpus,
    validate_record,
)
from crpse.evaluation import (
    GoldLabel,
    MetricsReport,
    SyntheticSpec,
    evaluate,
    generate_synthetic_corpus,
    mean_average_precision,
    mrr,
    recall_at_k,
)
from crpse.missing import (
    MissingCitationReport,
    ReferenceSet,
    age_stats,
    check_document,
    detect_missing_citation,
    match_reference,
)
from crpse.outliers import (
    ClassifierModel,
    FeatureVector,
    LabeledSample,
    build_feature,
    build_negative_samples,
    build_positive_samples,
    filter_dataset,
    train,
)
from crpse.ranking import (
    EmbeddingProvider,
    HashedEmbedder,
    PaperMetadata,
    RankingConfig,
    ScoredCandidate,
    baseline_embed,
    context_score,
    count_score,
    mixed_score,
    rank_candidates,
)
from crpse.recommend import Recommendation, recommend
from crpse.segment import (
    BaselineExtractor,
    EntityExtractor,
    EntityMention,
    Sentence,
    extract_entities,
    merge_aliases,
    normalize_surface,
    segment_sentences,
)

__all__ = [
    "__version__",
    "CandidateSet",
    "CitationSpan",
    "ClassifierModel",
    "CooccurrenceAccumulator",
    "EmbeddingProvider",
    "EntityExtractor",
    "EntityMention",
    "FeatureVector",
    "GoldLabel",
    "HashedEmbedder",
    "LabeledSample",
    "MappingDataset",
    "MetricsReport",
    "MissingCitationReport",
    "PaperMetadata",
    "PaperRecord",
    "QueryDocument",
    "RankingConfig",
    "Recommendation",
    "RecordValidationError",
    "ReferenceEntry",
    "ReferenceSet",
    "ScoredCandidate",
    "Sentence",
    "SyntheticSpec",
    "BaselineExtractor",
    "age_stats",
    "apply_threshold",
    "baseline_embed",
    "build_feature",
    "build_negative_samples",
    "build_positive_samples",
    "check_document",
    "context_score",
    "count_score",
    "detect_missing_citation",
    "evaluate",
    "extract_entities",
    "filter_dataset",
    "generate_synthetic_corpus",
    "load_corpus",
    "load_dataset",
    "match_reference",
    "mean_average_precision",
    "merge_aliases",
    "mixed_score",
    "mrr",
    "normalize_surface",
    "rank_candidates",
    "recall_at_k",
    "recommend",
    "record_cooccurrences",
    "save_dataset",
    "segment_sentences",
    "train",
    "validate_record",
]
