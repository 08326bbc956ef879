from __future__ import annotations

import math
import random
import zlib
from collections import Counter

import numpy as np
import pytest

from crpse.cooccur import CandidateSet, DatasetMeta, MappingDataset
from crpse.ranking import (
    COUNT,
    MIXED,
    EntityNotInDataset,
    HashedEmbedder,
    PaperInfo,
    PaperMetadata,
    RankingConfig,
    baseline_embed,
    context_score,
    cosine_similarity,
    count_score,
    mixed_score,
    rank_candidates,
)


def make_dataset(entries: dict[str, dict[str, int]]) -> MappingDataset:
    return MappingDataset(
        entries={e: CandidateSet(candidates=c) for e, c in entries.items()},
        meta=DatasetMeta(threshold=20),
    )


class TestCountScore:
    def test_simple_shares(self):
        scores = count_score(CandidateSet(candidates={"A": 60, "B": 30, "C": 10}))
        assert scores == {"A": 0.6, "B": 0.3, "C": 0.1}

    def test_single_candidate(self):
        assert count_score(CandidateSet(candidates={"A": 20})) == {"A": 1.0}

    def test_uniform(self):
        scores = count_score(CandidateSet(candidates={k: 5 for k in "ABCD"}))
        assert all(v == 0.25 for v in scores.values())

    def test_shares_sum_to_one_randomized(self):
        rng = random.Random(21)
        for _ in range(200):
            counts = {f"P{i}": rng.randrange(1, 5000) for i in range(rng.randrange(1, 40))}
            scores = count_score(CandidateSet(candidates=counts))
            assert abs(sum(scores.values()) - 1.0) < 1e-9

    def test_argmax_invariant_under_scaling(self):
        rng = random.Random(22)
        for _ in range(100):
            counts = {f"P{i}": rng.randrange(1, 800) for i in range(rng.randrange(2, 20))}
            base = count_score(CandidateSet(candidates=counts))
            for k in (2, 7, 13):
                scaled = count_score(CandidateSet(candidates={p: n * k for p, n in counts.items()}))
                assert max(base, key=base.get) == max(scaled, key=scaled.get)


def oracle_hashed_cosine(a: str, b: str, dim: int = 256) -> float:
    """Independent bag-of-buckets cosine: pure-python Counters and math.sqrt,
    no numpy and no baseline_embed."""

    def buckets(text: str) -> Counter:
        tokens = [t for t in "".join(c if c.isalnum() else " " for c in text.lower()).split() if t]
        return Counter(zlib.crc32(t.encode("utf-8")) % dim for t in tokens)

    ca, cb = buckets(a), buckets(b)
    dot = sum(ca[k] * cb[k] for k in ca)
    na = math.sqrt(sum(v * v for v in ca.values()))
    nb = math.sqrt(sum(v * v for v in cb.values()))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


class TestBaselineEmbed:
    def test_deterministic(self):
        a = baseline_embed("BLEU automatic evaluation")
        b = baseline_embed("BLEU automatic evaluation")
        assert np.array_equal(a, b)

    def test_empty_text_is_zero_vector(self):
        assert np.array_equal(baseline_embed(""), np.zeros(256))

    def test_token_order_irrelevant(self):
        a = baseline_embed("machine translation quality")
        b = baseline_embed("quality translation machine")
        assert np.array_equal(a, b)

    def test_unit_norm_when_nonempty(self):
        assert abs(float(np.linalg.norm(baseline_embed("some tokens here"))) - 1.0) < 1e-12


class ToyEmbedder(HashedEmbedder):
    """Two-dimensional embedder with hand-set vectors for orthogonality tests."""

    def __init__(self, table: dict[str, list[float]]):
        self._table = table

    @property
    def dimension(self) -> int:
        return 2

    def embed(self, text: str) -> np.ndarray:
        return np.asarray(self._table[text], dtype=np.float64)


class TestContextScore:
    def test_identical_texts(self):
        assert context_score("BLEU metric", "BLEU metric", "", HashedEmbedder()) == pytest.approx(1.0)

    def test_orthogonal_embeddings(self):
        emb = ToyEmbedder({"q": [1.0, 0.0], "t": [0.0, 1.0]})
        assert context_score("q", "t", "", emb) == 0.0

    def test_zero_norm_side_scores_zero(self):
        emb = ToyEmbedder({"q": [1.0, 0.0], "t": [0.0, 0.0]})
        assert context_score("q", "t", "", emb) == 0.0

    def test_hashed_cosine_matches_oracle(self):
        query = "bleu machine translation"
        title = "bleu automatic evaluation machine translation"
        expected = oracle_hashed_cosine(query, title)
        # Frozen from the oracle: 3 shared buckets, norms sqrt(3) and sqrt(5).
        assert expected == pytest.approx(0.7745966692414834, abs=1e-15)
        got = context_score(query, title, "", HashedEmbedder())
        assert got == pytest.approx(expected, abs=1e-12)

    def test_title_and_abstract_concatenated(self):
        emb = HashedEmbedder()
        joined = context_score("alpha beta", "alpha", "beta", emb)
        direct = cosine_similarity(emb.embed("alpha beta"), emb.embed("alpha beta"))
        assert joined == pytest.approx(direct)

    def test_bounds_on_random_texts(self):
        rng = random.Random(31)
        words = ["alpha", "beta", "gamma", "delta", "epsilon"]
        emb = HashedEmbedder()
        for _ in range(100):
            a = " ".join(rng.choice(words) for _ in range(rng.randrange(0, 6)))
            b = " ".join(rng.choice(words) for _ in range(rng.randrange(0, 6)))
            val = context_score(a, b, "", emb)
            assert -1.0 - 1e-12 <= val <= 1.0 + 1e-12


class TestMixedScore:
    def test_lambda_one_is_count(self):
        assert mixed_score(0.42, -0.9, 1.0) == 0.42

    def test_lambda_zero_is_context(self):
        assert mixed_score(0.42, -0.9, 0.0) == -0.9

    def test_arithmetic(self):
        assert mixed_score(0.6, 0.5, 0.7) == pytest.approx(0.57)

    def test_endpoints_exact_randomized(self):
        rng = random.Random(41)
        for _ in range(100):
            w_count = rng.random()
            w_context = rng.uniform(-1, 1)
            assert mixed_score(w_count, w_context, 1.0) == w_count
            assert mixed_score(w_count, w_context, 0.0) == w_context


class TestRankingConfig:
    def test_rejects_bad_lambda(self):
        with pytest.raises(ValueError):
            RankingConfig(criterion=COUNT, count_weight=1.5)

    def test_rejects_bad_criterion(self):
        with pytest.raises(ValueError):
            RankingConfig(criterion="alphabetical")

    def test_rejects_bad_k(self):
        with pytest.raises(ValueError):
            RankingConfig(k=0)


class ExplodingEmbedder(HashedEmbedder):
    def embed(self, text: str) -> np.ndarray:
        raise AssertionError("embedder must not be consulted under the count criterion")


class TestRankCandidates:
    def test_count_order(self):
        ds = make_dataset({"E": {"A": 50, "B": 10}})
        ranked = rank_candidates("E", "any", ds, RankingConfig(criterion=COUNT, k=5))
        assert [c.paper_id for c in ranked] == ["A", "B"]

    def test_truncates_to_available(self):
        ds = make_dataset({"E": {"A": 30, "B": 20, "C": 25}})
        ranked = rank_candidates("E", "any", ds, RankingConfig(criterion=COUNT, k=10))
        assert len(ranked) == 3

    def test_missing_entity_signals(self):
        ds = make_dataset({"E": {"A": 30}})
        with pytest.raises(EntityNotInDataset):
            rank_candidates("missing", "any", ds, RankingConfig())

    def test_embedder_not_consulted_under_count(self):
        ds = make_dataset({"E": {"A": 30, "B": 20}})
        rank_candidates("E", "any", ds, RankingConfig(criterion=COUNT), embedder=ExplodingEmbedder())

    def test_tie_breaks_by_count_then_id(self):
        # Same candidate share twice => fall through to count; same count => id.
        ds = make_dataset({"E": {"b": 10, "a": 10, "c": 20}})
        ranked = rank_candidates("E", "any", ds, RankingConfig(criterion=COUNT, k=3))
        assert [c.paper_id for c in ranked] == ["c", "a", "b"]

    def test_strict_total_order_randomized(self):
        rng = random.Random(51)
        for _ in range(50):
            counts = {f"P{i}": rng.randrange(1, 6) for i in range(rng.randrange(2, 12))}
            ds = make_dataset({"E": counts})
            ranked = rank_candidates("E", "s", ds, RankingConfig(criterion=COUNT, k=len(counts)))
            keys = [(-c.score, -c.count, c.paper_id) for c in ranked]
            assert keys == sorted(keys)
            assert len(set(keys)) == len(keys)

    def test_mixed_at_lambda_one_equals_count_ranking(self):
        rng = random.Random(61)
        emb = HashedEmbedder()
        for case in range(50):
            counts = {f"P{i}": rng.randrange(1, 50) for i in range(rng.randrange(2, 10))}
            ds = make_dataset({"E": counts})
            metadata = PaperMetadata(
                {p: PaperInfo(paper_id=p, title=f"title {p} {case}") for p in counts}
            )
            count_ranked = rank_candidates(
                "E", "query text", ds, RankingConfig(criterion=COUNT, k=len(counts))
            )
            mixed_ranked = rank_candidates(
                "E",
                "query text",
                ds,
                RankingConfig(criterion=MIXED, count_weight=1.0, k=len(counts)),
                embedder=emb,
                metadata=metadata,
            )
            assert [c.paper_id for c in count_ranked] == [c.paper_id for c in mixed_ranked]
            for a, b in zip(count_ranked, mixed_ranked):
                assert a.score == b.score

    def test_mixed_uses_context(self):
        ds = make_dataset({"E": {"relevant": 10, "popular": 12}})
        metadata = PaperMetadata(
            {
                "relevant": PaperInfo("relevant", title="graph matching on point clouds"),
                "popular": PaperInfo("popular", title="unrelated survey of farming"),
            }
        )
        cfg = RankingConfig(criterion=MIXED, count_weight=0.1, k=2)
        ranked = rank_candidates(
            "E", "graph matching point clouds", ds, cfg, embedder=HashedEmbedder(), metadata=metadata
        )
        assert ranked[0].paper_id == "relevant"
        assert ranked[0].context_score is not None

    def test_mixed_requires_embedder(self):
        ds = make_dataset({"E": {"A": 5}})
        with pytest.raises(ValueError, match="embedding provider"):
            rank_candidates("E", "s", ds, RankingConfig(criterion=MIXED))

    def test_vector_cache_is_filled_and_reused(self):
        ds = make_dataset({"E": {"A": 5, "B": 3}})
        cache: dict[str, np.ndarray] = {}
        cfg = RankingConfig(criterion=MIXED, count_weight=0.5, k=2)
        metadata = PaperMetadata(
            {"A": PaperInfo("A", title="shared query tokens"), "B": PaperInfo("B", title="other")}
        )
        first = rank_candidates(
            "E",
            "shared query tokens",
            ds,
            cfg,
            embedder=HashedEmbedder(),
            metadata=metadata,
            vector_cache=cache,
        )
        assert set(cache) == {"A", "B"}
        assert first[0].paper_id == "A"
        assert first[0].context_score == pytest.approx(1.0)
        # Poisoning the cached vector must change the result, proving reuse.
        cache["A"] = np.zeros(256)
        second = rank_candidates(
            "E",
            "shared query tokens",
            ds,
            cfg,
            embedder=HashedEmbedder(),
            metadata=metadata,
            vector_cache=cache,
        )
        poisoned = next(c for c in second if c.paper_id == "A")
        assert poisoned.context_score == 0.0
