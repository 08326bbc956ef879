from __future__ import annotations

import itertools
import random

import pytest

from crpse.corpus import CitationSpan
from crpse.segment import (
    BaselineExtractor,
    EntityExtractor,
    ExtractedSpan,
    Sentence,
    extract_entities,
    merge_aliases,
    normalize_surface,
    segment_sentences,
    token_lcs,
)
from tests.conftest import BERT_SENTENCE


class TestSegmentation:
    def test_two_plain_sentences(self):
        sentences = segment_sentences("First sentence. Second sentence.")
        assert [s.text for s in sentences] == ["First sentence.", "Second sentence."]
        assert [s.index for s in sentences] == [1, 2]

    def test_span_assigned_to_containing_sentence(self):
        body = "X [1] helps. Y follows."
        spans = [CitationSpan(start=2, end=5, target_paper_id="P1")]
        sentences = segment_sentences(body, spans)
        assert len(sentences) == 2
        assert sentences[0].citations == ("P1",)
        assert sentences[1].citations == ()

    def test_abbreviation_guard(self):
        sentences = segment_sentences("We use e.g. BLEU here.")
        assert len(sentences) == 1

    def test_more_abbreviations(self):
        body = "Results follow Smith et al. Table 2 shows Fig. 3 and Eq. 4 together. Done now."
        sentences = segment_sentences(body)
        assert [s.text for s in sentences] == [
            "Results follow Smith et al. Table 2 shows Fig. 3 and Eq. 4 together.",
            "Done now.",
        ]

    def test_no_boundary_inside_citation_span(self):
        body = "We cite [see A. Better ref]. Next point here."
        start = body.index("[")
        end = body.index("]") + 1
        spans = [CitationSpan(start=start, end=end, target_paper_id="P2")]
        sentences = segment_sentences(body, spans)
        assert [s.text for s in sentences] == ["We cite [see A. Better ref].", "Next point here."]
        assert sentences[0].citations == ("P2",)

    def test_empty_body(self):
        assert segment_sentences("") == []
        assert segment_sentences("   \n  ") == []

    def test_lowercase_continuation_is_not_a_boundary(self):
        sentences = segment_sentences("The score was 0.91 overall. next time we retry.")
        assert len(sentences) == 1

    def test_reconstruction_and_span_totals_randomized(self):
        rng = random.Random(99)
        starters = ["The system works well", "Results hold", "We verify this claim", "Numbers agree"]
        for _ in range(40):
            parts = []
            for _ in range(rng.randrange(1, 6)):
                parts.append(rng.choice(starters) + rng.choice([".", "?", "!"]))
            body = ""
            for i, part in enumerate(parts):
                body += part + (" " * rng.randrange(1, 4) if i < len(parts) - 1 else "")
            spans = []
            cursor = 0
            refs = itertools.count()
            while cursor + 6 < len(body):
                if rng.random() < 0.3 and not body[cursor].isspace():
                    end = min(cursor + rng.randrange(2, 5), len(body))
                    spans.append(CitationSpan(cursor, end, f"P{next(refs)}"))
                    cursor = end + 2
                else:
                    cursor += 3
            sentences = segment_sentences(body, spans)
            total_cites = sum(len(s.citations) for s in sentences)
            assert total_cites == len(spans)
            rebuilt = ""
            prev_end = 0
            for s in sentences:
                assert body[s.start : s.end] == s.text
                assert s.text
                rebuilt += body[prev_end : s.start] + s.text
                prev_end = s.end
            rebuilt += body[prev_end:]
            assert rebuilt == body


class TestNormalizeSurface:
    def test_trims_and_strips_trailing_punctuation(self):
        assert normalize_surface("  BERT ,") == "BERT"

    def test_internal_tokens_untouched(self):
        assert normalize_surface("k - means") == "k - means"

    def test_all_punctuation_collapses_to_empty(self):
        assert normalize_surface("!!!") == ""

    def test_collapses_whitespace_runs(self):
        assert normalize_surface("Penn \t  Treebank") == "Penn Treebank"


class FailingExtractor(EntityExtractor):
    def extract(self, text):
        raise RuntimeError("provider exploded")


class TestExtractEntities:
    def test_worked_example_sentence(self):
        sentence = segment_sentences(BERT_SENTENCE)[0]
        mentions = extract_entities(sentence, BaselineExtractor())
        assert [m.canonical for m in mentions] == ["BERT", "NAACL-HLT", "NLP"]

    def test_sentence_without_candidates(self):
        sentence = segment_sentences("we compare the two methods here")[0]
        assert extract_entities(sentence, BaselineExtractor()) == []

    def test_head_noun_suffix(self):
        sentence = segment_sentences("We train with the Adam optimizer.")[0]
        mentions = extract_entities(sentence, BaselineExtractor())
        assert [m.canonical for m in mentions] == ["Adam optimizer"]

    def test_consecutive_heads_form_one_mention(self):
        sentence = segment_sentences("Scores on the Penn Treebank improve.")[0]
        mentions = extract_entities(sentence, BaselineExtractor())
        assert [m.canonical for m in mentions] == ["Penn Treebank"]

    def test_sentence_initial_word_needs_document_evidence(self):
        texts = ["Transformers dominate the field.", "We rely on Transformers heavily."]
        extractor = BaselineExtractor.for_document(texts)
        first = segment_sentences(texts[0])[0]
        assert [m.canonical for m in extract_entities(first, extractor)] == ["Transformers"]
        # Without the document context the sentence-initial token is ambiguous.
        assert extract_entities(first, BaselineExtractor()) == []

    def test_dedup_on_canonical_within_sentence(self):
        sentence = segment_sentences("BLEU beats BLEU under this setup.")[0]
        mentions = extract_entities(sentence, BaselineExtractor())
        assert [m.canonical for m in mentions] == ["BLEU"]

    def test_offsets_point_into_sentence(self):
        sentence = segment_sentences(BERT_SENTENCE)[0]
        for mention in extract_entities(sentence, BaselineExtractor()):
            assert sentence.text[mention.start : mention.end] == mention.surface

    def test_extractor_failure_yields_empty(self, caplog):
        sentence = Sentence(index=1, text="BLEU works.")
        with caplog.at_level("WARNING"):
            assert extract_entities(sentence, FailingExtractor()) == []
        assert any("extraction failed" in r.message for r in caplog.records)

    def test_deterministic_for_fixed_inputs(self):
        sentence = segment_sentences(BERT_SENTENCE)[0]
        extractor = BaselineExtractor()
        first = extract_entities(sentence, extractor)
        second = extract_entities(sentence, extractor)
        assert first == second


def brute_force_lcs_length(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    best = 0
    for r in range(len(a), 0, -1):
        for combo in itertools.combinations(range(len(a)), r):
            sub = tuple(a[i] for i in combo)
            it = iter(b)
            if all(tok in it for tok in sub):
                return r
    return best


class TestTokenLcs:
    def test_adam_family(self):
        assert token_lcs(("Adam", "algorithm"), ("Adam", "method")) == ("Adam",)

    def test_disjoint(self):
        assert token_lcs(("Penn", "Treebank"), ("WordNet",)) == ()

    def test_longer_shared_run(self):
        a = ("deep", "context", "word", "vectors")
        b = ("context", "word", "representations", "vectors")
        assert token_lcs(a, b) == ("context", "word", "vectors")

    def test_against_brute_force_oracle(self):
        rng = random.Random(5)
        vocab = ["a", "b", "c", "d"]
        for _ in range(60):
            a = tuple(rng.choice(vocab) for _ in range(rng.randrange(0, 7)))
            b = tuple(rng.choice(vocab) for _ in range(rng.randrange(0, 7)))
            got = token_lcs(a, b)
            assert len(got) == brute_force_lcs_length(a, b)
            # Result must be a common subsequence of both inputs.
            for seq in (a, b):
                it = iter(seq)
                assert all(tok in it for tok in got)


class TestMergeAliases:
    def test_adam_group_merges_to_common_token(self):
        group = {
            "p-adam": [
                "Adam algorithm",
                "Adam method",
                "Adam optimiser",
                "Adam optimizer",
                "Adam update rule",
            ]
        }
        alias = merge_aliases(group)
        assert set(alias.values()) == {"Adam"}
        assert alias["Adam optimizer"] == "Adam"

    def test_singleton_identity(self):
        assert merge_aliases({"p": ["BLEU"]}) == {"BLEU": "BLEU"}

    def test_empty_lcs_keeps_own_keys(self):
        alias = merge_aliases({"p": ["Penn Treebank", "WordNet"]})
        assert alias == {"Penn Treebank": "Penn Treebank", "WordNet": "WordNet"}

    def test_idempotent(self):
        first = merge_aliases({"p": ["Adam algorithm", "Adam method"]})
        merged_forms = sorted(set(first.values()))
        again = merge_aliases({"p": merged_forms})
        assert again == {form: form for form in merged_forms}
