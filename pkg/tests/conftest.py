from __future__ import annotations

import json
from pathlib import Path

import pytest

from crpse.cooccur import CandidateSet, DatasetMeta, MappingDataset

# The five-candidate fixture used by the worked recommendation example:
# counts strictly descending so the source paper of BERT ranks first.
BERT_CANDIDATES = [
    ("p-bert", 88, "BERT: Pre-training of Deep Bidirectional Transformers for Language Understanding"),
    ("p-elmo", 61, "Deep Contextualized Word Representations"),
    ("p-transformer", 47, "Attention Is All You Need"),
    ("p-gpt", 30, "Improving Language Understanding by Generative Pre-Training"),
    ("p-xlnet", 24, "XLNet: Generalized Autoregressive Pretraining for Language Understanding"),
]

BERT_SENTENCE = "BERT, formally published at NAACL-HLT 2019, leads to a significant change of NLP"


@pytest.fixture
def bert_dataset() -> MappingDataset:
    return MappingDataset(
        entries={"BERT": CandidateSet(candidates={pid: n for pid, n, _ in BERT_CANDIDATES})},
        meta=DatasetMeta(threshold=20),
    )


@pytest.fixture
def bert_metadata_file(tmp_path: Path) -> Path:
    path = tmp_path / "papers.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for pid, _, title in BERT_CANDIDATES:
            fh.write(json.dumps({"paper_id": pid, "title": title, "abstract": "", "year": 2018}) + "\n")
    return path


def write_jsonl(path: Path, rows: list[dict]) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


@pytest.fixture
def jsonl_writer():
    return write_jsonl
