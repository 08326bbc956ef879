"""Model backends for the sidecar.

The built-in defaults are fully deterministic and need no downloaded
assets: a capitalization-rule extractor for scientific terms and a hashed
bag-of-tokens encoder. Transformer-based encoders can be plugged in via
config when their weights are available locally; whatever is loaded is
reported through the health endpoint.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

HASHED_ENCODER = "hashed-crc32-bow-256"
RULE_EXTRACTOR = "rule-capitalization-v1"

# Lowercase nouns that may close a term mention ("Adam optimizer").
_HEAD_NOUNS = frozenset({"optimizer", "algorithm", "method", "dataset", "model"})


class ModelLoadError(RuntimeError):
    """A configured model backend cannot be loaded; the service must refuse
    to start."""


@dataclass(frozen=True)
class Mention:
    surface: str
    start: int
    end: int


class HashedEncoder:
    """Hashed bag-of-tokens embedding: lowercase, split on non-alphanumerics,
    crc32-hash each token into ``dim`` buckets with weight +1, L2-normalize."""

    name = HASHED_ENCODER

    def __init__(self, dim: int = 256) -> None:
        self.dim = dim

    def embed(self, text: str) -> list[float]:
        vec = np.zeros(self.dim, dtype=np.float64)
        token: list[str] = []
        for ch in text.lower():
            if ch.isalnum():
                token.append(ch)
            elif token:
                vec[zlib.crc32("".join(token).encode("utf-8")) % self.dim] += 1.0
                token = []
        if token:
            vec[zlib.crc32("".join(token).encode("utf-8")) % self.dim] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        return [float(x) for x in vec]


class SentenceTransformerEncoder:
    """Optional transformer backend; requires locally available weights."""

    def __init__(self, model_name: str) -> None:
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ModelLoadError(f"sentence-transformers is not installed: {exc}") from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise ModelLoadError(f"cannot load encoder {model_name!r}: {exc}") from exc
        self.name = f"sentence-transformers:{model_name}"
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def embed(self, text: str) -> list[float]:
        vector = self._model.encode([text], normalize_embeddings=True)[0]
        return [float(x) for x in vector]


@dataclass(frozen=True)
class _Token:
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
        tokens.append(_Token(core=word[a:b], core_start=i + a, core_end=i + b))
        i = j
    return tokens


class RuleExtractor:
    """Deterministic scientific-term extractor.

    A token is a term head when it carries an uppercase letter anywhere
    other than the first character of the text (plain sentence case never
    qualifies on its own). Runs of head tokens form one mention, optionally
    closed by a known lowercase head noun.
    """

    name = RULE_EXTRACTOR

    def extract(self, text: str) -> list[Mention]:
        tokens = _tokenize(text)
        if not tokens:
            return []
        first_char = tokens[0].core_start

        def is_head(token: _Token) -> bool:
            return any(
                ch.isupper() and token.core_start + offset != first_char
                for offset, ch in enumerate(token.core)
            )

        heads = [is_head(t) for t in tokens]
        mentions: list[Mention] = []
        i = 0
        while i < len(tokens):
            if not heads[i]:
                i += 1
                continue
            j = i
            while j + 1 < len(tokens) and heads[j + 1]:
                j += 1
            last = j
            if j + 1 < len(tokens) and tokens[j + 1].core in _HEAD_NOUNS:
                last = j + 1
            start = tokens[i].core_start
            end = tokens[last].core_end
            mentions.append(Mention(surface=text[start:end], start=start, end=end))
            i = last + 1
        return mentions


def load_encoder(spec: str, dim: int):
    """Build the configured encoder: "hashed" or
    "sentence-transformers:<model name>"."""
    if spec == "hashed":
        return HashedEncoder(dim=dim)
    if spec.startswith("sentence-transformers:"):
        return SentenceTransformerEncoder(spec.split(":", 1)[1])
    raise ModelLoadError(f"unknown encoder spec: {spec!r}")


def load_extractor(spec: str):
    if spec == "rule":
        return RuleExtractor()
    raise ModelLoadError(f"unknown extractor spec: {spec!r}")
