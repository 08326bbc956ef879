"""Outlier-entity filtering for the mapping dataset.

Frequent non-entity terms (surnames, common words) have no single source
paper, so their sorted cooccurrence-count curves are flat; genuine published
entities show one dominant candidate. A decision-tree ensemble trained on
normalized sorted-count signatures separates the two shapes.
"""

from __future__ import annotations

import logging
import pickle
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.ensemble import RandomForestClassifier
from sklearn.metrics import f1_score

from crpse.cooccur import CandidateSet, MappingDataset

logger = logging.getLogger(__name__)

OUTLIER = "outlier"
PUBLISHED = "published"

DEFAULT_FEATURE_LENGTH = 50
DEFAULT_SURNAME_COUNT = 10_000
DEFAULT_WORD_COUNT = 14_000

MODEL_HEADER = b"CRPSE-RF v1"


class ModelFormatError(ValueError):
    """A model file does not parse as the documented format."""


class ModelVersionError(ModelFormatError):
    """A model file declares an unsupported format version."""


@dataclass(frozen=True)
class FeatureVector:
    """Fixed-length, max-normalized, non-increasing sorted-count signature."""

    values: tuple[float, ...]


def build_feature(counts: Sequence[int], length: int = DEFAULT_FEATURE_LENGTH) -> FeatureVector:
    """Sort counts descending, truncate or zero-pad to ``length``, divide by
    the maximum; scale-invariant by construction."""
    if not counts:
        raise ValueError("cannot featurize an entity without candidate counts")
    ordered = sorted(counts, reverse=True)[:length]
    peak = float(ordered[0])
    values = [c / peak for c in ordered]
    values.extend(0.0 for _ in range(length - len(values)))
    return FeatureVector(values=tuple(values))


@dataclass(frozen=True)
class LabeledSample:
    entity: str
    feature: FeatureVector
    label: str


def build_positive_samples(
    surnames: Sequence[str],
    words: Sequence[str],
    n_surnames: int = DEFAULT_SURNAME_COUNT,
    n_words: int = DEFAULT_WORD_COUNT,
) -> list[str]:
    """Outlier strings: top surnames plus top words, with words colliding
    with a selected surname screened out and replaced by the next ones.

    Inputs must already be in descending-frequency order. Returns fewer than
    n_surnames + n_words (with a warning) when inputs are too small.
    """
    if not surnames and not words:
        logger.warning("no surname or word inputs; returning no positive samples")
        return []
    top_surnames = list(dict.fromkeys(surnames))[:n_surnames]
    surname_set = set(top_surnames)
    picked_words: list[str] = []
    seen: set[str] = set()
    for word in words:
        if len(picked_words) >= n_words:
            break
        if word in surname_set or word in seen:
            continue
        seen.add(word)
        picked_words.append(word)
    total = len(top_surnames) + len(picked_words)
    if total < n_surnames + n_words:
        logger.warning(
            "positive samples short: %d built, %d requested", total, n_surnames + n_words
        )
    return top_surnames + picked_words


def build_negative_samples(
    titles: Iterable[str],
    surname_set: set[str],
    word_set: set[str],
) -> list[str]:
    """Published-entity strings mined from titles shaped like
    "<OneToken>: rest of title", keeping the token only when it is uncommon
    (in neither the surname list nor the word-frequency list)."""
    out: list[str] = []
    seen: set[str] = set()
    for title in titles:
        if ":" not in title:
            continue
        before = title.split(":", 1)[0].strip()
        tokens = before.split()
        if len(tokens) != 1:
            continue
        token = tokens[0]
        if not token or token in surname_set or token in word_set:
            continue
        if token in seen:
            continue
        seen.add(token)
        out.append(token)
    return out


def label_samples(
    ds: MappingDataset,
    positives: Iterable[str],
    negatives: Iterable[str],
    feature_length: int = DEFAULT_FEATURE_LENGTH,
) -> list[LabeledSample]:
    """Featurize sample strings against their count distributions in the raw
    dataset; strings absent from the dataset are skipped."""
    samples: list[LabeledSample] = []
    skipped = 0
    for label, names in ((OUTLIER, positives), (PUBLISHED, negatives)):
        for name in names:
            cs = ds.entries.get(name)
            if cs is None:
                skipped += 1
                continue
            samples.append(
                LabeledSample(
                    entity=name,
                    feature=build_feature(list(cs.candidates.values()), feature_length),
                    label=label,
                )
            )
    if skipped:
        logger.warning("%d sample strings absent from the dataset were skipped", skipped)
    return samples


def split_sizes(n: int) -> tuple[int, int, int]:
    """Exact 8:1:1 split sizes for n samples."""
    n_train = (n * 8) // 10
    n_val = (n * 9) // 10 - n_train
    return n_train, n_val, n - n_train - n_val


@dataclass
class ClassifierModel:
    """Trained ensemble plus the metadata needed to reproduce it.

    An input is classified outlier when the mean tree probability for the
    outlier class is >= 0.5, so an exact tie votes outlier (keeps the
    dataset clean).
    """

    feature_length: int
    seed: int
    tree_count: int
    max_depth: int | None
    forest: RandomForestClassifier

    def predict(self, features: Sequence[FeatureVector]) -> list[str]:
        if not features:
            return []
        for fv in features:
            if len(fv.values) != self.feature_length:
                raise ValueError(
                    f"feature length {len(fv.values)} does not match model ({self.feature_length})"
                )
        matrix = np.array([fv.values for fv in features], dtype=np.float64)
        outlier_col = list(self.forest.classes_).index(OUTLIER)
        proba = self.forest.predict_proba(matrix)[:, outlier_col]
        return [OUTLIER if p >= 0.5 else PUBLISHED for p in proba]

    def is_outlier(self, counts: Sequence[int]) -> bool:
        return self.predict([build_feature(counts, self.feature_length)])[0] == OUTLIER

    def save(self, path: str | Path) -> None:
        payload = {
            "feature_length": self.feature_length,
            "seed": self.seed,
            "tree_count": self.tree_count,
            "max_depth": self.max_depth,
            "forest": self.forest,
        }
        Path(path).write_bytes(MODEL_HEADER + b"\n" + pickle.dumps(payload))

    @classmethod
    def load(cls, path: str | Path) -> "ClassifierModel":
        blob = Path(path).read_bytes()
        header, _, rest = blob.partition(b"\n")
        if not header.startswith(b"CRPSE-RF"):
            raise ModelFormatError(f"{path}: not a classifier model file")
        if header != MODEL_HEADER:
            raise ModelVersionError(
                f"model format version mismatch: expected {MODEL_HEADER.decode()}, "
                f"found {header.decode(errors='replace')}"
            )
        try:
            payload = pickle.loads(rest)
        except Exception as exc:
            raise ModelFormatError(f"{path}: cannot deserialize model payload: {exc}") from exc
        return cls(
            feature_length=payload["feature_length"],
            seed=payload["seed"],
            tree_count=payload["tree_count"],
            max_depth=payload["max_depth"],
            forest=payload["forest"],
        )


# (tree count, max depth) candidates tried on the validation split; the
# default configuration is listed first and wins ties.
_HYPERPARAM_GRID: tuple[tuple[int, int | None], ...] = ((100, None), (50, None), (25, 8))


def train(samples: Sequence[LabeledSample], seed: int = 0) -> tuple[ClassifierModel, float]:
    """Shuffle with the seed, split 8:1:1, fit on train, pick tree count and
    depth on validation, and report the outlier-class F1 on test.

    Deterministic for fixed samples and seed.
    """
    if len(samples) < 10:
        raise ValueError("need at least 10 samples to split 8:1:1")
    labels = {s.label for s in samples}
    if labels != {OUTLIER, PUBLISHED}:
        raise ValueError("degenerate labels: need both outlier and published samples")
    lengths = {len(s.feature.values) for s in samples}
    if len(lengths) != 1:
        raise ValueError("inconsistent feature lengths")
    feature_length = lengths.pop()

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(samples))
    shuffled = [samples[i] for i in order]
    n_train, n_val, _ = split_sizes(len(shuffled))
    train_part = shuffled[:n_train]
    val_part = shuffled[n_train : n_train + n_val]
    test_part = shuffled[n_train + n_val :]

    def matrix(part: Sequence[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
        x = np.array([s.feature.values for s in part], dtype=np.float64)
        y = np.array([s.label for s in part])
        return x, y

    x_train, y_train = matrix(train_part)
    x_val, y_val = matrix(val_part)
    x_test, y_test = matrix(test_part)

    best: tuple[float, RandomForestClassifier, int, int | None] | None = None
    for tree_count, max_depth in _HYPERPARAM_GRID:
        forest = RandomForestClassifier(
            n_estimators=tree_count,
            max_depth=max_depth,
            bootstrap=True,
            random_state=seed,
            n_jobs=1,
        )
        forest.fit(x_train, y_train)
        val_f1 = f1_score(y_val, forest.predict(x_val), pos_label=OUTLIER, zero_division=0)
        if best is None or val_f1 > best[0]:
            best = (val_f1, forest, tree_count, max_depth)

    assert best is not None
    _, forest, tree_count, max_depth = best
    model = ClassifierModel(
        feature_length=feature_length,
        seed=seed,
        tree_count=tree_count,
        max_depth=max_depth,
        forest=forest,
    )
    test_f1 = float(
        f1_score(y_test, model.predict([s.feature for s in test_part]), pos_label=OUTLIER, zero_division=0)
    )
    return model, test_f1


def filter_dataset(ds: MappingDataset, model: ClassifierModel) -> MappingDataset:
    """Drop entities the model classifies as outliers; retained entries are
    untouched (same candidates, same counts)."""
    entities = list(ds.entries)
    if not entities:
        return MappingDataset(entries={}, meta=replace(ds.meta))
    features = [
        build_feature(list(ds.entries[e].candidates.values()), model.feature_length)
        for e in entities
    ]
    verdicts = model.predict(features)
    entries = {
        entity: CandidateSet(candidates=dict(ds.entries[entity].candidates))
        for entity, verdict in zip(entities, verdicts)
        if verdict == PUBLISHED
    }
    return MappingDataset(entries=entries, meta=replace(ds.meta))
