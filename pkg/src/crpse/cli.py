"""Command-line entry point wiring the pipeline into reproducible batch runs.

Subcommands: build, train-filter, recommend, check, eval, stats. Outputs are
written atomically; every structured output embeds the fully resolved run
configuration. Exit codes: 0 success (including empty results), 2 missing
input file, 3 format-version mismatch, 1 other errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

from crpse import __version__
from crpse.cooccur import (
    CooccurrenceAccumulator,
    DatasetFormatError,
    DatasetVersionError,
    MappingDataset,
    apply_threshold,
    load_dataset,
    record_cooccurrences,
    save_dataset,
)
from crpse.corpus import PaperRecord, load_corpus
from crpse.evaluation import evaluate, load_gold
from crpse.missing import FixtureResolver, check_document
from crpse.missing import age_stats as compute_age_stats
from crpse.outliers import (
    ClassifierModel,
    LabeledSample,
    ModelVersionError,
    build_feature,
    build_negative_samples,
    build_positive_samples,
    filter_dataset,
    label_samples,
    train,
)
from crpse.provider import ProviderClient, ProviderError, RemoteEmbedder, RemoteExtractor
from crpse.ranking import (
    COUNT,
    DEFAULT_COUNT_WEIGHT,
    DEFAULT_TOP_K,
    MIXED,
    EmbeddingProvider,
    HashedEmbedder,
    PaperMetadata,
    RankingConfig,
)
from crpse.recommend import recommend as run_recommend
from crpse.segment import (
    BaselineExtractor,
    EntityExtractor,
    extract_entities,
    parse_query_document,
    segment_sentences,
)

PROVIDER_ENV_VAR = "CRPSE_PROVIDER"
DEFAULT_THRESHOLD = 20


class CliError(Exception):
    """Carries a category and exit code to the single-line error reporter."""

    def __init__(self, category: str, message: str, exit_code: int = 1) -> None:
        super().__init__(message)
        self.category = category
        self.exit_code = exit_code


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _require_file(path: str | None, what: str) -> Path:
    if not path:
        raise CliError("usage", f"missing required {what} path", exit_code=2)
    p = Path(path)
    if not p.is_file():
        raise CliError("missing file", str(p), exit_code=2)
    return p


def _resolved_config(args: argparse.Namespace, keys: Sequence[str]) -> dict:
    config = {"subcommand": args.subcommand}
    for key in keys:
        config[key.replace("count_weight", "lambda")] = getattr(args, key)
    return config


def _provider_url(args: argparse.Namespace) -> str:
    return args.provider or os.environ.get(PROVIDER_ENV_VAR, "")


def _make_embedder(args: argparse.Namespace) -> EmbeddingProvider:
    url = _provider_url(args)
    if url:
        return RemoteEmbedder(ProviderClient(url))
    return HashedEmbedder()


def _make_extractor(args: argparse.Namespace, sentence_texts: Iterable[str]) -> EntityExtractor:
    url = _provider_url(args)
    if url:
        return RemoteExtractor(ProviderClient(url))
    return BaselineExtractor.for_document(sentence_texts)


def _ranking_config(args: argparse.Namespace) -> RankingConfig:
    try:
        return RankingConfig(criterion=args.criterion, count_weight=args.count_weight, k=args.k)
    except ValueError as exc:
        raise CliError("config", str(exc)) from exc


def _emit(args: argparse.Namespace, payload: dict, human_lines: Sequence[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, ensure_ascii=False))
    else:
        for line in human_lines:
            print(line)


# --- build ------------------------------------------------------------------


def _record_pairs(args: argparse.Namespace, record: PaperRecord) -> CooccurrenceAccumulator:
    acc = CooccurrenceAccumulator()
    sentences = segment_sentences(record.body, record.citation_spans)
    extractor = _make_extractor(args, (s.text for s in sentences))
    for sentence in sentences:
        mentions = extract_entities(sentence, extractor)
        record_cooccurrences(sentence, mentions, acc)
    return acc


def cmd_build(args: argparse.Namespace) -> int:
    corpus_path = _require_file(args.corpus, "corpus")
    if args.filter_model:
        _require_file(args.filter_model, "filter model")
    reader = load_corpus(corpus_path)

    total = CooccurrenceAccumulator()
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            for partial in pool.map(lambda r: _record_pairs(args, r), reader):
                total.merge(partial)
    else:
        for record in reader:
            total.merge(_record_pairs(args, record))

    ds = apply_threshold(total, min_count=args.threshold, corpus_id=str(corpus_path))
    raw_entities = len(ds)
    if args.filter_model:
        model = ClassifierModel.load(args.filter_model)
        ds = filter_dataset(ds, model)

    out = Path(args.out)
    save_dataset(ds, out)
    config = _resolved_config(
        args, ["corpus", "out", "threshold", "filter_model", "workers", "seed", "provider"]
    )
    payload = {
        "config": config,
        "loaded": reader.loaded,
        "skipped": reader.skipped,
        "entities": len(ds),
        "entities_before_filter": raw_entities,
    }
    _emit(
        args,
        payload,
        [
            f"built dataset {out} with {len(ds)} entities "
            f"(threshold={args.threshold}, records loaded={reader.loaded}, skipped={reader.skipped})"
        ],
    )
    return 0


# --- train-filter -----------------------------------------------------------


def _read_token_list(path: Path) -> list[str]:
    tokens: list[str] = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            tokens.append(line.split("\t")[0])
    return tokens


def _read_samples_file(path: Path, feature_length: int) -> list[LabeledSample]:
    samples: list[LabeledSample] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                samples.append(
                    LabeledSample(
                        entity=raw["entity"],
                        feature=build_feature(raw["counts"], feature_length),
                        label=raw["label"],
                    )
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise CliError("samples", f"{path}:{line_no}: bad sample line ({exc})") from exc
    return samples


def cmd_train_filter(args: argparse.Namespace) -> int:
    if args.samples:
        samples = _read_samples_file(_require_file(args.samples, "samples"), args.feature_length)
    else:
        ds = load_dataset(_require_file(args.dataset, "dataset"))
        surnames = _read_token_list(_require_file(args.surnames, "surname list"))
        words = _read_token_list(_require_file(args.words, "word list"))
        titles = _read_token_list(_require_file(args.titles, "title list"))
        positives = build_positive_samples(surnames, words)
        negatives = build_negative_samples(titles, set(surnames), set(words))
        samples = label_samples(ds, positives, negatives, args.feature_length)

    try:
        model, test_f1 = train(samples, seed=args.seed)
    except ValueError as exc:
        raise CliError("training", str(exc)) from exc
    model.save(args.out)

    if args.apply_to:
        ds = load_dataset(_require_file(args.apply_to, "dataset"))
        filtered = filter_dataset(ds, model)
        save_dataset(filtered, Path(args.filtered_out or args.apply_to))

    config = _resolved_config(
        args,
        ["samples", "dataset", "surnames", "words", "titles", "out", "feature_length", "seed"],
    )
    payload = {
        "config": config,
        "samples": len(samples),
        "test_f1": test_f1,
        "tree_count": model.tree_count,
        "max_depth": model.max_depth,
    }
    _emit(
        args,
        payload,
        [f"trained filter on {len(samples)} samples: test F1 {test_f1:.3f} -> {args.out}"],
    )
    return 0


# --- recommend ---------------------------------------------------------------


def _load_query_documents(path: Path):
    docs = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CliError("document", f"{path}:{line_no}: bad JSON ({exc})") from exc
            doc_id = raw.get("paper_id") or f"{path.stem}-{line_no}"
            docs.append(parse_query_document(raw, doc_id=doc_id))
    return docs


def _load_metadata(args: argparse.Namespace) -> PaperMetadata | None:
    if not args.metadata:
        return None
    return PaperMetadata.load(_require_file(args.metadata, "metadata"))


def cmd_recommend(args: argparse.Namespace) -> int:
    doc_path = _require_file(args.doc, "document")
    ds = load_dataset(_require_file(args.dataset, "dataset"))
    cfg = _ranking_config(args)
    metadata = _load_metadata(args)
    embedder = _make_embedder(args) if cfg.criterion == MIXED else None
    docs = _load_query_documents(doc_path)

    def process(doc):
        extractor = _make_extractor(args, (s.text for s in doc.sentences))
        recs = run_recommend(doc, ds, cfg, extractor, embedder=embedder, metadata=metadata)
        return [{"doc_id": doc.doc_id, **rec.to_json()} for rec in recs]

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            per_doc = list(pool.map(process, docs))
    else:
        per_doc = [process(doc) for doc in docs]
    rows = [row for doc_rows in per_doc for row in doc_rows]

    config = _resolved_config(
        args,
        ["doc", "dataset", "metadata", "criterion", "count_weight", "k", "workers", "seed", "provider", "out"],
    )
    if args.out:
        _write_atomic(Path(args.out), "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows))

    human = [f"{len(rows)} recommendation(s) [criterion={cfg.criterion}, k={cfg.k}]"]
    for row in rows:
        human.append(f"{row['entity']} (doc {row['doc_id']}, sentence {row['sentence_index']}):")
        for rank, cand in enumerate(row["candidates"], start=1):
            human.append(f"  {rank}. {cand['paper_id']}  score={cand['score']:.4f} count={cand['count']}")
    _emit(args, {"config": config, "recommendations": rows}, human)
    return 0


# --- check -------------------------------------------------------------------


def cmd_check(args: argparse.Namespace) -> int:
    doc_path = _require_file(args.doc, "document")
    ds = load_dataset(_require_file(args.dataset, "dataset"))
    if args.criterion != MIXED:
        raise CliError("config", "check requires the mixed criterion")
    cfg = _ranking_config(args)
    metadata = _load_metadata(args)
    embedder = _make_embedder(args)
    resolver = (
        FixtureResolver.load(_require_file(args.resolver, "resolver fixture"))
        if args.resolver
        else None
    )
    docs = _load_query_documents(doc_path)

    def process(doc):
        extractor = _make_extractor(args, (s.text for s in doc.sentences))
        report = check_document(
            doc, ds, cfg, extractor, embedder, resolver=resolver, metadata=metadata
        )
        return report.to_json()

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            reports = list(pool.map(process, docs))
    else:
        reports = [process(doc) for doc in docs]

    config = _resolved_config(
        args,
        ["doc", "dataset", "metadata", "resolver", "criterion", "count_weight", "k", "workers", "seed", "provider", "out"],
    )
    if args.out:
        _write_atomic(
            Path(args.out), "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in reports)
        )

    human = []
    for report in reports:
        human.append(
            f"doc {report['doc_id']}: checked {report['checked']} entities, "
            f"flagged {report['flagged']}, potential {len(report['potential'])}"
        )
        for finding in report["findings"]:
            mark = "confirmed" if finding["confirmed"] else "unconfirmed"
            human.append(
                f"  missing: {finding['entity']} -> {finding['paper_id']} "
                f"({finding['title'] or 'no title'}) [{mark}]"
            )
    _emit(args, {"config": config, "reports": reports}, human)
    return 0


# --- eval ---------------------------------------------------------------------


def cmd_eval(args: argparse.Namespace) -> int:
    gold = load_gold(_require_file(args.gold, "gold"))
    ds = load_dataset(_require_file(args.dataset, "dataset"))
    cfg = _ranking_config(args)
    metadata = _load_metadata(args)
    embedder = _make_embedder(args) if cfg.criterion == MIXED else None
    try:
        report = evaluate(ds, cfg, gold, embedder=embedder, metadata=metadata)
    except ValueError as exc:
        raise CliError("eval", str(exc)) from exc

    config = _resolved_config(
        args, ["gold", "dataset", "metadata", "criterion", "count_weight", "k", "seed", "provider", "out"]
    )
    payload = {"config": config, "metrics": report.to_json()}
    if args.out:
        _write_atomic(Path(args.out), json.dumps(payload, ensure_ascii=False) + "\n")
    metrics = report.to_json()
    human = [
        f"evaluated {metrics['n']} queries [criterion={cfg.criterion}]",
        f"  recall@1  {metrics['recall@1']:.3f}",
        f"  recall@5  {metrics['recall@5']:.3f}",
        f"  recall@10 {metrics['recall@10']:.3f}",
        f"  MRR       {metrics['mrr']:.3f}",
        f"  MAP       {metrics['map']:.3f}",
    ]
    _emit(args, payload, human)
    return 0


# --- stats ---------------------------------------------------------------------


def cmd_stats(args: argparse.Namespace) -> int:
    report_path = _require_file(args.report, "report")
    pairs: list[tuple[str, int]] = []
    with report_path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            report = json.loads(line)
            for finding in report.get("findings", []):
                year = finding.get("year")
                if isinstance(year, int):
                    pairs.append((finding["entity"], year))
    try:
        stats = compute_age_stats(pairs, args.baseline_year)
    except ValueError as exc:
        raise CliError("stats", str(exc)) from exc

    config = _resolved_config(args, ["report", "baseline_year", "out"])
    payload = {"config": config, "ages": stats, "findings": len(pairs)}
    if args.out:
        _write_atomic(Path(args.out), json.dumps(payload, ensure_ascii=False) + "\n")
    human = [
        f"ages over {len(pairs)} findings (baseline {args.baseline_year}): "
        f"max={stats['max']} min={stats['min']} mode={stats['mode']} "
        f"mean={stats['mean']} median={stats['median']}"
    ]
    _emit(args, payload, human)
    return 0


# --- parser --------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="seed echoed into outputs; all runs with a fixed seed are byte-deterministic")
    parser.add_argument("--json", action="store_true", help="emit structured JSON on stdout instead of human-readable text")
    parser.add_argument("--provider", default="", help=f"NLP sidecar base URL (or set {PROVIDER_ENV_VAR})")


def _add_ranking_flags(parser: argparse.ArgumentParser, default_criterion: str) -> None:
    parser.add_argument("--criterion", choices=[COUNT, MIXED], default=default_criterion, help="sorting criterion")
    parser.add_argument("--lambda", dest="count_weight", type=float, default=DEFAULT_COUNT_WEIGHT, help="weight on the count score under the mixed criterion")
    parser.add_argument("--k", type=int, default=DEFAULT_TOP_K, help="number of candidates to recommend")
    parser.add_argument("--metadata", default="", help="paper metadata JSONL (title/abstract per paper id)")


def build_parser(config_defaults: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crpse",
        description="Citation recommendation for published scientific entities and missing-citation detection.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"crpse {__version__}")
    parser.add_argument("--config", default="", help="JSON config file with flag defaults; explicit flags win")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    subparsers: list[argparse.ArgumentParser] = []

    p = sub.add_parser("build", help="build a mapping dataset from a corpus", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--corpus", required=True, help="line-delimited corpus file")
    p.add_argument("--out", required=True, help="output dataset path")
    p.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD, help="minimum best-candidate cooccurrence count for an entity to stay")
    p.add_argument("--filter-model", dest="filter_model", default="", help="apply a trained outlier filter after thresholding")
    p.add_argument("--workers", type=int, default=1, help="parallel document workers; output order is input order")
    _add_common(p)
    p.set_defaults(func=cmd_build)
    subparsers.append(p)

    p = sub.add_parser("train-filter", help="train the outlier filter", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--samples", default="", help="precomputed samples JSONL {entity, label, counts}")
    p.add_argument("--dataset", default="", help="raw dataset to featurize list-based samples against")
    p.add_argument("--surnames", default="", help="surname frequency list (token<TAB>freq, descending)")
    p.add_argument("--words", default="", help="word frequency list (token<TAB>freq, descending)")
    p.add_argument("--titles", default="", help="paper titles, one per line")
    p.add_argument("--out", required=True, help="output model path")
    p.add_argument("--feature-length", dest="feature_length", type=int, default=50, help="sorted-count signature length")
    p.add_argument("--apply-to", dest="apply_to", default="", help="optionally filter this dataset with the trained model")
    p.add_argument("--filtered-out", dest="filtered_out", default="", help="output path for the filtered dataset (defaults to --apply-to)")
    _add_common(p)
    p.set_defaults(func=cmd_train_filter)
    subparsers.append(p)

    p = sub.add_parser("recommend", help="recommend source papers for a document's entities", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--doc", required=True, help="query document(s), JSONL in the corpus record schema")
    p.add_argument("--dataset", required=True, help="mapping dataset file")
    _add_ranking_flags(p, default_criterion=COUNT)
    p.add_argument("--out", default="", help="write recommendations as JSONL")
    p.add_argument("--workers", type=int, default=1, help="parallel document workers; output order is input order")
    _add_common(p)
    p.set_defaults(func=cmd_recommend)
    subparsers.append(p)

    p = sub.add_parser("check", help="detect missing citations against reference lists", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--doc", required=True, help="query document(s), JSONL in the corpus record schema")
    p.add_argument("--dataset", required=True, help="mapping dataset file")
    _add_ranking_flags(p, default_criterion=MIXED)
    p.add_argument("--resolver", default="", help="reference resolver fixture JSONL {paper_id, references}")
    p.add_argument("--out", default="", help="write one report object per document as JSONL")
    p.add_argument("--workers", type=int, default=1, help="parallel document workers; output order is input order")
    _add_common(p)
    p.set_defaults(func=cmd_check)
    subparsers.append(p)

    p = sub.add_parser("eval", help="score rankings against gold labels", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--gold", required=True, help="gold labels JSONL {entity, gold_id, sentence}")
    p.add_argument("--dataset", required=True, help="mapping dataset file")
    _add_ranking_flags(p, default_criterion=COUNT)
    p.add_argument("--out", default="", help="write the metrics report as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_eval)
    subparsers.append(p)

    p = sub.add_parser("stats", help="age statistics over a check report", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--report", required=True, help="check report JSONL")
    p.add_argument("--baseline-year", dest="baseline_year", type=int, required=True, help="baseline year ages are measured from (never inferred from the clock)")
    p.add_argument("--out", default="", help="write the statistics as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_stats)
    subparsers.append(p)

    if config_defaults:
        resolved = {k.replace("-", "_"): v for k, v in config_defaults.items()}
        parser.set_defaults(**resolved)
        for subparser in subparsers:
            subparser.set_defaults(**resolved)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)

    config_defaults: dict | None = None
    if "--config" in argv:
        at = argv.index("--config")
        if at + 1 < len(argv):
            config_path = Path(argv[at + 1])
            if not config_path.is_file():
                print(f"error: missing file: {config_path}", file=sys.stderr)
                return 2
            config_defaults = json.loads(config_path.read_text(encoding="utf-8"))

    parser = build_parser(config_defaults)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # Downstream consumer (e.g. `head`) closed the pipe; not an error.
        try:
            sys.stdout.close()
        except Exception:
            pass
        return 0
    except CliError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return 2
    except (DatasetVersionError, ModelVersionError) as exc:
        print(f"error: version: {exc}", file=sys.stderr)
        return 3
    except (DatasetFormatError, ProviderError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
