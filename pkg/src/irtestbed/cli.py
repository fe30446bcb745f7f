"""Command-line entry point: ``irtestbed <command> [flags]``.

Every command writes its artifact plus ``<artifact>.manifest.json`` recording
the resolved configuration and input digests. Failures exit non-zero with a
single ``irtestbed: error: <kind>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__

log = logging.getLogger("irtestbed")

DEFAULT_SEED = 13


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int = 1):
        super().__init__(message)
        self.kind = kind
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message, 2)


# -- helpers ----------------------------------------------------------------------

def _digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _existing(path: str | None, what: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise CliError("missing-file", f"{what} file not found: {path}")
    return p


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def write_manifest(artifact: str | Path, command: str, args: argparse.Namespace,
                   inputs: dict[str, Path | None]) -> Path:
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
              if k not in ("func",)}
    manifest = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "inputs": {k: {"path": str(p), "sha256": _digest(p)} for k, p in sorted(inputs.items()) if p is not None},
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    path = Path(str(artifact) + ".manifest.json")
    write_json(manifest, path)
    return path


def _bm25(args):
    from .ranking import Bm25Params
    return Bm25Params(args.bm25_k1, args.bm25_b)


def _rm3(args):
    from .ranking import Rm3Params
    return Rm3Params(args.rm3_fbdocs, args.rm3_fbterms, args.rm3_origweight)


def _drmm(args):
    from .drmm import DrmmConfig
    return DrmmConfig(bins=args.bins, hidden=tuple(args.hidden), max_query_len=args.max_query_len,
                      doc_truncate=args.doc_truncate, epochs_max=args.epochs, patience=args.patience,
                      batch_size=args.batch_size, learning_rate=args.lr[0],
                      pairs_per_topic=args.pairs_per_topic, seed=args.model_seed)


# -- commands ------------------------------------------------------------------------

def cmd_index(args):
    from .analysis import AnalyzerConfig, load_stopwords
    from .index import build_index, read_documents

    docs = _existing(args.docs, "documents")
    stop_path = None if args.stopwords in (None, "none") else _existing(args.stopwords, "stopword")
    if args.stopwords == "none":
        stopwords = frozenset()
    else:
        stopwords = load_stopwords(stop_path)
    config = AnalyzerConfig(lowercase=not args.no_lowercase, stopwords=stopwords, stemmer=args.stemmer)
    index = build_index(read_documents(docs), config)
    index.save(args.output)
    write_manifest(args.output, "index", args, {"docs": docs, "stopwords": stop_path})
    log.info("indexed %d documents, %d terms", index.doc_count, len(index.vocabulary))


def cmd_search(args):
    from .index import InvertedIndex
    from .pipeline import retrieve
    from .trec import read_topics, write_run

    index = InvertedIndex.load(_existing(args.index, "index"))
    topics = read_topics(_existing(args.topics, "topics"))
    run = retrieve(index, topics, args.k, _bm25(args), _rm3(args) if args.rm3 else None, tag=args.tag)
    write_run(run, args.output)
    write_manifest(args.output, "search", args, {"index": Path(args.index), "topics": Path(args.topics)})


def _reranker_inputs(args, config):
    from .analysis import RERANK_ANALYZER
    from .drmm import EmbeddingTable, FeatureExtractor
    from .index import Document, build_index, load_texts

    texts = load_texts(_existing(args.docs, "documents"))
    emb = EmbeddingTable.load(_existing(args.embeddings, "embeddings"))
    stats = build_index((Document(d, t) for d, t in texts.items()), RERANK_ANALYZER)
    return FeatureExtractor(emb, stats, config, texts)


def cmd_train(args):
    from .crossval import make_folds
    from .evaluation import num_relevant
    from .pipeline import TopicFeatures, train_split
    from .trec import read_qrels, read_run, read_topics

    config = _drmm(args)
    run = read_run(_existing(args.run, "run"))
    qrels = read_qrels(_existing(args.qrels, "qrels"))
    topics = read_topics(_existing(args.topics, "topics"))
    judged = [t for t in topics if num_relevant(qrels, t) > 0]
    folds = make_folds(judged, args.mode, args.seed)
    if not 0 <= args.split < len(folds.splits):
        raise CliError("invalid-argument", f"--split must be in [0, {len(folds.splits) - 1}]")
    split = folds.splits[args.split]
    fx = _reranker_inputs(args, config)
    wanted = set(split.train) | set(split.validation)
    tf = TopicFeatures(fx, topics, {t: run[t].head(args.k) for t in run if t in wanted})
    model, outcome = train_split(tf, {t: run[t].head(args.k) for t in run}, qrels, split, config, args.lr)
    model.save(args.output)
    write_json({"split": args.split, "folds": folds.as_dict(), "learning_rate": outcome.learning_rate,
                "best_epoch": outcome.best_epoch, "validation_ap": outcome.validation_ap,
                "epoch_validation_ap": outcome.epoch_validation_ap}, str(args.output) + ".training.json")
    write_manifest(args.output, "train", args, {
        "run": Path(args.run), "qrels": Path(args.qrels), "topics": Path(args.topics),
        "docs": Path(args.docs), "embeddings": Path(args.embeddings)})


def cmd_rerank(args):
    from .analysis import analyze
    from .drmm import DrmmModel, score_candidates
    from .rerank import interpolate, load_external_scores
    from .trec import read_run, read_topics, write_run

    run = read_run(_existing(args.run, "run"))
    inputs = {"run": Path(args.run)}
    if args.scores:
        scores = load_external_scores(_existing(args.scores, "score"))
        inputs["scores"] = Path(args.scores)
    else:
        if not all([args.model, args.docs, args.topics, args.embeddings]):
            raise CliError("invalid-argument", "DRMM reranking needs --model, --docs, --topics and --embeddings "
                                               "(or pass --scores)")
        model = DrmmModel.load(_existing(args.model, "model"))
        fx = _reranker_inputs(args, model.config)
        topics = read_topics(_existing(args.topics, "topics"))
        scores = {}
        for qid, rl in run.items():
            if qid not in topics:
                raise CliError("invalid-input", f"topic {qid} of the run is missing from the topics file")
            scores[qid] = score_candidates(model, fx, analyze(topics[qid], fx.analyzer), rl.docids)
        inputs.update(model=Path(args.model), docs=Path(args.docs), topics=Path(args.topics),
                      embeddings=Path(args.embeddings))
    out = {}
    for qid, rl in run.items():
        out[qid] = interpolate(rl, scores.get(qid, {}), args.alpha, tag=args.tag)
    write_run(out, args.output)
    write_manifest(args.output, "rerank", args, inputs)


def _eval_report(args):
    from .evaluation import bonferroni, evaluate_run, paired_ttest
    from .trec import read_qrels, read_run, sorted_topics

    qrels = read_qrels(_existing(args.qrels, "qrels"))
    run_a = read_run(_existing(args.run, "run"))
    per_a, excluded = evaluate_run(run_a, qrels, args.linear_gain)
    report = {"excluded_topics": excluded, "topics": len(per_a),
              "a": {"run": str(args.run), "per_topic": per_a,
                    "mean": {m: sum(v[m] for v in per_a.values()) / len(per_a) for m in ("ap", "ndcg@20")}
                    if per_a else {}}}
    per_b = None
    if args.compare:
        run_b = read_run(_existing(args.compare, "comparison run"))
        per_b, _ = evaluate_run(run_b, qrels, args.linear_gain)
        report["b"] = {"run": str(args.compare), "per_topic": per_b,
                       "mean": {m: sum(v[m] for v in per_b.values()) / len(per_b) for m in ("ap", "ndcg@20")}
                       if per_b else {}}
        topics = sorted_topics(per_a)
        tests = {}
        for metric in ("ap", "ndcg@20"):
            r = paired_ttest([per_a[t][metric] for t in topics], [per_b[t][metric] for t in topics], m=args.hypotheses)
            d = r.as_dict()
            del d["a"], d["b"]
            tests[metric] = d
        report["tests"] = tests
        report["bonferroni_m"] = args.hypotheses
        report["p_bonferroni"] = {m: bonferroni([tests[m]["p"]], args.hypotheses)[0] for m in tests}
    return report, per_a, per_b


def cmd_eval(args):
    from .trec import sorted_topics

    report, per_a, per_b = _eval_report(args)
    write_json(report, args.output)
    tsv = Path(args.output).with_suffix(".tsv")
    header = ["topic", "ap_a", "ndcg20_a"] + (["ap_b", "ndcg20_b"] if per_b is not None else [])
    lines = ["\t".join(header)]
    for t in sorted_topics(per_a):
        row = [t, f"{per_a[t]['ap']:.6f}", f"{per_a[t]['ndcg@20']:.6f}"]
        if per_b is not None:
            row += [f"{per_b[t]['ap']:.6f}", f"{per_b[t]['ndcg@20']:.6f}"]
        lines.append("\t".join(row))
    tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.plot and per_b is not None:
        from .plotting import plot_topic_deltas
        plot_topic_deltas({t: v["ap"] for t, v in per_a.items()}, {t: v["ap"] for t, v in per_b.items()},
                          args.plot, "AP", "run", "compare")
    inputs = {"qrels": Path(args.qrels), "run": Path(args.run)}
    if args.compare:
        inputs["compare"] = Path(args.compare)
    write_manifest(args.output, "eval", args, inputs)
    if per_b is not None:
        t = report["tests"]["ap"]
        print(f"AP {report['a']['mean']['ap']:.4f} -> {report['b']['mean']['ap']:.4f}  "
              f"t={t['t']:.4f} p={t['p']:.4g} p_bonf={t['p_bonferroni']:.4g}")
    elif per_a:
        print(f"AP {report['a']['mean']['ap']:.4f}  NDCG@20 {report['a']['mean']['ndcg@20']:.4f}")


def cmd_cv(args):
    from .drmm import EmbeddingTable
    from .index import InvertedIndex, build_index, read_documents
    from .pipeline import run_experiment
    from .trec import read_qrels, read_topics, sorted_topics, write_run

    docs = list(read_documents(_existing(args.docs, "documents")))
    index = InvertedIndex.load(_existing(args.index, "index")) if args.index else build_index(docs)
    topics = read_topics(_existing(args.topics, "topics"))
    qrels = read_qrels(_existing(args.qrels, "qrels"))
    emb = EmbeddingTable.load(_existing(args.embeddings, "embeddings"))
    report = run_experiment(index, docs, topics, qrels, emb, args.mode, args.seed, _bm25(args), _rm3(args),
                            _drmm(args), args.alpha_grid, args.lr, args.k, args.hypotheses)
    out = report.as_dict()
    write_json(out, args.output)
    lines = ["topic\tap_baseline\tap_reranked\tap_nn_only\tndcg20_baseline\tndcg20_reranked\tndcg20_nn_only"]
    for t in sorted_topics(report.baseline):
        b, r, n = report.baseline[t], report.reranked[t], report.nn_only[t]
        lines.append(f"{t}\t{b['ap']:.6f}\t{r['ap']:.6f}\t{n['ap']:.6f}\t"
                     f"{b['ndcg@20']:.6f}\t{r['ndcg@20']:.6f}\t{n['ndcg@20']:.6f}")
    Path(args.output).with_suffix(".tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.plot:
        from .plotting import plot_topic_deltas
        plot_topic_deltas({t: v["ap"] for t, v in report.baseline.items()},
                          {t: v["ap"] for t, v in report.reranked.items()}, args.plot, "AP", "BM25+RM3", "+DRMM")
    inputs = {"docs": Path(args.docs), "topics": Path(args.topics), "qrels": Path(args.qrels),
              "embeddings": Path(args.embeddings), "index": Path(args.index) if args.index else None}
    write_manifest(args.output, "cv", args, inputs)
    s, t = out["summary"], report.tests["ap"]
    print(f"AP {s['baseline']['ap']:.4f} -> {s['reranked']['ap']:.4f} (nn only {s['nn_only']['ap']:.4f})  "
          f"p={t['p']:.4g}  alphas={[o.alpha for o in report.splits]}")


def cmd_meta(args):
    from dataclasses import asdict
    from .meta import ReferenceLines, format_stats_table, group_trends, load_records, summary_stats
    from .plotting import render_plot

    records = load_records(_existing(args.records, "records"), (args.year_min, args.year_max), strict=not args.lenient)
    refs = ReferenceLines(args.trec_best, args.trec_median, args.anserini_rm3)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stats = summary_stats(records, refs)
    write_json(stats, out / "stats.json")
    (out / "stats.txt").write_text(format_stats_table(stats), encoding="utf-8")
    trends = group_trends(records, "best_ap" if args.trend_on == "best" else "baseline_ap")
    write_json({"y": args.trend_on, "trends": [asdict(t) for t in trends]}, out / "trends.json")
    render_plot(records, refs, trends, out / "plot.svg")
    write_manifest(out / "stats.json", "meta", args, {"records": Path(args.records)})
    sys.stdout.write(format_stats_table(stats))


def cmd_synth(args):
    from .synthetic import SyntheticConfig, config_dict, generate

    config = SyntheticConfig(n_topics=args.topics, n_docs=args.docs, seed=args.seed)
    paths = generate(config).write(args.out_dir)
    write_json(config_dict(config), Path(args.out_dir) / "synthetic_config.json")
    write_manifest(paths["docs"], "synth", args, {})


# -- parser ----------------------------------------------------------------------------

def _add_bm25(p):
    p.add_argument("--k", type=int, default=1000, help="retrieval depth")
    p.add_argument("--bm25-k1", type=float, default=0.9)
    p.add_argument("--bm25-b", type=float, default=0.4)
    p.add_argument("--rm3-fbdocs", type=int, default=10)
    p.add_argument("--rm3-fbterms", type=int, default=10)
    p.add_argument("--rm3-origweight", type=float, default=0.5)


def _add_drmm(p):
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--hidden", type=int, nargs="+", default=[5])
    p.add_argument("--max-query-len", type=int, default=10)
    p.add_argument("--doc-truncate", type=int, default=500)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--lr", type=float, nargs="+", default=[1e-3],
                   help="learning rate(s); several values are tuned on validation AP")
    p.add_argument("--pairs-per-topic", type=int, default=1000)
    p.add_argument("--model-seed", type=int, default=DEFAULT_SEED)


def _add_folds(p):
    p.add_argument("--mode", choices=["two_fold", "five_fold"], default="five_fold")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="irtestbed", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"irtestbed {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="build an inverted index")
    p.add_argument("--docs", required=True, help="JSON-lines or TREC SGML documents")
    p.add_argument("--output", required=True)
    p.add_argument("--stemmer", choices=["porter", "none"], default="porter")
    p.add_argument("--stopwords", help="stopword file, or 'none' to disable (default: bundled list)")
    p.add_argument("--no-lowercase", action="store_true")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="BM25 or BM25+RM3 retrieval")
    p.add_argument("--index", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--rm3", action="store_true", help="expand queries with RM3")
    p.add_argument("--tag", default=None)
    _add_bm25(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("train", help="train DRMM on one cross-validation split")
    for flag in ("--run", "--qrels", "--topics", "--docs", "--embeddings", "--output"):
        p.add_argument(flag, required=True)
    p.add_argument("--split", type=int, default=0)
    p.add_argument("--k", type=int, default=1000, help="baseline depth used for training candidates")
    _add_folds(p)
    _add_drmm(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rerank", help="interpolate a run with DRMM or external scores")
    p.add_argument("--run", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--scores", help="external 'qid docid score' file")
    p.add_argument("--model")
    p.add_argument("--docs")
    p.add_argument("--topics")
    p.add_argument("--embeddings")
    p.add_argument("--tag", default=None)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("eval", help="AP / NDCG@20 and a paired t-test between two runs")
    p.add_argument("--qrels", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--compare", help="second run (system B)")
    p.add_argument("--output", required=True, help="JSON report; a .tsv is written beside it")
    p.add_argument("--hypotheses", type=int, default=1, help="Bonferroni hypothesis count")
    p.add_argument("--linear-gain", action="store_true", help="NDCG gain = grade instead of 2^grade - 1")
    p.add_argument("--plot", help="SVG of per-topic AP differences")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="cross-validated BM25+RM3 -> DRMM reranking experiment")
    for flag in ("--docs", "--topics", "--qrels", "--embeddings", "--output"):
        p.add_argument(flag, required=True)
    p.add_argument("--index", help="prebuilt index (default: build from --docs)")
    p.add_argument("--alpha-grid", type=float, nargs="+", default=None)
    p.add_argument("--hypotheses", type=int, default=1)
    p.add_argument("--plot", help="SVG of per-topic AP differences")
    _add_folds(p)
    _add_bm25(p)
    _add_drmm(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("meta", help="survey statistics, trendlines and plot")
    p.add_argument("--records", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trec-best", type=float, default=0.333)
    p.add_argument("--trec-median", type=float, default=0.258)
    p.add_argument("--anserini-rm3", type=float, default=0.2903)
    p.add_argument("--trend-on", choices=["best", "baseline"], default="best")
    p.add_argument("--year-min", type=int, default=1950)
    p.add_argument("--year-max", type=int, default=2100)
    p.add_argument("--lenient", action="store_true", help="skip invalid rows instead of failing")
    p.set_defaults(func=cmd_meta)

    p = sub.add_parser("synth", help="write a synthetic planted-relevance collection")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--topics", type=int, default=50)
    p.add_argument("--docs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except CliError as exc:
        print(f"irtestbed: error: {exc.kind}: {exc}".replace("\n", " "), file=sys.stderr)
        return exc.code
    except (ValueError, KeyError, OSError, ArithmeticError, RuntimeError) as exc:
        kind = type(exc).__name__
        print(f"irtestbed: error: {kind}: {exc}".replace("\n", " "), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
