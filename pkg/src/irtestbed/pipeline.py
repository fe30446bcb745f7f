"""End-to-end additivity experiment: BM25+RM3 baseline, cross-validated DRMM
training, interpolation weight tuning, and a paired test against the baseline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, asdict, field
from typing import Mapping, Sequence

import numpy as np

from .analysis import RERANK_ANALYZER, analyze
from .crossval import FoldSpec, Split, cv_tune, make_folds
from .drmm import (DrmmConfig, DrmmModel, EmbeddingTable, FeatureExtractor, PairFeatures,
                   TrainingPair, forward, make_training_pairs, train_drmm, with_learning_rate)
from .evaluation import average_precision, evaluate_run, ndcg_at_20, num_relevant, paired_ttest
from .index import InvertedIndex, Document, build_index
from .ranking import Bm25Params, RankedList, Rm3Params, bm25_rm3_search, bm25_search, DEFAULT_DEPTH
from .rerank import interpolate
from .trec import Run, sorted_topics

log = logging.getLogger(__name__)


def default_alpha_grid() -> list[float]:
    return [round(0.05 * i, 2) for i in range(21)]


def retrieve(index: InvertedIndex, topics: Mapping[str, str], k: int = DEFAULT_DEPTH,
             bm25: Bm25Params = Bm25Params(), rm3: Rm3Params | None = Rm3Params(),
             tag: str | None = None) -> Run:
    run: Run = {}
    for qid in sorted_topics(topics):
        query = index.analyze(topics[qid])
        if rm3 is None:
            run[qid] = bm25_search(index, query, k, bm25, topic=qid, tag=tag or "bm25")
        else:
            run[qid] = bm25_rm3_search(index, query, k, bm25, rm3, topic=qid, tag=tag or "bm25+rm3")
    return run


class TopicFeatures:
    """Cached histogram features for every (topic, candidate) pair."""

    def __init__(self, fx: FeatureExtractor, topics: Mapping[str, str], candidates: Mapping[str, RankedList]):
        self.docids: dict[str, list[str]] = {}
        self.feats: dict[str, PairFeatures] = {}
        self.row: dict[str, dict[str, int]] = {}
        for qid in sorted_topics(candidates):
            q = fx.query_input(analyze(topics[qid], fx.analyzer))
            ids = candidates[qid].docids
            self.docids[qid] = ids
            f = fx.pairs_for(q, ids)
            if not q.terms:
                f.mask[:] = False
            self.feats[qid] = f
            self.row[qid] = {d: i for i, d in enumerate(ids)}

    def pair(self, p: TrainingPair) -> tuple[PairFeatures, PairFeatures]:
        f, row = self.feats[p.topic], self.row[p.topic]
        return f.take([row[p.positive]]), f.take([row[p.negative]])

    def validation(self, topics: Sequence[str]) -> dict[str, tuple[list[str], PairFeatures]]:
        return {t: (self.docids[t], self.feats[t]) for t in topics if t in self.feats}

    def scores(self, model: DrmmModel, topic: str) -> dict[str, float]:
        f = self.feats.get(topic)
        if f is None or len(f) == 0:
            return {}
        return dict(zip(self.docids[topic], forward(model, f).tolist()))


@dataclass
class SplitOutcome:
    learning_rate: float
    best_epoch: int
    validation_ap: float
    alpha: float | None = None
    epoch_validation_ap: list[float] = field(default_factory=list)


@dataclass
class ExperimentReport:
    config: dict
    folds: dict
    splits: list[SplitOutcome]
    baseline: dict[str, dict[str, float]]
    reranked: dict[str, dict[str, float]]
    nn_only: dict[str, dict[str, float]]
    excluded_topics: list[str]
    tests: dict[str, dict]

    def mean(self, system: str, metric: str = "ap") -> float:
        table = getattr(self, system)
        return math.fsum(v[metric] for v in table.values()) / len(table) if table else 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["summary"] = {
            s: {m: self.mean(s, m) for m in ("ap", "ndcg@20")} for s in ("baseline", "reranked", "nn_only")
        }
        return d


def train_split(tf: TopicFeatures, baseline: Run, qrels, split: Split, config: DrmmConfig,
                learning_rates: Sequence[float]) -> tuple[DrmmModel, SplitOutcome]:
    """Train one model per learning rate and keep the best on validation AP."""
    best = None
    for lr in learning_rates:
        cfg = with_learning_rate(config, lr)
        cands = {t: baseline[t] for t in split.train if t in baseline}
        pairs = make_training_pairs(cands, qrels, split.train, cfg.pairs_per_topic, cfg.seed)
        result = train_drmm(pairs, tf.pair, tf.validation(split.validation), qrels, cfg,
                            train_topics=split.train)
        best_ap = max(result.validation_ap[result.best_epoch - 1:result.best_epoch])
        log.info("lr=%g best epoch %d validation AP %.4f", lr, result.best_epoch, best_ap)
        if best is None or best_ap > best[1].validation_ap:
            best = (result.model, SplitOutcome(lr, result.best_epoch, best_ap,
                                               epoch_validation_ap=result.validation_ap))
    return best


def run_experiment(index: InvertedIndex, docs: Sequence[Document] | Mapping[str, str],
                   topics: Mapping[str, str], qrels: Mapping[str, Mapping[str, int]],
                   emb: EmbeddingTable, mode: str = "five_fold", seed: int = 13,
                   bm25: Bm25Params = Bm25Params(), rm3: Rm3Params = Rm3Params(),
                   drmm: DrmmConfig = DrmmConfig(), alpha_grid: Sequence[float] | None = None,
                   learning_rates: Sequence[float] | None = None, depth: int = DEFAULT_DEPTH,
                   hypotheses: int = 1, baseline: Run | None = None) -> ExperimentReport:
    """Rerank a BM25+RM3 run with DRMM under cross-validation.

    For every split a model is trained on the training topics (model and
    learning rate selected on validation AP), then the interpolation weight
    is chosen on validation AP and applied to the split's test topics.
    """
    alpha_grid = list(alpha_grid) if alpha_grid is not None else default_alpha_grid()
    learning_rates = list(learning_rates) if learning_rates is not None else [drmm.learning_rate]
    texts = dict(docs) if isinstance(docs, Mapping) else {d.docid: d.text for d in docs}

    if baseline is None:
        baseline = retrieve(index, topics, depth, bm25, rm3)
    judged = [t for t in sorted_topics(topics) if num_relevant(qrels, t) > 0]
    excluded = [t for t in sorted_topics(topics) if t in qrels and num_relevant(qrels, t) == 0]
    for t in judged:
        baseline.setdefault(t, RankedList(t, [], "bm25+rm3"))
    folds = make_folds(judged, mode, seed)

    stats = build_index((Document(d, t) for d, t in texts.items()), RERANK_ANALYZER)
    fx = FeatureExtractor(emb, stats, drmm, texts)
    tf = TopicFeatures(fx, topics, {t: baseline[t] for t in judged})

    models: list[DrmmModel] = []
    outcomes: list[SplitOutcome] = []
    nn_scores: dict[str, dict[str, float]] = {}
    for i, split in enumerate(folds.splits):
        model, outcome = train_split(tf, baseline, qrels, split, drmm, learning_rates)
        models.append(model)
        outcomes.append(outcome)
        for t in (*split.validation, *split.test):
            nn_scores.setdefault(i, {})[t] = tf.scores(model, t)
        log.info("split %d: lr %g epoch %d validation AP %.4f", i, outcome.learning_rate,
                 outcome.best_epoch, outcome.validation_ap)

    split_index = {id(s): i for i, s in enumerate(folds.splits)}

    def runner(alpha: float, split: Split) -> dict[str, float]:
        scores = nn_scores[split_index[id(split)]]
        return {t: average_precision(interpolate(baseline[t], scores[t], alpha), qrels)
                for t in (*split.validation, *split.test)}

    tuned = cv_tune(folds, alpha_grid, runner)
    reranked_run: Run = {}
    nn_run: Run = {}
    for i, (split, alpha) in enumerate(zip(folds.splits, tuned.chosen)):
        outcomes[i].alpha = alpha
        for t in split.test:
            reranked_run[t] = interpolate(baseline[t], nn_scores[i][t], alpha, tag="bm25+rm3+drmm")
            nn_run[t] = interpolate(baseline[t], nn_scores[i][t], 1.0, tag="drmm")

    base_metrics, _ = evaluate_run({t: baseline[t] for t in judged}, {t: qrels[t] for t in judged})
    rr_metrics = {t: {"ap": average_precision(reranked_run[t], qrels), "ndcg@20": ndcg_at_20(reranked_run[t], qrels)}
                  for t in judged}
    nn_metrics = {t: {"ap": average_precision(nn_run[t], qrels), "ndcg@20": ndcg_at_20(nn_run[t], qrels)}
                  for t in judged}
    tests = {}
    for metric in ("ap", "ndcg@20"):
        a = [base_metrics[t][metric] for t in judged]
        b = [rr_metrics[t][metric] for t in judged]
        tests[metric] = paired_ttest(a, b, m=hypotheses).as_dict()
        del tests[metric]["a"], tests[metric]["b"]

    config = {
        "mode": mode, "seed": seed, "depth": depth,
        "bm25": asdict(bm25), "rm3": asdict(rm3), "drmm": asdict(drmm),
        "alpha_grid": alpha_grid, "learning_rates": learning_rates, "hypotheses": hypotheses,
    }
    return ExperimentReport(config, folds.as_dict(), outcomes, base_metrics, rr_metrics, nn_metrics,
                            excluded, tests)
