"""Shared fixture builders for the test suite."""

import numpy as np
import pytrec_eval

from irtestbed.ranking import RankedList


def random_eval_fixture(seed: int = 0, n_topics: int = 50, n_docs: int = 5000, depth: int = 1000):
    """Randomized runs and graded qrels with distinct scores per topic."""
    rng = np.random.default_rng(seed)
    docids = [f"doc{i:05d}" for i in range(n_docs)]
    run, qrels = {}, {}
    for t in range(n_topics):
        qid = str(401 + t)
        judged = rng.choice(n_docs, size=int(rng.integers(20, 300)), replace=False)
        grades = rng.choice([0, 0, 1, 1, 2, 3], size=len(judged))
        if not (grades > 0).any():
            grades[0] = 1
        qrels[qid] = {docids[i]: int(g) for i, g in zip(judged, grades)}
        retrieved = rng.choice(n_docs, size=depth, replace=False)
        # bias some relevant documents toward the top
        scores = rng.permutation(depth).astype(float) + rng.random(depth) * 0.5
        for j, d in enumerate(retrieved):
            if qrels[qid].get(docids[d], 0) > 0:
                scores[j] += rng.random() * depth
        order = sorted(range(depth), key=lambda j: (-scores[j], docids[retrieved[j]]))
        run[qid] = RankedList(qid, [(docids[retrieved[j]], float(scores[j])) for j in order])
    return run, qrels


def reference_metrics(run, qrels):
    """AP and NDCG@20 from trec_eval; NDCG gains 2^g - 1 are fed in as grades."""
    r = {q: {d: s for d, s in rl.entries} for q, rl in run.items()}
    ap = pytrec_eval.RelevanceEvaluator({q: dict(j) for q, j in qrels.items()}, {"map"}).evaluate(r)
    exp_q = {q: {d: int(2 ** g - 1) for d, g in j.items()} for q, j in qrels.items()}
    nd = pytrec_eval.RelevanceEvaluator(exp_q, {"ndcg_cut.20"}).evaluate(r)
    return {q: {"ap": ap[q]["map"], "ndcg@20": nd[q]["ndcg_cut_20"]} for q in r}
