"""Acceptance criteria, one test per criterion. Each test records a PASS/FAIL
line that is printed in the pytest terminal summary."""

import csv
import math
import time
from collections import Counter
from importlib import resources
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from irtestbed.drmm import DrmmConfig
from irtestbed.evaluation import evaluate_run, paired_ttest
from irtestbed.index import Document, build_index
from irtestbed.meta import load_records, summary_stats
from irtestbed.pipeline import run_experiment
from irtestbed.ranking import RankedList, Rm3Params, bm25_search, rm3_expand, weighted_search
from irtestbed.rerank import interpolate
from irtestbed.synthetic import SyntheticConfig, generate

from cli_helpers import artifact_digests, run_all_commands
from conftest import PLAIN, record_criterion
from helpers import random_eval_fixture, reference_metrics
from test_drmm import gradient_check_error, random_model, tiny_setup
from test_ranking import oracle_bm25
import drmm_oracle

SURVEY = Path(str(resources.files("irtestbed") / "data" / "robust04_survey_synthetic.csv"))


def test_criterion_1_metric_oracle():
    run, qrels = random_eval_fixture(seed=2019)
    start = time.perf_counter()
    ours, _ = evaluate_run(run, qrels)
    elapsed = time.perf_counter() - start
    ref = reference_metrics(run, qrels)
    worst = max(abs(ours[q][m] - ref[q][m]) for q in ref for m in ("ap", "ndcg@20"))
    ok = len(ref) == 50 and worst <= 1e-4 and elapsed < 10
    record_criterion(1, "AP and NDCG@20 agree with trec_eval per topic",
                     ok, f"50 topics, max |diff| {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_2_statistics_oracle():
    rng = np.random.default_rng(2)
    worst_t = worst_p = 0.0
    for _ in range(10):
        a = rng.random(50)
        b = a + rng.normal(0.01, 0.05, 50)
        ours = paired_ttest(a.tolist(), b.tolist())
        ref = stats.ttest_rel(b, a)
        worst_t = max(worst_t, abs(ours.t - ref.statistic))
        worst_p = max(worst_p, abs(ours.p - ref.pvalue))
    same = paired_ttest([0.3] * 50, [0.3] * 50)
    hand = paired_ttest([0.0] * 5, [1.0, 2.0, 3.0, 4.0, 5.0])
    ok = (worst_t <= 1e-6 and worst_p <= 1e-6 and same.p == 1.0 and same.t == 0.0
          and abs(hand.p - 0.0132) < 5e-5)
    record_criterion(2, "paired t-test agrees with scipy", ok,
                     f"max |dt| {worst_t:.1e}, max |dp| {worst_p:.1e}, zero-diff p {same.p}, d=1..5 p {hand.p:.4f}")
    assert ok


def test_criterion_3_bm25_rm3_formula_oracle():
    corpus = {
        "d1": "a a b c", "d2": "a c", "d3": "c c d", "d4": "b d e e", "d5": "a b c d e",
        "d6": "e", "d7": "f a a a", "d8": "b b f", "d9": "c d f g", "d10": "g g a",
    }
    index = build_index([Document(d, t) for d, t in corpus.items()], PLAIN)
    worst, checked, distributions_ok = 0.0, 0, True
    for query in (["a"], ["a", "b"], ["c", "c", "e"], ["g", "f", "d"], ["zzz", "a"]):
        run = bm25_search(index, query)
        ref = oracle_bm25(corpus, {t: float(c) for t, c in Counter(query).items()})
        assert set(run.docids) == set(ref)
        for d, s in run.entries:
            worst, checked = max(worst, abs(s - ref[d])), checked + 1
        for params in (Rm3Params(), Rm3Params(3, 4, 0.3), Rm3Params(2, 2, 0.5)):
            wq = rm3_expand(index, query, bm25_search(index, query, k=max(params.fb_docs, 1)), params)
            w = np.array(list(wq.terms.values()))
            distributions_ok &= bool((w >= 0).all()) and abs(w.sum() - 1.0) <= 1e-9
            second = weighted_search(index, wq)
            ref2 = oracle_bm25(corpus, dict(wq.terms))
            for d, s in second.entries:
                worst, checked = max(worst, abs(s - ref2[d])), checked + 1
    ok = worst <= 1e-9 and distributions_ok
    record_criterion(3, "BM25 and RM3 scores match a brute-force formula oracle", ok,
                     f"{checked} scores, max |diff| {worst:.1e}, RM3 distributions valid: {distributions_ok}")
    assert ok


def test_criterion_4_drmm_gradients_and_forward():
    grad_errors = [gradient_check_error(seed) for seed in range(20)]
    forward_err = 0.0
    from irtestbed.drmm import drmm_score
    from irtestbed.ranking import idf
    for seed in range(20):
        rng, words, emb, index = tiny_setup(seed)
        cfg = DrmmConfig(hidden=(5,), max_query_len=10, doc_truncate=12)
        model = random_model(cfg, rng)
        query, doc = list(rng.choice(words, 4)), list(rng.choice(words, 16))
        ref = drmm_oracle.score([w.tolist() for w in model.weights], [b.tolist() for b in model.biases],
                                model.gate, [emb[t].tolist() for t in query], [idf(index, t) for t in query],
                                [emb[t].tolist() for t in doc[:12]], cfg.bins)
        forward_err = max(forward_err, abs(drmm_score(model, query, doc, emb, index) - ref))
    ok = max(grad_errors) < 1e-4 and forward_err <= 1e-9
    record_criterion(4, "DRMM gradients match central differences; forward matches a duplicate oracle", ok,
                     f"20 seeds, max relative gradient error {max(grad_errors):.1e}, forward |diff| {forward_err:.1e}")
    assert ok


@pytest.mark.slow
def test_criterion_5_synthetic_additivity():
    wins, worst_seconds, lines = 0, 0.0, []
    for seed in range(20):
        start = time.perf_counter()
        col = generate(SyntheticConfig(seed=seed))
        index = build_index(col.docs)
        rep = run_experiment(index, col.docs, col.topics, col.qrels, col.embeddings, mode="five_fold",
                             seed=seed, drmm=DrmmConfig(seed=seed), learning_rates=[0.03, 0.3])
        seconds = time.perf_counter() - start
        worst_seconds = max(worst_seconds, seconds)
        t = rep.tests["ap"]
        win = rep.mean("reranked") > rep.mean("baseline") and t["p"] < 0.05
        wins += win
        lines.append(f"seed {seed}: RM3 {rep.mean('baseline'):.4f} -> +DRMM {rep.mean('reranked'):.4f}, "
                     f"p={t['p']:.2g}, {seconds:.1f}s")
    print("\n".join(lines))
    ok = wins >= 18 and worst_seconds < 600
    record_criterion(5, "RM3+DRMM beats RM3 with p < 0.05 on synthetic corpora", ok,
                     f"{wins}/20 seeds, slowest seed {worst_seconds:.1f}s")
    assert ok


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def generated_runs(draw):
    n = draw(st.integers(1, 50))
    ids = draw(st.lists(st.text("abcdefghijklmnop0123456789", min_size=1, max_size=8),
                        min_size=n, max_size=n, unique=True))
    base = dict(zip(ids, draw(st.lists(finite, min_size=n, max_size=n))))
    nn = dict(zip(ids, draw(st.lists(finite, min_size=n, max_size=n))))
    return RankedList.from_scores("q", base), nn


def test_criterion_6_interpolation_endpoints():
    cases = []

    @settings(max_examples=1000, deadline=None, database=None)
    @given(generated_runs())
    def endpoints(run_and_scores):
        baseline, nn = run_and_scores
        cases.append(1)
        assert interpolate(baseline, nn, 0.0).docids == baseline.docids
        assert interpolate(baseline, nn, 1.0).docids == RankedList.from_scores("q", nn).docids

    try:
        endpoints()
        ok, detail = len(cases) >= 1000, f"{len(cases)} generated cases"
    except AssertionError as exc:
        ok, detail = False, f"counterexample: {exc}"
    record_criterion(6, "alpha = 0 and alpha = 1 reproduce the input orderings", ok, detail)
    assert ok


def test_criterion_7_meta_analysis_counts():
    # expected values counted by hand from the bundled CSV (see the fixture generator)
    expected = {
        "overall": {"papers": 109, "baseline_below_median": 36, "best_below_median": 25,
                    "best_below_rm3": 65, "best_above_trec_best": 6, "max": 0.3686},
        "neural": {"papers": 18, "baseline_below_median": 8, "best_below_median": 4, "best_below_rm3": 12},
    }
    with open(SURVEY, newline="") as fh:
        raw_rows = sum(1 for _ in csv.DictReader(fh))
    records = load_records(SURVEY)
    s = summary_stats(records)
    got = {}
    for group, exp in expected.items():
        got[group] = {k: (s[group][k] if k == "papers" else s[group][k]["count"]) for k in exp if k != "max"}
        if "max" in exp:
            got[group]["max"] = s[group]["max_best_ap"]["ap"]
    ok = raw_rows == 109 and len(records) == 109 and got == expected
    record_criterion(7, "survey statistics match the expected counts exactly", ok,
                     f"overall {got['overall']}, neural {got['neural']}")
    assert ok


def test_criterion_8_cli_determinism(tmp_path):
    run_all_commands(tmp_path, SURVEY)
    first = artifact_digests(tmp_path)
    run_all_commands(tmp_path, SURVEY)
    second = artifact_digests(tmp_path)
    differing = sorted(k for k in first if first[k] != second.get(k))
    svgs = [k for k in first if k.endswith(".svg")]
    ok = not differing and first.keys() == second.keys() and len(svgs) == 3
    record_criterion(8, "every CLI command reruns byte-identically", ok,
                     f"{len(first)} artifacts incl. {len(svgs)} SVGs, differing: {differing or 'none'}")
    assert ok
