import logging

import pytest
from hypothesis import given, settings, strategies as st

from irtestbed.ranking import RankedList
from irtestbed.rerank import RerankError, interpolate, load_external_scores, minmax, write_scores

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def runs(draw):
    n = draw(st.integers(1, 40))
    ids = draw(st.lists(st.text("abcdefghij0123456789-", min_size=1, max_size=6),
                        min_size=n, max_size=n, unique=True))
    base = dict(zip(ids, draw(st.lists(finite, min_size=n, max_size=n))))
    nn = dict(zip(ids, draw(st.lists(finite, min_size=n, max_size=n))))
    return RankedList.from_scores("301", base), nn


@settings(max_examples=1000, deadline=None)
@given(runs())
def test_endpoints_reproduce_inputs(run_and_scores):
    baseline, nn = run_and_scores
    assert interpolate(baseline, nn, 0.0).docids == baseline.docids
    assert interpolate(baseline, nn, 1.0).docids == RankedList.from_scores("301", nn).docids


@settings(max_examples=200, deadline=None)
@given(runs(), st.floats(0, 1))
def test_same_documents_and_top_agreement(run_and_scores, alpha):
    baseline, nn = run_and_scores
    out = interpolate(baseline, nn, alpha)
    assert sorted(out.docids) == sorted(baseline.docids)
    # a document that tops both inputs tops every mixture
    top_b = baseline.docids[0]
    if RankedList.from_scores("301", nn).docids[0] == top_b:
        best = max(out.scores().values())
        assert out.scores()[top_b] == best


@settings(max_examples=200, deadline=None)
@given(runs(), st.floats(0.01, 0.98), st.floats(0.0, 0.01))
def test_agreeing_pairs_keep_order(run_and_scores, a1, step):
    baseline, nn = run_and_scores
    a2 = min(a1 + step, 0.99)
    nb, nr = minmax(baseline.scores()), minmax(nn)
    r1, r2 = interpolate(baseline, nn, a1), interpolate(baseline, nn, a2)
    pos1 = {d: i for i, d in enumerate(r1.docids)}
    pos2 = {d: i for i, d in enumerate(r2.docids)}
    ids = baseline.docids
    for x in ids[:8]:
        for y in ids[:8]:
            if nb[x] > nb[y] and nr[x] > nr[y]:
                assert pos1[x] < pos1[y] and pos2[x] < pos2[y]


def test_hand_example():
    baseline = RankedList("1", [("d1", 1.0), ("d2", 0.5), ("d3", 0.0)])
    out = interpolate(baseline, {"d1": 0.0, "d2": 1.0, "d3": 0.5}, 0.6)
    assert out.docids == ["d2", "d1", "d3"]
    got = out.scores()
    for d, v in {"d1": 0.4, "d2": 0.8, "d3": 0.3}.items():
        assert got[d] == pytest.approx(v, abs=1e-12)


def test_missing_scores_listed():
    baseline = RankedList("1", [("d1", 2.0), ("d2", 1.0), ("d3", 0.5)])
    with pytest.raises(RerankError, match="d2, d3"):
        interpolate(baseline, {"d1": 0.3}, 0.5)
    with pytest.raises(RerankError):
        interpolate(baseline, {"d1": 1, "d2": 1, "d3": 1}, 1.5)


def test_minmax_constant():
    assert minmax({"a": 3.0, "b": 3.0}) == {"a": 0.0, "b": 0.0}
    assert minmax({}) == {}


def test_score_file_single_line(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("301 FBIS3-1 0.73\n")
    assert load_external_scores(p) == {"301": {"FBIS3-1": 0.73}}


def test_score_file_empty(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("")
    assert load_external_scores(p) == {}


def test_score_file_round_trip(tmp_path):
    import random
    rnd = random.Random(5)
    scores = {}
    for i in range(1000):
        scores.setdefault(str(301 + i % 37), {})[f"DOC-{i:05d}"] = rnd.uniform(-50, 50)
    p = tmp_path / "s.txt"
    write_scores(scores, p)
    assert sum(1 for _ in p.open()) == 1000
    assert load_external_scores(p) == scores


def test_score_file_duplicates_and_errors(tmp_path, caplog):
    p = tmp_path / "s.txt"
    p.write_text("1 a 0.5\n1 a 0.9\n")
    with caplog.at_level(logging.WARNING):
        assert load_external_scores(p) == {"1": {"a": 0.9}}
    assert "duplicate" in caplog.text
    p.write_text("1 a 0.5\n\n1 b\n")
    with pytest.raises(RerankError, match=":3"):
        load_external_scores(p)
    p.write_text("1 a x\n")
    with pytest.raises(RerankError, match=":1"):
        load_external_scores(p)
