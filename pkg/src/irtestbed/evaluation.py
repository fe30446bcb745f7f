"""Effectiveness metrics and paired significance testing."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Mapping, Sequence

from .ranking import RankedList

AP_DEPTH = 1000
NDCG_DEPTH = 20


class EvaluationError(ValueError):
    pass


def _judgments(qrels: Mapping[str, Mapping[str, int]], topic: str) -> Mapping[str, int]:
    try:
        return qrels[topic]
    except KeyError:
        raise EvaluationError(f"topic {topic!r} has no relevance judgments") from None


def num_relevant(qrels: Mapping[str, Mapping[str, int]], topic: str) -> int:
    return sum(1 for g in qrels.get(topic, {}).values() if g >= 1)


def average_precision(run: RankedList, qrels: Mapping[str, Mapping[str, int]],
                      depth: int = AP_DEPTH) -> float:
    """Non-interpolated AP; unretrieved relevant documents contribute zero.

    Unjudged documents count as non-relevant.
    """
    judged = _judgments(qrels, run.topic)
    total = sum(1 for g in judged.values() if g >= 1)
    if total == 0:
        raise EvaluationError(f"topic {run.topic!r} has no relevant documents")
    hits = 0
    acc = 0.0
    for rank, (docid, _) in enumerate(run.entries[:depth], 1):
        if judged.get(docid, 0) >= 1:
            hits += 1
            acc += hits / rank
    return acc / total


def dcg(grades: Sequence[int], linear_gain: bool = False) -> float:
    total = 0.0
    for i, g in enumerate(grades):
        if g > 0:
            gain = g if linear_gain else 2.0 ** g - 1.0
            total += gain / math.log2(i + 2)
    return total


def ndcg_at_k(run: RankedList, qrels: Mapping[str, Mapping[str, int]], k: int = NDCG_DEPTH,
              linear_gain: bool = False) -> float:
    judged = _judgments(qrels, run.topic)
    ideal_grades = sorted((g for g in judged.values() if g >= 1), reverse=True)
    if not ideal_grades:
        raise EvaluationError(f"topic {run.topic!r} has no relevant documents")
    ideal = dcg(ideal_grades[:k], linear_gain)
    got = dcg([judged.get(d, 0) for d in run.docids[:k]], linear_gain)
    return got / ideal


def ndcg_at_20(run: RankedList, qrels: Mapping[str, Mapping[str, int]], linear_gain: bool = False) -> float:
    return ndcg_at_k(run, qrels, NDCG_DEPTH, linear_gain)


def evaluate_run(run: Mapping[str, RankedList], qrels: Mapping[str, Mapping[str, int]],
                 linear_gain: bool = False) -> tuple[dict[str, dict[str, float]], list[str]]:
    """Per-topic AP and NDCG@20 for every judged topic with relevant documents.

    Judged topics missing from the run score zero. Returns the metric table and
    the topics excluded for having no relevant documents.
    """
    per_topic: dict[str, dict[str, float]] = {}
    excluded = []
    for topic in qrels:
        if num_relevant(qrels, topic) == 0:
            excluded.append(topic)
            continue
        rl = run.get(topic) or RankedList(topic, [])
        per_topic[topic] = {
            "ap": average_precision(rl, qrels),
            "ndcg@20": ndcg_at_20(rl, qrels, linear_gain),
        }
    return per_topic, sorted(excluded)


# -- Student t distribution ---------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 10000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_tailed_p(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    return min(1.0, betainc(df / 2.0, 0.5, df / (df + t * t)))


@dataclass(frozen=True)
class TestReport:
    a: tuple[float, ...]
    b: tuple[float, ...]
    mean_a: float
    mean_b: float
    mean_difference: float
    t: float
    df: int
    p: float
    m: int = 1
    p_bonferroni: float | None = None

    __test__ = False  # not a pytest class

    def as_dict(self) -> dict:
        d = asdict(self)
        d["a"], d["b"] = list(self.a), list(self.b)
        return d


def paired_ttest(a: Sequence[float], b: Sequence[float], m: int = 1) -> TestReport:
    """Paired two-tailed t-test on per-topic scores, differences taken b - a.

    Identical inputs give t = 0, p = 1 by convention.
    """
    if len(a) != len(b):
        raise EvaluationError(f"paired samples differ in length ({len(a)} vs {len(b)})")
    n = len(a)
    if n < 2:
        raise EvaluationError("paired t-test needs at least two topics")
    diffs = [y - x for x, y in zip(a, b)]
    mean_d = math.fsum(diffs) / n
    var = math.fsum((d - mean_d) ** 2 for d in diffs) / (n - 1)
    if all(d == 0 for d in diffs):
        t, p = 0.0, 1.0
    elif var == 0.0:
        t, p = math.copysign(math.inf, mean_d), 0.0
    else:
        t = mean_d / math.sqrt(var / n)
        p = t_two_tailed_p(t, n - 1)
    return TestReport(tuple(a), tuple(b), math.fsum(a) / n, math.fsum(b) / n, mean_d,
                      t, n - 1, p, m, bonferroni([p], m)[0])


def bonferroni(p_values: Sequence[float], m: int | None = None) -> list[float]:
    m = len(p_values) if m is None else m
    if m < len(p_values):
        raise EvaluationError(f"hypothesis count {m} is smaller than the {len(p_values)} p-values given")
    out = []
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise EvaluationError(f"p-value {p} outside [0, 1]")
        out.append(min(1.0, m * p))
    return out
