"""BM25 retrieval and RM3 pseudo-relevance feedback."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .index import InvertedIndex

DEFAULT_DEPTH = 1000


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if not (math.isfinite(self.k1) and self.k1 >= 0):
            raise ValueError(f"k1 must be finite and non-negative, got {self.k1}")
        if not (0.0 <= self.b <= 1.0):
            raise ValueError(f"b must lie in [0, 1], got {self.b}")


@dataclass(frozen=True)
class Rm3Params:
    fb_docs: int = 10
    fb_terms: int = 10
    orig_weight: float = 0.5

    def __post_init__(self):
        if self.fb_docs < 0 or self.fb_terms < 0:
            raise ValueError("fb_docs and fb_terms must be non-negative")
        if not (0.0 <= self.orig_weight <= 1.0):
            raise ValueError(f"orig_weight must lie in [0, 1], got {self.orig_weight}")


@dataclass(frozen=True)
class WeightedQuery:
    terms: Mapping[str, float]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("weighted query needs at least one term")
        if any(w < 0 for w in self.terms.values()):
            raise ValueError("query term weights must be non-negative")
        total = math.fsum(self.terms.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"query term weights sum to {total}, expected 1")

    @classmethod
    def uniform(cls, query: Sequence[str]) -> "WeightedQuery":
        """Maximum-likelihood distribution over the query's tokens."""
        counts = Counter(query)
        n = len(query)
        return cls({t: c / n for t, c in sorted(counts.items())})


@dataclass
class RankedList:
    """One topic's ranking, kept sorted by score desc with docid asc tie-break."""

    topic: str
    entries: list[tuple[str, float]] = field(default_factory=list)
    tag: str = "irtestbed"

    def __post_init__(self):
        seen = set()
        prev = None
        for docid, score in self.entries:
            if docid in seen:
                raise ValueError(f"topic {self.topic}: docid {docid!r} ranked twice")
            seen.add(docid)
            if prev is not None and (score > prev[1] or (score == prev[1] and docid < prev[0])):
                raise ValueError(f"topic {self.topic}: entries not in (score desc, docid asc) order")
            prev = (docid, score)

    @classmethod
    def from_scores(cls, topic: str, scores: Mapping[str, float], tag: str = "irtestbed",
                    k: int | None = None) -> "RankedList":
        ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        if k is not None:
            ordered = ordered[:k]
        return cls(topic, [(d, float(s)) for d, s in ordered], tag)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def docids(self) -> list[str]:
        return [d for d, _ in self.entries]

    def scores(self) -> dict[str, float]:
        return dict(self.entries)

    def head(self, k: int) -> "RankedList":
        return RankedList(self.topic, self.entries[:k], self.tag)


def idf(index: InvertedIndex, term: str) -> float:
    df = index.df(term)
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def _accumulate(index: InvertedIndex, weights: Mapping[str, float], params: Bm25Params):
    scores = np.zeros(index.doc_count, dtype=np.float64)
    hit = np.zeros(index.doc_count, dtype=bool)
    if index.doc_count == 0 or index.avg_doc_length == 0:
        return scores, hit
    norm = params.k1 * (1.0 - params.b + params.b * index.doc_lengths / index.avg_doc_length)
    for term in sorted(weights):
        w = weights[term]
        ords, tfs = index.postings(term)
        if w <= 0 or len(ords) == 0:
            continue
        contrib = idf(index, term) * tfs * (params.k1 + 1.0) / (tfs + norm[ords])
        scores[ords] += w * contrib
        hit[ords] = True
    return scores, hit


def _top_k(index: InvertedIndex, topic: str, scores: np.ndarray, hit: np.ndarray, k: int,
           tag: str) -> RankedList:
    cand = np.flatnonzero(hit)
    # ordinals follow ascending docid, so ordinal is the tie-break key
    order = np.lexsort((cand, -scores[cand]))[:k]
    chosen = cand[order]
    return RankedList(topic, [(index.docids[o], float(scores[o])) for o in chosen], tag)


def bm25_search(index: InvertedIndex, query: Sequence[str], k: int = DEFAULT_DEPTH,
                params: Bm25Params = Bm25Params(), topic: str = "", tag: str = "bm25") -> RankedList:
    """Okapi BM25 over analyzed query terms; repeated terms count repeatedly."""
    if k < 1:
        raise ValueError("k must be at least 1")
    weights = {t: float(c) for t, c in Counter(query).items()}
    scores, hit = _accumulate(index, weights, params)
    return _top_k(index, topic, scores, hit, k, tag)


def weighted_search(index: InvertedIndex, wq: WeightedQuery, k: int = DEFAULT_DEPTH,
                    params: Bm25Params = Bm25Params(), topic: str = "", tag: str = "bm25+rm3") -> RankedList:
    """BM25 with each term's contribution scaled by its query weight."""
    if k < 1:
        raise ValueError("k must be at least 1")
    scores, hit = _accumulate(index, wq.terms, params)
    return _top_k(index, topic, scores, hit, k, tag)


def rm3_expand(index: InvertedIndex, query: Sequence[str], initial: RankedList,
               params: Rm3Params = Rm3Params()) -> WeightedQuery:
    """Expand ``query`` with a relevance model estimated from ``initial``.

    P(t|R) = sum_d w_d * tf(t, d) / |d| over the top ``fb_docs`` documents,
    with w_d the retrieval scores rescaled to sum to one. The model is cut to
    its ``fb_terms`` heaviest terms, renormalized, and mixed with the query's
    own distribution at ``orig_weight``.
    """
    original = WeightedQuery.uniform(query)
    feedback = initial.entries[:params.fb_docs]
    if not feedback or params.fb_terms == 0 or params.orig_weight == 1.0:
        return original

    total = math.fsum(max(s, 0.0) for _, s in feedback)
    if total > 0:
        doc_weights = [max(s, 0.0) / total for _, s in feedback]
    else:
        doc_weights = [1.0 / len(feedback)] * len(feedback)

    relevance: dict[str, float] = {}
    for (docid, _), w in zip(feedback, doc_weights):
        length = index.doc_length(docid)
        if length == 0 or w == 0:
            continue
        for term, tf in index.doc_term_freqs(docid).items():
            relevance[term] = relevance.get(term, 0.0) + w * tf / length
    if not relevance:
        return original

    kept = sorted(relevance.items(), key=lambda kv: (-kv[1], kv[0]))[:params.fb_terms]
    mass = math.fsum(v for _, v in kept)
    mixed: dict[str, float] = {t: params.orig_weight * w for t, w in original.terms.items()}
    for term, v in kept:
        mixed[term] = mixed.get(term, 0.0) + (1.0 - params.orig_weight) * v / mass
    # remove rounding drift so the distribution sums to one
    z = math.fsum(mixed.values())
    return WeightedQuery({t: w / z for t, w in sorted(mixed.items())})


def bm25_rm3_search(index: InvertedIndex, query: Sequence[str], k: int = DEFAULT_DEPTH,
                    bm25: Bm25Params = Bm25Params(), rm3: Rm3Params = Rm3Params(),
                    topic: str = "", tag: str = "bm25+rm3") -> RankedList:
    """First-pass BM25, RM3 expansion, second-pass weighted BM25."""
    first = bm25_search(index, query, k=max(rm3.fb_docs, 1), params=bm25, topic=topic)
    if not first.entries:
        return RankedList(topic, [], tag)
    wq = rm3_expand(index, query, first, rm3)
    return weighted_search(index, wq, k=k, params=bm25, topic=topic, tag=tag)
