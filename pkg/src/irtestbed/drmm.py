"""Deep Relevance Matching Model: histogram features, forward/backward pass
and a seeded mini-batch trainer with pairwise hinge loss.

The model scores a (query, document) pair as

    score = sum_i g_i * MLP(h_i),    g = softmax(w * idf(q_i))

where h_i is the log-count histogram of cosine similarities between query
term i and every document token. Histograms do not depend on trainable
parameters, so they are computed once per pair and cached.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, asdict, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .analysis import RERANK_ANALYZER, AnalyzerConfig, analyze
from .evaluation import average_precision, num_relevant
from .index import InvertedIndex
from .ranking import RankedList, idf as bm25_idf

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "irtestbed-drmm"
CHECKPOINT_VERSION = 1


class DrmmError(ValueError):
    pass


# -- embeddings ---------------------------------------------------------------

class EmbeddingTable:
    """Token -> vector lookup. Out-of-vocabulary tokens are dropped by callers."""

    oov_policy = "drop"

    def __init__(self, vectors: Mapping[str, Sequence[float]], dim: int | None = None):
        if dim is None:
            if not vectors:
                raise DrmmError("cannot infer embedding dimension from an empty table")
            dim = len(next(iter(vectors.values())))
        self.dim = dim
        self._index = {tok: i for i, tok in enumerate(vectors)}
        self.matrix = np.zeros((len(vectors), dim), dtype=np.float64)
        for tok, i in self._index.items():
            v = np.asarray(vectors[tok], dtype=np.float64)
            if v.shape != (dim,):
                raise DrmmError(f"vector for {tok!r} has dimension {v.shape[0]}, expected {dim}")
            self.matrix[i] = v
        self.matrix.setflags(write=False)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __len__(self) -> int:
        return len(self._index)

    def __getitem__(self, token: str) -> np.ndarray:
        return self.matrix[self._index[token]]

    def lookup(self, tokens: Iterable[str]) -> np.ndarray:
        rows = [self._index[t] for t in tokens if t in self._index]
        return self.matrix[rows] if rows else np.zeros((0, self.dim))

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        """Read the word2vec text format; the ``count dim`` header is optional."""
        vectors: dict[str, list[float]] = {}
        dim = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split(" ")
                parts = [p for p in parts if p]
                if not parts:
                    continue
                if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                    dim = int(parts[1])
                    continue
                try:
                    vec = [float(x) for x in parts[1:]]
                except ValueError:
                    raise DrmmError(f"{path}:{lineno}: non-numeric vector component") from None
                if dim is None:
                    dim = len(vec)
                if len(vec) != dim:
                    raise DrmmError(f"{path}:{lineno}: expected {dim} components, got {len(vec)}")
                vectors[parts[0]] = vec
        if dim is None:
            raise DrmmError(f"{path}: no vectors found")
        return cls(vectors, dim)

    def save(self, path: str | Path, header: bool = True) -> None:
        lines = [f"{len(self)} {self.dim}\n"] if header else []
        for tok, i in self._index.items():
            lines.append(tok + " " + " ".join(repr(float(x)) for x in self.matrix[i]) + "\n")
        Path(path).write_text("".join(lines), encoding="utf-8")


# -- configuration and parameters ----------------------------------------------

@dataclass(frozen=True)
class DrmmConfig:
    bins: int = 30
    histogram_mode: str = "log-count"
    hidden: tuple[int, ...] = (5,)
    max_query_len: int = 10
    doc_truncate: int = 500
    epochs_max: int = 5
    patience: int = 5
    batch_size: int = 100
    learning_rate: float = 1e-3
    pairs_per_topic: int = 1000
    seed: int = 13

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(self.hidden))
        if self.bins < 2:
            raise DrmmError("bins must be at least 2")
        if self.histogram_mode != "log-count":
            raise DrmmError("only the log-count histogram mode is supported")
        counts = (self.max_query_len, self.doc_truncate, self.epochs_max, self.patience,
                  self.batch_size, self.pairs_per_topic, *self.hidden)
        if any(c < 1 for c in counts):
            raise DrmmError("all size and count settings must be positive")
        if not self.learning_rate > 0:
            raise DrmmError("learning rate must be positive")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.bins, *self.hidden, 1)


@dataclass
class DrmmModel:
    config: DrmmConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    gate: float

    @classmethod
    def init(cls, config: DrmmConfig, seed: int | None = None) -> "DrmmModel":
        """Glorot-uniform weights, zero biases, unit gate weight."""
        rng = np.random.default_rng(config.seed if seed is None else seed)
        sizes = config.layer_sizes
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(config, weights, biases, 1.0)

    @classmethod
    def zeros(cls, config: DrmmConfig) -> "DrmmModel":
        sizes = config.layer_sizes
        return cls(config, [np.zeros((i, o)) for i, o in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(o) for o in sizes[1:]], 0.0)

    def copy(self) -> "DrmmModel":
        return DrmmModel(self.config, [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases], float(self.gate))

    def check(self) -> None:
        sizes = self.config.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise DrmmError("layer count does not match config")
        for w, b, i, o in zip(self.weights, self.biases, sizes[:-1], sizes[1:]):
            if w.shape != (i, o) or b.shape != (o,):
                raise DrmmError(f"layer shape {w.shape}/{b.shape} does not match ({i}, {o})")
        params = [*self.weights, *self.biases, np.array([self.gate])]
        if not all(np.all(np.isfinite(p)) for p in params):
            raise DrmmError("non-finite model parameter")

    # flat parameter view, used by the gradient check and the optimizer
    def parameters(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def to_json(self) -> str:
        payload = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "gate": float(self.gate),
        }
        return json.dumps(payload, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DrmmModel":
        payload = json.loads(text)
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise DrmmError("not a DRMM checkpoint")
        if payload.get("version") != CHECKPOINT_VERSION:
            raise DrmmError(f"unsupported checkpoint version {payload.get('version')}")
        cfg = payload["config"]
        cfg["hidden"] = tuple(cfg["hidden"])
        model = cls(DrmmConfig(**cfg),
                    [np.asarray(w, dtype=np.float64) for w in payload["weights"]],
                    [np.asarray(b, dtype=np.float64) for b in payload["biases"]],
                    float(payload["gate"]))
        model.check()
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DrmmModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


# -- histograms -----------------------------------------------------------------

def _unit_rows(mat: np.ndarray) -> np.ndarray:
    """Normalize rows; zero rows stay zero."""
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    return np.divide(mat, norms, out=np.zeros_like(mat), where=norms > 0)


def bucket_index(sims: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width buckets over [-1, 1); similarity 1.0 lands in the last one."""
    idx = np.floor((np.clip(sims, -1.0, 1.0) + 1.0) / 2.0 * bins).astype(np.int64)
    return np.minimum(idx, bins - 1)


def histograms(query_units: np.ndarray, doc_units: np.ndarray, bins: int) -> np.ndarray:
    """Log-count histograms, one row per query vector. Inputs are unit rows."""
    nq = query_units.shape[0]
    out = np.zeros((nq, bins))
    if nq == 0 or doc_units.shape[0] == 0:
        return out
    sims = query_units @ doc_units.T
    idx = bucket_index(sims, bins) + (np.arange(nq) * bins)[:, None]
    counts = np.bincount(idx.ravel(), minlength=nq * bins).reshape(nq, bins)
    # zero query vectors are unmatched, not matched at cosine 0
    counts[~np.any(query_units != 0, axis=1)] = 0
    return np.log1p(counts)


def match_histogram(qvec: Sequence[float], doc_vecs: Sequence[Sequence[float]], bins: int = 30) -> np.ndarray:
    """Log-count histogram of cosine similarities between one query vector and
    each document vector. Zero-norm document vectors are skipped."""
    q = np.asarray(qvec, dtype=np.float64)[None, :]
    docs = np.asarray(doc_vecs, dtype=np.float64).reshape(-1, q.shape[1])
    docs = docs[np.linalg.norm(docs, axis=1) > 0]
    return histograms(_unit_rows(q), _unit_rows(docs), bins)[0]


@dataclass
class PairFeatures:
    """Padded per-query-term inputs for one or more (query, doc) pairs."""

    hist: np.ndarray   # (n, max_query_len, bins)
    idf: np.ndarray    # (n, max_query_len)
    mask: np.ndarray   # (n, max_query_len) bool

    def __len__(self) -> int:
        return self.hist.shape[0]

    def take(self, rows) -> "PairFeatures":
        return PairFeatures(self.hist[rows], self.idf[rows], self.mask[rows])

    @classmethod
    def stack(cls, parts: Sequence["PairFeatures"]) -> "PairFeatures":
        return cls(np.concatenate([p.hist for p in parts]), np.concatenate([p.idf for p in parts]),
                   np.concatenate([p.mask for p in parts]))


@dataclass
class QueryInput:
    terms: list[str]
    units: np.ndarray
    idf: np.ndarray


class FeatureExtractor:
    """Builds (and caches) histogram features against a document collection.

    ``stats`` supplies idf values; it should be built with the same analyzer
    used here so query terms and collection terms agree.
    """

    def __init__(self, emb: EmbeddingTable, stats: InvertedIndex, config: DrmmConfig,
                 texts: Mapping[str, str] | None = None, analyzer: AnalyzerConfig = RERANK_ANALYZER):
        self.emb = emb
        self.stats = stats
        self.config = config
        self.texts = texts
        self.analyzer = analyzer
        self._doc_cache: dict[str, np.ndarray] = {}

    def query_input(self, query_terms: Sequence[str]) -> QueryInput:
        kept = [t for t in query_terms if t in self.emb][: self.config.max_query_len]
        units = _unit_rows(self.emb.lookup(kept)) if kept else np.zeros((0, self.emb.dim))
        idfs = np.array([bm25_idf(self.stats, t) for t in kept], dtype=np.float64)
        return QueryInput(kept, units, idfs)

    def doc_units(self, doc_terms: Sequence[str]) -> np.ndarray:
        vecs = self.emb.lookup(doc_terms[: self.config.doc_truncate])
        return _unit_rows(vecs[np.linalg.norm(vecs, axis=1) > 0]) if len(vecs) else vecs

    def cached_doc_units(self, docid: str) -> np.ndarray:
        hit = self._doc_cache.get(docid)
        if hit is None:
            if self.texts is None or docid not in self.texts:
                raise DrmmError(f"no text available for document {docid!r}")
            hit = self.doc_units(analyze(self.texts[docid], self.analyzer))
            self._doc_cache[docid] = hit
        return hit

    def _pad(self, q: QueryInput, hist: np.ndarray) -> PairFeatures:
        L, B = self.config.max_query_len, self.config.bins
        h = np.zeros((1, L, B))
        i = np.zeros((1, L))
        m = np.zeros((1, L), dtype=bool)
        n = len(q.terms)
        h[0, :n] = hist
        i[0, :n] = q.idf
        m[0, :n] = True
        return PairFeatures(h, i, m)

    def pair(self, q: QueryInput, doc_terms: Sequence[str]) -> PairFeatures:
        return self._pad(q, histograms(q.units, self.doc_units(doc_terms), self.config.bins))

    def pairs_for(self, q: QueryInput, docids: Sequence[str]) -> PairFeatures:
        parts = [self._pad(q, histograms(q.units, self.cached_doc_units(d), self.config.bins))
                 for d in docids]
        if not parts:
            L, B = self.config.max_query_len, self.config.bins
            return PairFeatures(np.zeros((0, L, B)), np.zeros((0, L)), np.zeros((0, L), dtype=bool))
        return PairFeatures.stack(parts)


# -- forward / backward ---------------------------------------------------------

@dataclass
class _Cache:
    acts: list[np.ndarray]
    term_scores: np.ndarray
    gates: np.ndarray


def _gates(gate_w: float, idf: np.ndarray, mask: np.ndarray) -> np.ndarray:
    logits = np.where(mask, gate_w * idf, -np.inf)
    top = np.max(logits, axis=1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    e = np.where(mask, np.exp(logits - top), 0.0)
    z = e.sum(axis=1, keepdims=True)
    return np.divide(e, z, out=np.zeros_like(e), where=z > 0)


def forward(model: DrmmModel, feats: PairFeatures, keep: bool = False):
    n, L, B = feats.hist.shape
    a = feats.hist.reshape(n * L, B)
    acts = [a]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        a = z if i == last else np.tanh(z)
        acts.append(a)
    term_scores = a.reshape(n, L)
    gates = _gates(model.gate, feats.idf, feats.mask)
    scores = np.sum(gates * term_scores, axis=1)
    if keep:
        return scores, _Cache(acts, term_scores, gates)
    return scores


def backward(model: DrmmModel, feats: PairFeatures, cache: _Cache, dscores: np.ndarray):
    """Gradients of sum(dscores * scores) w.r.t. weights, biases and gate."""
    n, L, _ = feats.hist.shape
    g, s = cache.gates, cache.term_scores
    d_term = dscores[:, None] * g
    d_gate_out = dscores[:, None] * s
    d_logits = g * (d_gate_out - np.sum(g * d_gate_out, axis=1, keepdims=True))
    d_gate_w = float(np.sum(np.where(feats.mask, d_logits * feats.idf, 0.0)))

    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    delta = d_term.reshape(n * L, 1)
    for i in range(len(model.weights) - 1, -1, -1):
        grad_w[i] = cache.acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (1.0 - cache.acts[i] ** 2)
    return grad_w, grad_b, d_gate_w


def hinge_loss(model: DrmmModel, pos: PairFeatures, neg: PairFeatures, grad: bool = False):
    """Mean of max(0, 1 - s(q, d+) + s(q, d-)) over the batch."""
    sp, cp = forward(model, pos, keep=True)
    sn, cn = forward(model, neg, keep=True)
    margins = 1.0 - sp + sn
    loss = float(np.mean(np.maximum(margins, 0.0)))
    if not grad:
        return loss
    active = (margins > 0).astype(np.float64) / len(margins)
    gw_p, gb_p, gg_p = backward(model, pos, cp, -active)
    gw_n, gb_n, gg_n = backward(model, neg, cn, active)
    return loss, ([a + b for a, b in zip(gw_p, gw_n)], [a + b for a, b in zip(gb_p, gb_n)], gg_p + gg_n)


def drmm_score(model: DrmmModel, query_terms: Sequence[str], doc_terms: Sequence[str],
               emb: EmbeddingTable, index: InvertedIndex) -> float:
    """Score one pair. Query is cut to ``max_query_len`` in-vocabulary terms,
    the document to its first ``doc_truncate`` tokens."""
    fx = FeatureExtractor(emb, index, model.config)
    q = fx.query_input(query_terms)
    if not q.terms:
        return 0.0
    return float(forward(model, fx.pair(q, doc_terms))[0])


def score_candidates(model: DrmmModel, fx: FeatureExtractor, query_terms: Sequence[str],
                     docids: Sequence[str]) -> dict[str, float]:
    q = fx.query_input(query_terms)
    if not q.terms:
        return {d: 0.0 for d in docids}
    scores = forward(model, fx.pairs_for(q, docids))
    return {d: float(s) for d, s in zip(docids, scores)}


# -- training -----------------------------------------------------------------------

@dataclass(frozen=True)
class TrainingPair:
    topic: str
    positive: str
    negative: str


def make_training_pairs(runs: Mapping[str, RankedList], qrels: Mapping[str, Mapping[str, int]],
                        topics: Iterable[str], cap: int = 1000, seed: int = 0) -> list[TrainingPair]:
    """All (relevant, judged non-relevant) pairs among each topic's baseline
    candidates, capped per topic by seeded sampling."""
    rng = np.random.default_rng(seed)
    pairs: list[TrainingPair] = []
    for topic in topics:
        judged = qrels.get(topic, {})
        cands = runs[topic].docids if topic in runs else []
        pos = [d for d in cands if judged.get(d, -1) >= 1]
        neg = [d for d in cands if judged.get(d, -1) == 0]
        combos = [(p, n) for p in pos for n in neg]
        if len(combos) > cap:
            keep = np.sort(rng.choice(len(combos), cap, replace=False))
            combos = [combos[i] for i in keep]
        pairs.extend(TrainingPair(topic, p, n) for p, n in combos)
    return pairs


@dataclass
class TrainingResult:
    model: DrmmModel
    best_epoch: int
    validation_ap: list[float] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)


def validation_ap(model: DrmmModel, feats: Mapping[str, tuple[list[str], PairFeatures]],
                  qrels: Mapping[str, Mapping[str, int]]) -> float:
    """Mean AP of reranking each validation topic's candidates by model score."""
    aps = []
    for topic, (docids, f) in feats.items():
        scores = forward(model, f) if len(f) else np.zeros(0)
        rl = RankedList.from_scores(topic, dict(zip(docids, scores.tolist())))
        aps.append(average_precision(rl, qrels))
    return math.fsum(aps) / len(aps) if aps else 0.0


def train_drmm(pairs: Sequence[TrainingPair],
               pair_features: Callable[[TrainingPair], tuple[PairFeatures, PairFeatures]],
               validation: Mapping[str, tuple[list[str], PairFeatures]],
               qrels: Mapping[str, Mapping[str, int]],
               config: DrmmConfig,
               train_topics: Iterable[str] | None = None,
               init: DrmmModel | None = None) -> TrainingResult:
    """Mini-batch gradient descent on the pairwise hinge loss.

    ``pair_features`` maps a pair to its positive/negative features;
    ``validation`` maps each validation topic to its candidate docids and
    their features. The snapshot with the best validation AP is returned;
    training stops after ``epochs_max`` epochs or ``patience`` epochs
    without improvement.
    """
    train_topics = sorted(set(train_topics)) if train_topics is not None else sorted({p.topic for p in pairs})
    overlap = set(train_topics) & set(validation)
    if overlap:
        raise DrmmError(f"validation topics overlap training topics: {sorted(overlap)[:5]}")
    if not pairs:
        covered = {t: 0 for t in train_topics}
        raise DrmmError(f"no training pairs for any of {len(covered)} training topics "
                        f"(need a relevant and a judged non-relevant candidate per topic)")
    validation = {t: v for t, v in validation.items() if num_relevant(qrels, t) > 0}

    pos_parts, neg_parts = zip(*(pair_features(p) for p in pairs))
    pos = PairFeatures.stack(pos_parts)
    neg = PairFeatures.stack(neg_parts)

    rng = np.random.default_rng(config.seed)
    model = init.copy() if init is not None else DrmmModel.init(config)
    lr = config.learning_rate
    best, best_ap, best_epoch = None, -math.inf, 0
    history, losses = [], []
    stale = 0
    for epoch in range(1, config.epochs_max + 1):
        order = rng.permutation(len(pos))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            rows = order[start:start + config.batch_size]
            loss, (gw, gb, gg) = hinge_loss(model, pos.take(rows), neg.take(rows), grad=True)
            epoch_loss += loss * len(rows)
            for w, g in zip(model.weights, gw):
                w -= lr * g
            for b, g in zip(model.biases, gb):
                b -= lr * g
            model.gate -= lr * gg
        losses.append(epoch_loss / len(order))
        ap = validation_ap(model, validation, qrels)
        history.append(ap)
        log.debug("epoch %d loss %.5f validation AP %.4f", epoch, losses[-1], ap)
        if ap > best_ap:
            best, best_ap, best_epoch, stale = model.copy(), ap, epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return TrainingResult(best, best_epoch, history, losses)


def with_learning_rate(config: DrmmConfig, lr: float) -> DrmmConfig:
    return replace(config, learning_rate=lr)
