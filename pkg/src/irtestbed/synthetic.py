"""Seeded planted-relevance collections for desk-scale experiments.

Each topic owns a few query terms and, per query term, a pool of synonyms
whose embeddings lie close to the term's embedding. Relevant documents and judged non-relevant "distractors"
carry similar exact query-term evidence, but relevant documents carry more
synonyms on average, plus topic "context" words that pseudo-relevance
feedback can pick up. Lexical matching
therefore sees only part of the relevance signal, while embedding similarity
sees the rest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .drmm import EmbeddingTable
from .index import Document
from .trec import write_qrels, write_topics


@dataclass(frozen=True)
class SyntheticConfig:
    n_topics: int = 50
    n_docs: int = 1000
    query_terms: int = 3
    synonyms_per_term: int = 25
    relevant_per_topic: int = 8
    distractors_per_topic: int = 10
    vocab_size: int = 3000
    doc_length: tuple[int, int] = (60, 140)
    dim: int = 32
    synonym_cosine: float = 0.8
    relevant_synonyms: float = 1.8
    distractor_synonyms: float = 0.7
    context_terms: int = 6
    pooled_negatives: int = 10
    zipf_exponent: float = 0.6
    seed: int = 0


@dataclass
class SyntheticCollection:
    config: SyntheticConfig
    docs: list[Document]
    topics: dict[str, str]
    qrels: dict[str, dict[str, int]]
    embeddings: EmbeddingTable

    @property
    def texts(self) -> dict[str, str]:
        return {d.docid: d.text for d in self.docs}

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "docs": out / "docs.jsonl",
            "topics": out / "topics.tsv",
            "qrels": out / "qrels.txt",
            "embeddings": out / "embeddings.txt",
        }
        paths["docs"].write_text(
            "".join(json.dumps({"id": d.docid, "contents": d.text}) + "\n" for d in self.docs), encoding="utf-8")
        write_topics(self.topics, paths["topics"])
        write_qrels(self.qrels, paths["qrels"])
        self.embeddings.save(paths["embeddings"])
        return paths


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def query_term(topic: int, j: int) -> str:
    return f"q{topic:03d}t{j}"


def synonym(topic: int, j: int, k: int) -> str:
    return f"s{topic:03d}t{j}v{k:02d}"


def context_term(topic: int, k: int) -> str:
    return f"c{topic:03d}k{k}"


def generate(config: SyntheticConfig = SyntheticConfig()) -> SyntheticCollection:
    c = config
    per_topic = c.relevant_per_topic + c.distractors_per_topic
    if c.n_topics * per_topic > c.n_docs:
        raise ValueError(f"{c.n_topics} topics x {per_topic} documents exceed n_docs={c.n_docs}")
    rng = np.random.default_rng(c.seed)

    background = [f"w{i:05d}" for i in range(c.vocab_size)]
    zipf = 1.0 / np.arange(1, c.vocab_size + 1) ** c.zipf_exponent
    zipf /= zipf.sum()

    vectors: dict[str, np.ndarray] = {}
    for w, v in zip(background, _unit(rng.normal(size=(c.vocab_size, c.dim)))):
        vectors[w] = v
    spread = np.sqrt(1.0 - c.synonym_cosine ** 2)
    for t in range(c.n_topics):
        for j in range(c.query_terms):
            base = _unit(rng.normal(size=c.dim))
            vectors[query_term(t, j)] = base
            noise = rng.normal(size=(c.synonyms_per_term, c.dim))
            noise -= np.outer(noise @ base, base)
            for k, n in enumerate(_unit(noise)):
                vectors[synonym(t, j, k)] = c.synonym_cosine * base + spread * n

    def filler() -> list[str]:
        n = int(rng.integers(c.doc_length[0], c.doc_length[1] + 1))
        return [background[i] for i in rng.choice(c.vocab_size, n, p=zipf)]

    def query_hits(p: float, extra: float) -> list[str]:
        while True:
            picked = [j for j in range(c.query_terms) if rng.random() < p]
            if picked:
                break
        return picked, [int(1 + rng.poisson(extra)) for _ in picked]

    def context(t: int, p: float) -> list[str]:
        out = []
        for k in range(c.context_terms):
            if rng.random() < p:
                out += [context_term(t, k)] * int(1 + rng.poisson(1.0))
        return out

    def synonyms(t: int, n: int) -> list[str]:
        return [synonym(t, int(rng.integers(c.query_terms)), int(rng.integers(c.synonyms_per_term)))
                for _ in range(n)]

    docs: list[Document] = []
    qrels: dict[str, dict[str, int]] = {}
    topics: dict[str, str] = {}
    serial = 0

    def emit(tokens: list[str]) -> str:
        nonlocal serial
        rng.shuffle(tokens)
        docid = f"D{serial:05d}"
        serial += 1
        docs.append(Document(docid, " ".join(tokens)))
        return docid

    for t in range(c.n_topics):
        qid = str(301 + t)
        topics[qid] = " ".join(query_term(t, j) for j in range(c.query_terms))
        judged: dict[str, int] = {}
        for _ in range(c.relevant_per_topic):
            tokens = filler()
            terms, tfs = query_hits(0.6, 0.5)
            for j, tf in zip(terms, tfs):
                tokens += [query_term(t, j)] * tf
            n_syn = int(rng.poisson(c.relevant_synonyms))
            tokens += synonyms(t, n_syn)
            tokens += context(t, 0.6)
            judged[emit(tokens)] = 2 if n_syn >= c.relevant_synonyms + 2 else 1
        for _ in range(c.distractors_per_topic):
            tokens = filler()
            terms, tfs = query_hits(0.5, 0.5)
            for j, tf in zip(terms, tfs):
                tokens += [query_term(t, j)] * tf
            tokens += synonyms(t, int(rng.poisson(c.distractor_synonyms)))
            tokens += context(t, 0.1)
            judged[emit(tokens)] = 0
        qrels[qid] = judged
    while serial < c.n_docs:
        emit(filler())
    # judging pools also hold off-topic documents
    all_ids = [d.docid for d in docs]
    for qid, judged in qrels.items():
        others = [all_ids[i] for i in rng.permutation(len(all_ids)) if all_ids[i] not in judged]
        for d in others[:c.pooled_negatives]:
            judged[d] = 0

    emb = EmbeddingTable({w: vectors[w] for w in sorted(vectors)}, c.dim)
    return SyntheticCollection(c, docs, topics, qrels, emb)


def config_dict(config: SyntheticConfig) -> dict:
    return asdict(config)
