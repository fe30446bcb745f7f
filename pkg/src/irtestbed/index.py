"""Document ingestion and an immutable in-memory inverted index."""

from __future__ import annotations

import json
import re
import zlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .analysis import AnalyzerConfig, analyze

INDEX_MAGIC = b"IRTBIDX\x00"
INDEX_VERSION = 1


class CorpusError(ValueError):
    """Raised for malformed document streams or index files."""


@dataclass(frozen=True)
class Document:
    docid: str
    text: str

    def __post_init__(self):
        if not self.docid:
            raise CorpusError("document with empty docid")


class InvertedIndex:
    """Term -> postings map plus the collection statistics BM25 and RM3 need.

    Documents are assigned ordinals in ascending docid order, so the index is
    independent of the order documents were supplied in, and ordinal order
    doubles as the docid tie-break order.
    """

    def __init__(self, docids: list[str], doc_lengths: np.ndarray,
                 postings: dict[str, tuple[np.ndarray, np.ndarray]],
                 analyzer: AnalyzerConfig):
        self.docids = tuple(docids)
        self.doc_lengths = np.asarray(doc_lengths, dtype=np.int64)
        self.doc_lengths.setflags(write=False)
        self._postings = postings
        for ords, tfs in postings.values():
            ords.setflags(write=False)
            tfs.setflags(write=False)
        self.analyzer = analyzer
        self._ordinal = {d: i for i, d in enumerate(self.docids)}
        self.doc_count = len(self.docids)
        self.avg_doc_length = float(self.doc_lengths.sum() / self.doc_count) if self.doc_count else 0.0
        self._doc_terms: list[dict[str, int]] | None = None

    def __len__(self) -> int:
        return self.doc_count

    def __contains__(self, term: str) -> bool:
        return term in self._postings

    @property
    def vocabulary(self) -> list[str]:
        return sorted(self._postings)

    def postings(self, term: str) -> tuple[np.ndarray, np.ndarray]:
        """(doc ordinals, term frequencies) for ``term``; empty arrays if unseen."""
        hit = self._postings.get(term)
        if hit is None:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        return hit

    def df(self, term: str) -> int:
        hit = self._postings.get(term)
        return 0 if hit is None else len(hit[0])

    def ordinal(self, docid: str) -> int:
        return self._ordinal[docid]

    def doc_length(self, docid: str) -> int:
        return int(self.doc_lengths[self._ordinal[docid]])

    def doc_term_freqs(self, docid: str) -> dict[str, int]:
        """Forward view of one document, reconstructed lazily from postings."""
        if self._doc_terms is None:
            fwd: list[dict[str, int]] = [{} for _ in range(self.doc_count)]
            for term in sorted(self._postings):
                ords, tfs = self._postings[term]
                for o, tf in zip(ords.tolist(), tfs.tolist()):
                    fwd[o][term] = tf
            self._doc_terms = fwd
        return self._doc_terms[self._ordinal[docid]]

    def analyze(self, text: str) -> list[str]:
        return analyze(text, self.analyzer)

    # -- persistence ---------------------------------------------------------

    def to_bytes(self) -> bytes:
        payload = {
            "version": INDEX_VERSION,
            "analyzer": self.analyzer.describe(),
            "docids": list(self.docids),
            "doc_lengths": self.doc_lengths.tolist(),
            "postings": {t: [o.tolist(), f.tolist()] for t, (o, f) in sorted(self._postings.items())},
        }
        body = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return INDEX_MAGIC + INDEX_VERSION.to_bytes(4, "little") + zlib.compress(body, 6)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "InvertedIndex":
        if not blob.startswith(INDEX_MAGIC):
            raise CorpusError("not an index file (bad magic header)")
        version = int.from_bytes(blob[len(INDEX_MAGIC):len(INDEX_MAGIC) + 4], "little")
        if version != INDEX_VERSION:
            raise CorpusError(f"unsupported index version {version}")
        payload = json.loads(zlib.decompress(blob[len(INDEX_MAGIC) + 4:]))
        postings = {
            t: (np.asarray(o, dtype=np.int64), np.asarray(f, dtype=np.int64))
            for t, (o, f) in payload["postings"].items()
        }
        return cls(payload["docids"], np.asarray(payload["doc_lengths"], dtype=np.int64),
                   postings, AnalyzerConfig.from_description(payload["analyzer"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        return cls.from_bytes(Path(path).read_bytes())


def build_index(docs: Iterable[Document], config: AnalyzerConfig = AnalyzerConfig()) -> InvertedIndex:
    """Analyze every document and build an :class:`InvertedIndex`.

    Raises ``CorpusError`` naming the first duplicate docid encountered.
    """
    counts: dict[str, Counter] = {}
    for doc in docs:
        if doc.docid in counts:
            raise CorpusError(f"duplicate docid {doc.docid!r}")
        counts[doc.docid] = Counter(analyze(doc.text, config))

    docids = sorted(counts)
    lengths = np.array([sum(counts[d].values()) for d in docids], dtype=np.int64)
    acc: dict[str, tuple[list[int], list[int]]] = {}
    for ordinal, docid in enumerate(docids):
        for term, tf in counts[docid].items():
            ords, tfs = acc.setdefault(term, ([], []))
            ords.append(ordinal)
            tfs.append(tf)
    postings = {
        t: (np.asarray(o, dtype=np.int64), np.asarray(f, dtype=np.int64)) for t, (o, f) in acc.items()
    }
    return InvertedIndex(docids, lengths, postings, config)


# -- document readers ---------------------------------------------------------

_DOC_RE = re.compile(r"<DOC>(.*?)</DOC>", re.S | re.I)
_DOCNO_RE = re.compile(r"<DOCNO>\s*(.*?)\s*</DOCNO>", re.S | re.I)
_TAG_RE = re.compile(r"<[^>]+>")


def read_jsonl(path: str | Path) -> Iterator[Document]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                yield Document(str(obj["id"]), obj.get("contents", "") or "")
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: malformed document line ({exc})") from None


def read_trec(path: str | Path) -> Iterator[Document]:
    """Parse a TREC-style SGML container; markup inside the body is dropped."""
    text = Path(path).read_text("utf-8", errors="replace")
    for block in _DOC_RE.findall(text):
        m = _DOCNO_RE.search(block)
        if m is None:
            raise CorpusError(f"{path}: <DOC> without <DOCNO>")
        body = _DOCNO_RE.sub(" ", block)
        yield Document(m.group(1), _TAG_RE.sub(" ", body))


def read_documents(path: str | Path) -> Iterator[Document]:
    p = str(path)
    if p.endswith((".jsonl", ".json")):
        return read_jsonl(path)
    return read_trec(path)


def load_texts(path: str | Path) -> dict[str, str]:
    return {d.docid: d.text for d in read_documents(path)}
