"""Text analysis: tokenization, case folding, stopword removal, stemming."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import snowballstemmer

STOPWORDS_RESOURCE = "stopwords_en_v1.txt"

_TOKEN_RE = re.compile(r"[^\W_]+")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stopword file (one token per line, UTF-8).

    With no path, the bundled English list is returned.
    """
    if path is None:
        text = resources.files("irtestbed.data").joinpath(STOPWORDS_RESOURCE).read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


DEFAULT_STOPWORDS = load_stopwords()


@lru_cache(maxsize=None)
def _porter():
    return snowballstemmer.stemmer("porter")


@lru_cache(maxsize=1 << 18)
def porter_stem(word: str) -> str:
    return _porter().stemWord(word)


@dataclass(frozen=True)
class AnalyzerConfig:
    lowercase: bool = True
    stopwords: frozenset[str] = field(default=DEFAULT_STOPWORDS)
    stemmer: str = "porter"

    def __post_init__(self):
        if self.stemmer not in ("porter", "none"):
            raise ValueError(f"unknown stemmer {self.stemmer!r}; expected 'porter' or 'none'")
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))

    def describe(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "stopwords": sorted(self.stopwords),
            "stemmer": self.stemmer,
        }

    @classmethod
    def from_description(cls, d: dict) -> "AnalyzerConfig":
        return cls(lowercase=d["lowercase"], stopwords=frozenset(d["stopwords"]), stemmer=d["stemmer"])


# Used by the reranker: embeddings are keyed by surface forms, so no stemming.
RERANK_ANALYZER = AnalyzerConfig(stemmer="none")


def analyze(text: str, config: AnalyzerConfig = AnalyzerConfig()) -> list[str]:
    """Split on non-alphanumerics, lowercase, drop stopwords, then stem.

    >>> analyze("The Quick FOXES ran")
    ['quick', 'fox', 'ran']
    """
    tokens = _TOKEN_RE.findall(text)
    if config.lowercase:
        tokens = [t.lower() for t in tokens]
    stop = config.stopwords
    if stop:
        tokens = [t for t in tokens if t not in stop]
    if config.stemmer == "porter":
        # a few one-letter tokens ("s") stem to the empty string
        tokens = [s for s in map(porter_stem, tokens) if s]
    return tokens
