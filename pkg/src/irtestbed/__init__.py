"""Retrieval evaluation testbed: BM25/RM3 baselines, DRMM reranking with
score interpolation, cross-validated tuning, significance tests and a
meta-analysis of published Robust04 results."""

__version__ = "0.1.0"
