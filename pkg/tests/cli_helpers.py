"""Run every CLI command on a small synthetic collection."""

import hashlib
import json
from pathlib import Path

from irtestbed.cli import main


def sha(p: Path) -> str:
    return hashlib.sha256(p.read_bytes()).hexdigest()


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def run_all_commands(work: Path, survey: Path) -> Path:
    """Synthesize a collection and run every command; returns the output directory."""
    col = work / "col"
    out = work / "out"
    out.mkdir(parents=True, exist_ok=True)
    fast = ["--lr", "0.3", "--epochs", "2", "--seed", "5"]
    assert run_cli("synth", "--out-dir", col, "--topics", "10", "--docs", "300", "--seed", "3") == 0
    assert run_cli("index", "--docs", col / "docs.jsonl", "--output", out / "index.bin") == 0
    assert run_cli("search", "--index", out / "index.bin", "--topics", col / "topics.tsv",
                   "--output", out / "bm25.run") == 0
    assert run_cli("search", "--index", out / "index.bin", "--topics", col / "topics.tsv",
                   "--output", out / "rm3.run", "--rm3") == 0
    assert run_cli("train", "--run", out / "rm3.run", "--qrels", col / "qrels.txt", "--topics", col / "topics.tsv",
                   "--docs", col / "docs.jsonl", "--embeddings", col / "embeddings.txt",
                   "--output", out / "model.json", *fast) == 0
    assert run_cli("rerank", "--run", out / "rm3.run", "--output", out / "rr.run", "--alpha", "0.5",
                   "--model", out / "model.json", "--docs", col / "docs.jsonl", "--topics", col / "topics.tsv",
                   "--embeddings", col / "embeddings.txt") == 0
    assert run_cli("eval", "--qrels", col / "qrels.txt", "--run", out / "rm3.run", "--compare", out / "rr.run",
                   "--output", out / "eval.json", "--plot", out / "eval.svg") == 0
    assert run_cli("cv", "--docs", col / "docs.jsonl", "--topics", col / "topics.tsv", "--qrels", col / "qrels.txt",
                   "--embeddings", col / "embeddings.txt", "--output", out / "cv.json",
                   "--index", out / "index.bin", "--plot", out / "cv.svg", "--alpha-grid", "0", "0.5", "1",
                   *fast) == 0
    assert run_cli("meta", "--records", survey, "--out-dir", out / "meta") == 0
    return work


def artifact_digests(work: Path) -> dict[str, str]:
    """Digest of every artifact; manifests are compared without their timestamp."""
    out = {}
    for p in sorted(work.rglob("*")):
        if not p.is_file():
            continue
        rel = str(p.relative_to(work))
        if p.name.endswith(".manifest.json"):
            m = json.loads(p.read_text())
            m.pop("timestamp")
            out[rel] = hashlib.sha256(json.dumps(m, sort_keys=True).encode()).hexdigest()
        else:
            out[rel] = sha(p)
    return out
