"""Readers and writers for TREC run, qrels and topic files."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping

from .ranking import RankedList

Run = dict[str, RankedList]
Qrels = dict[str, dict[str, int]]


class FormatError(ValueError):
    pass


def _topic_key(topic: str):
    return (0, int(topic), topic) if topic.isdigit() else (1, 0, topic)


def sorted_topics(topics: Iterable[str]) -> list[str]:
    """Numeric topic ids in numeric order, then anything else lexically."""
    return sorted(topics, key=_topic_key)


def format_run(run: Mapping[str, RankedList], tag: str | None = None) -> str:
    lines = []
    for topic in sorted_topics(run):
        rl = run[topic]
        for rank, (docid, score) in enumerate(rl.entries, 1):
            lines.append(f"{topic} Q0 {docid} {rank} {score:.6f} {tag or rl.tag}")
    return "".join(line + "\n" for line in lines)


def write_run(run: Mapping[str, RankedList], path: str | Path, tag: str | None = None) -> None:
    Path(path).write_text(format_run(run, tag), encoding="utf-8")


def read_run(path: str | Path) -> Run:
    """Read a 6-column run file. Entries are ordered by the rank column."""
    rows: dict[str, list[tuple[int, str, float]]] = {}
    tags: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise FormatError(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
            qid, _, docid, rank, score, tag = parts
            try:
                rows.setdefault(qid, []).append((int(rank), docid, float(score)))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad rank or score") from None
            tags.setdefault(qid, tag)
    run: Run = {}
    for qid, items in rows.items():
        items.sort(key=lambda r: r[0])
        # printed scores are rounded; re-sort only to restore the tie rule
        entries = sorted(((d, s) for _, d, s in items), key=lambda e: (-e[1], e[0]))
        run[qid] = RankedList(qid, entries, tags[qid])
    return run


def read_qrels(path: str | Path) -> Qrels:
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 'qid 0 docid grade'")
            qid, _, docid, grade = parts
            try:
                g = int(grade)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: grade {grade!r} is not an integer") from None
            if g < 0:
                g = 0
            qrels.setdefault(qid, {})[docid] = g
    return qrels


def write_qrels(qrels: Mapping[str, Mapping[str, int]], path: str | Path) -> None:
    lines = []
    for qid in sorted_topics(qrels):
        for docid in sorted(qrels[qid]):
            lines.append(f"{qid} 0 {docid} {qrels[qid][docid]}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_topics(path: str | Path) -> dict[str, str]:
    """Tab-separated ``qid<TAB>title`` lines."""
    topics: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'qid<TAB>title'")
            qid, title = line.split("\t", 1)
            topics[qid.strip()] = title.strip()
    return topics


def write_topics(topics: Mapping[str, str], path: str | Path) -> None:
    Path(path).write_text("".join(f"{q}\t{topics[q]}\n" for q in sorted_topics(topics)), encoding="utf-8")
