"""Score interpolation with the baseline and the external score-file adapter."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Mapping

from .ranking import RankedList
from .trec import sorted_topics

log = logging.getLogger(__name__)


class RerankError(ValueError):
    pass


def minmax(scores: Mapping[str, float]) -> dict[str, float]:
    """Rescale to [0, 1]; a constant score set maps to all zeros."""
    if not scores:
        return {}
    lo, hi = min(scores.values()), max(scores.values())
    span = hi - lo
    if span == 0:
        return {d: 0.0 for d in scores}
    return {d: (s - lo) / span for d, s in scores.items()}


def interpolate(baseline: RankedList, nn_scores: Mapping[str, float], alpha: float,
                tag: str | None = None) -> RankedList:
    """Mix per-topic min-max normalized scores: alpha * nn + (1 - alpha) * baseline.

    At alpha = 0 and alpha = 1 the result is the corresponding input ranking
    with its raw scores; normalizing first could round two nearly equal scores
    onto one value and let the docid tie-break reorder them.
    """
    if not 0.0 <= alpha <= 1.0:
        raise RerankError(f"alpha must lie in [0, 1], got {alpha}")
    missing = [d for d in baseline.docids if d not in nn_scores]
    if missing:
        shown = ", ".join(missing[:10]) + (" ..." if len(missing) > 10 else "")
        raise RerankError(f"topic {baseline.topic}: {len(missing)} baseline documents lack reranker scores: {shown}")
    if alpha == 0.0:
        return RankedList(baseline.topic, list(baseline.entries), tag or baseline.tag)
    if alpha == 1.0:
        return RankedList.from_scores(baseline.topic, {d: float(nn_scores[d]) for d in baseline.docids},
                                      tag or baseline.tag)
    base = minmax(baseline.scores())
    nn = minmax({d: nn_scores[d] for d in baseline.docids})
    mixed = {d: alpha * nn[d] + (1.0 - alpha) * base[d] for d in baseline.docids}
    return RankedList.from_scores(baseline.topic, mixed, tag or baseline.tag)


def load_external_scores(path: str | Path) -> dict[str, dict[str, float]]:
    """Read ``qid docid score`` lines. Later duplicates override earlier ones."""
    out: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise RerankError(f"{path}:{lineno}: expected 'qid docid score', got {len(parts)} fields")
            qid, docid, raw = parts
            try:
                score = float(raw)
            except ValueError:
                raise RerankError(f"{path}:{lineno}: score {raw!r} is not a number") from None
            topic = out.setdefault(qid, {})
            if docid in topic:
                log.warning("%s:%d: duplicate score for (%s, %s); keeping the later one", path, lineno, qid, docid)
            topic[docid] = score
    return out


def write_scores(scores: Mapping[str, Mapping[str, float]], path: str | Path) -> None:
    lines = []
    for qid in sorted_topics(scores):
        for docid in sorted(scores[qid]):
            lines.append(f"{qid} {docid} {scores[qid][docid]!r}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")
