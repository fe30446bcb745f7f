"""Figure rendering. Every figure is written as SVG with fixed metadata and
hash salt so identical inputs give byte-identical files."""

from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

from matplotlib.backends.backend_svg import FigureCanvasSVG  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from .meta import PaperRecord, ReferenceLines, TrendLine  # noqa: E402

NEURAL_COLOR = "tab:blue"
NON_NEURAL_COLOR = "tab:red"

_RC = {
    "svg.hashsalt": "irtestbed",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


@contextmanager
def _style():
    with matplotlib.rc_context(_RC):
        yield


def _save(fig: Figure, path: str | Path) -> None:
    FigureCanvasSVG(fig)
    fig.savefig(path, format="svg", metadata={"Date": None})


def _offsets(records: Sequence[PaperRecord]) -> list[float]:
    """Spread papers of the same year across [year - 0.35, year + 0.35]."""
    by_year: dict[int, list[int]] = {}
    for i, r in enumerate(records):
        by_year.setdefault(r.year, []).append(i)
    xs = [0.0] * len(records)
    for year, idx in by_year.items():
        idx.sort(key=lambda i: (records[i].neural, records[i].best_ap, records[i].paper_id))
        k = len(idx)
        for j, i in enumerate(idx):
            xs[i] = year + (0.0 if k == 1 else -0.35 + 0.7 * j / (k - 1))
    return xs


def render_plot(records: Sequence[PaperRecord], refs: ReferenceLines, trends: Sequence[TrendLine],
                path: str | Path, title: str | None = None) -> None:
    """Baseline (open) and best (filled) AP per paper, joined by a segment.

    Artists carry SVG ids: ``baseline-NNNN``, ``best-NNNN``, ``segment-NNNN``,
    ``ref-*`` and ``trend-*``.
    """
    with _style():
        fig = Figure(figsize=(10, 4.5))
        ax = fig.add_subplot(1, 1, 1)
        xs = _offsets(records)
        for i, (r, x) in enumerate(zip(records, xs)):
            color = NEURAL_COLOR if r.neural else NON_NEURAL_COLOR
            if r.baseline_ap is not None:
                ax.plot([x, x], [r.baseline_ap, r.best_ap], color=color, lw=0.8, gid=f"segment-{i:04d}")
                ax.plot([x], [r.baseline_ap], ls="none", marker="o", ms=4, mfc="white", mec=color,
                        mew=0.9, gid=f"baseline-{i:04d}")
            ax.plot([x], [r.best_ap], ls="none", marker="o", ms=4, mfc=color, mec=color,
                    gid=f"best-{i:04d}")

        ax.axhline(refs.trec_best, color="black", ls="-", lw=1.0, gid="ref-trec-best")
        ax.axhline(refs.trec_median, color="black", ls=":", lw=1.0, gid="ref-trec-median")
        ax.axhline(refs.anserini_rm3, color="0.45", ls="--", lw=1.0, gid="ref-anserini-rm3")

        years = [r.year for r in records]
        for tl in trends:
            members = [r.year for r in records if r.neural is (tl.group == "neural")] or years
            if not members:
                continue
            lo, hi = min(members) - 0.4, max(members) + 0.4
            color = NEURAL_COLOR if tl.group == "neural" else NON_NEURAL_COLOR
            ax.plot([lo, hi], [tl.at(lo), tl.at(hi)], color=color, lw=1.4, alpha=0.8, gid=f"trend-{tl.group}")

        if years:
            ax.set_xlim(min(years) - 0.7, max(years) + 0.7)
            ax.set_xticks(sorted(set(years)))
        ax.set_ylim(0.15, 0.40)
        ax.set_xlabel("Year")
        ax.set_ylabel("AP")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_topic_deltas(a: Mapping[str, float], b: Mapping[str, float], path: str | Path,
                      metric: str = "AP", label_a: str = "A", label_b: str = "B") -> None:
    """Per-topic differences (B - A), sorted, as a bar chart."""
    topics = sorted(set(a) & set(b))
    deltas = sorted(((b[t] - a[t], t) for t in topics), key=lambda p: (p[0], p[1]))
    with _style():
        fig = Figure(figsize=(8, 3.2))
        ax = fig.add_subplot(1, 1, 1)
        vals = [d for d, _ in deltas]
        colors = ["tab:green" if d > 0 else ("tab:red" if d < 0 else "0.6") for d in vals]
        ax.bar(range(len(vals)), vals, color=colors, width=0.9, gid="topic-deltas")
        ax.axhline(0.0, color="black", lw=0.6)
        ax.set_xlim(-1, max(len(vals), 1))
        ax.set_xticks([])
        ax.set_xlabel(f"topics ({len(vals)}), sorted by difference")
        ax.set_ylabel(f"{metric}: {label_b} - {label_a}")
        fig.tight_layout()
        _save(fig, path)
