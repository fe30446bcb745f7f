"""Meta-analysis of published effectiveness results on a test collection."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Sequence

from .evaluation import t_two_tailed_p

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("id", "year", "venue", "neural", "baseline_ap", "best_ap")
SCHEMA_COLUMN = "schema"
SCHEMA_VERSION = "1"

_TRUE = {"true", "t", "yes", "y", "1"}
_FALSE = {"false", "f", "no", "n", "0"}


class RecordError(ValueError):
    pass


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    year: int
    venue: str
    neural: bool
    baseline_ap: float | None
    best_ap: float


@dataclass(frozen=True)
class ReferenceLines:
    trec_best: float = 0.333
    trec_median: float = 0.258
    anserini_rm3: float = 0.2903

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"reference line {name}={v} outside [0, 1]")


def _parse_ap(raw: str, column: str) -> float | None:
    raw = raw.strip()
    if not raw:
        return None
    v = float(raw)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{column}={v} outside [0, 1]")
    return v


def load_records(path: str | Path, year_range: tuple[int, int] = (1950, 2100),
                 strict: bool = True) -> list[PaperRecord]:
    """Read and validate the survey CSV.

    Invalid rows are collected with their line numbers; in strict mode any
    invalid row raises ``RecordError`` listing all of them, otherwise they
    are logged and skipped. Unknown columns are ignored; an optional
    ``schema`` column must carry version 1.
    """
    records: list[PaperRecord] = []
    problems: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, strict=True)
        try:
            header = reader.fieldnames
        except csv.Error as exc:
            raise RecordError(f"{path}:1: malformed CSV header ({exc})") from None
        if header is None:
            raise RecordError(f"{path}: missing header row")
        absent = [c for c in REQUIRED_COLUMNS if c not in header]
        if absent:
            raise RecordError(f"{path}:1: header lacks columns {absent}")
        try:
            for row in reader:
                lineno = reader.line_num
                try:
                    if None in row or any(row[c] is None for c in REQUIRED_COLUMNS):
                        raise ValueError("wrong number of fields")
                    if SCHEMA_COLUMN in row and row[SCHEMA_COLUMN].strip() not in ("", SCHEMA_VERSION):
                        raise ValueError(f"unsupported schema version {row[SCHEMA_COLUMN]!r}")
                    year = int(row["year"])
                    if not year_range[0] <= year <= year_range[1]:
                        raise ValueError(f"year {year} outside {year_range}")
                    flag = row["neural"].strip().lower()
                    if flag not in _TRUE | _FALSE:
                        raise ValueError(f"neural flag {row['neural']!r} is not a boolean")
                    best = _parse_ap(row["best_ap"], "best_ap")
                    if best is None:
                        raise ValueError("best_ap missing")
                    pid = row["id"].strip()
                    if not pid:
                        raise ValueError("empty id")
                    records.append(PaperRecord(pid, year, row["venue"].strip(), flag in _TRUE,
                                               _parse_ap(row["baseline_ap"], "baseline_ap"), best))
                except ValueError as exc:
                    problems.append(f"line {lineno}: {exc}")
        except csv.Error as exc:
            raise RecordError(f"{path}:{reader.line_num}: malformed CSV ({exc})") from None
    if problems:
        if strict:
            raise RecordError(f"{path}: {len(problems)} invalid rows; " + "; ".join(problems))
        for p in problems:
            log.warning("%s: skipped %s", path, p)
    return records


def _pct(count: int, total: int) -> float:
    return 100.0 * count / total if total else 0.0


def _group_stats(records: Sequence[PaperRecord], refs: ReferenceLines) -> dict:
    n = len(records)
    with_base = [r for r in records if r.baseline_ap is not None]
    counts = {
        "baseline_below_median": sum(1 for r in with_base if r.baseline_ap < refs.trec_median),
        "best_below_median": sum(1 for r in records if r.best_ap < refs.trec_median),
        "best_below_rm3": sum(1 for r in records if r.best_ap < refs.anserini_rm3),
        "best_above_trec_best": sum(1 for r in records if r.best_ap > refs.trec_best),
    }
    out = {"papers": n, "with_baseline": len(with_base)}
    for k, c in counts.items():
        out[k] = {"count": c, "percent": round(_pct(c, n), 4)}
    if records:
        top = max(records, key=lambda r: (r.best_ap, -r.year, r.paper_id))
        out["max_best_ap"] = {"ap": top.best_ap, "id": top.paper_id, "year": top.year}
    else:
        out["max_best_ap"] = None
    return out


def summary_stats(records: Sequence[PaperRecord], refs: ReferenceLines = ReferenceLines()) -> dict:
    """Counts relative to the reference lines, overall and for neural papers.

    "Below" and "above" are strict: a value on a line counts as neither.
    """
    if not records:
        raise RecordError("no records to summarize")
    return {
        "reference_lines": asdict(refs),
        "overall": _group_stats(records, refs),
        "neural": _group_stats([r for r in records if r.neural], refs),
        "non_neural": _group_stats([r for r in records if not r.neural], refs),
    }


def format_stats_table(stats: dict) -> str:
    rows = [("statistic", "overall", "neural", "non_neural")]
    labels = [
        ("papers", "papers"),
        ("baseline_below_median", "baseline < TREC median"),
        ("best_below_median", "best < TREC median"),
        ("best_below_rm3", "best < RM3 line"),
        ("best_above_trec_best", "best > TREC best"),
    ]
    for key, label in labels:
        row = [label]
        for group in ("overall", "neural", "non_neural"):
            v = stats[group][key]
            row.append(str(v) if isinstance(v, int) else f"{v['count']} ({v['percent']:.1f}%)")
        rows.append(tuple(row))
    row = ["max best AP"]
    for group in ("overall", "neural", "non_neural"):
        m = stats[group]["max_best_ap"]
        row.append("-" if m is None else f"{m['ap']:.4f} ({m['id']})")
    rows.append(tuple(row))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))).rstrip()
             for r in rows]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TrendLine:
    group: str
    slope: float
    intercept: float
    n: int
    slope_se: float | None = None
    p_upward: float | None = None

    def at(self, year: float) -> float:
        return self.intercept + self.slope * year


def fit_trend(records: Iterable[PaperRecord], group: str = "all", y: str = "best_ap") -> TrendLine:
    """Ordinary least squares of AP on publication year.

    Also reports the slope's standard error and the one-sided p-value for a
    positive slope (needs at least three points).
    """
    if y not in ("best_ap", "baseline_ap"):
        raise ValueError(f"cannot fit trend on {y!r}")
    pts = [(float(r.year), getattr(r, y)) for r in records if getattr(r, y) is not None]
    if len({x for x, _ in pts}) < 2:
        raise RecordError(f"trend for group {group!r} needs points from at least two distinct years")
    n = len(pts)
    mx = math.fsum(x for x, _ in pts) / n
    my = math.fsum(v for _, v in pts) / n
    sxx = math.fsum((x - mx) ** 2 for x, _ in pts)
    sxy = math.fsum((x - mx) * (v - my) for x, v in pts)
    slope = sxy / sxx
    intercept = my - slope * mx
    se = p_up = None
    if n > 2:
        rss = math.fsum((v - intercept - slope * x) ** 2 for x, v in pts)
        se = math.sqrt(rss / (n - 2) / sxx)
        if se > 0:
            t = slope / se
            two = t_two_tailed_p(t, n - 2)
            p_up = two / 2 if t > 0 else 1 - two / 2
        else:
            p_up = 0.0 if slope > 0 else 1.0
    return TrendLine(group, slope, intercept, n, se, p_up)


def group_trends(records: Sequence[PaperRecord], y: str = "best_ap") -> list[TrendLine]:
    """Trendlines for the neural and non-neural groups, skipping any group too small to fit."""
    out = []
    for name, flag in (("neural", True), ("non_neural", False)):
        members = [r for r in records if r.neural is flag]
        try:
            out.append(fit_trend(members, name, y))
        except RecordError:
            log.info("no %s trendline: fewer than two distinct years", name)
    return out
