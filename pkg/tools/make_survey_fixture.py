"""Regenerate the bundled synthetic survey CSV.

The records are invented; only their aggregate counts are pinned (per-band
quotas below), so the summary statistics of the bundled file are known in
advance and can be checked exactly.
"""

import csv
import sys
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "irtestbed" / "data" / "robust04_survey_synthetic.csv"

MEDIAN, RM3, TREC_BEST = 0.258, 0.2903, 0.333

# best-AP bands: (lo, hi, neural count, non-neural count)
BANDS = [
    (0.200, MEDIAN, 4, 21),
    (MEDIAN, RM3, 8, 32),
    (RM3, 0.3033, 4, 17),
    (0.3033, 0.3152, 1, 11),
    (0.3152, TREC_BEST, 1, 4),
    (TREC_BEST, 0.3600, 0, 6),
]
YEARS = {2005: 3, 2006: 3, 2007: 4, 2008: 6, 2009: 12, 2010: 9, 2011: 8, 2012: 6,
         2013: 6, 2014: 6, 2015: 6, 2016: 18, 2017: 9, 2018: 12, 2019: 1}
NEURAL_YEARS = {2014: 1, 2015: 1, 2016: 5, 2017: 4, 2018: 6, 2019: 1}
VENUES = ["SIGIR", "CIKM", "ECIR", "ICTIR", "WSDM", "TOIS", "IRJ", "IPM"]


def main(out=OUT):
    rng = np.random.default_rng(2019)
    margin = 0.0005

    def draw(lo, hi, n):
        return [round(float(v), 4) for v in rng.uniform(lo + margin, hi - margin, n)]

    best = {True: [], False: []}
    for lo, hi, nn, other in BANDS:
        best[True] += draw(lo, hi, nn)
        best[False] += draw(lo, hi, other)
    # fixed points: the neural maximum and the overall maximum
    best[True][best[True].index(max(best[True]))] = 0.3278
    best[False][best[False].index(max(best[False]))] = 0.3686

    def baselines(values, extra_low):
        out = []
        above = [i for i, v in enumerate(values) if v >= MEDIAN]
        low = set(rng.choice(above, extra_low, replace=False).tolist())
        for i, v in enumerate(values):
            if v < MEDIAN or i in low:
                out.append(round(float(rng.uniform(0.19, min(v, MEDIAN) - margin)), 4))
            else:
                out.append(round(float(rng.uniform(MEDIAN + margin, v)), 4))
        return out

    base = {True: baselines(best[True], 4), False: baselines(best[False], 7)}

    def years_for(counts, values, pinned):
        slots = [y for y, c in sorted(counts.items()) for _ in range(c)]
        order = rng.permutation(len(values)).tolist()
        # pinned value -> pinned year
        years = [None] * len(values)
        for v, y in pinned:
            i = values.index(v)
            years[i] = y
            slots.remove(y)
            order.remove(i)
        for i, y in zip(order, slots):
            years[i] = y
        return years

    non_counts = {y: YEARS[y] - NEURAL_YEARS.get(y, 0) for y in YEARS}
    year = {True: years_for(NEURAL_YEARS, best[True], [(0.3278, 2019)]),
            False: years_for(non_counts, best[False], [(0.3686, 2009)])}

    rows = []
    for flag in (False, True):
        for b, bl, y in zip(best[flag], base[flag], year[flag]):
            rows.append((y, flag, bl, b))
    rows.sort(key=lambda r: (r[0], r[1], r[3]))
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "year", "venue", "neural", "baseline_ap", "best_ap"])
        for i, (y, flag, bl, b) in enumerate(rows, 1):
            w.writerow([f"p{i:03d}", y, VENUES[int(rng.integers(len(VENUES)))],
                        "true" if flag else "false", f"{bl:.4f}", f"{b:.4f}"])


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else OUT)
