"""Fold construction and cross-validated parameter selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .trec import sorted_topics

TWO_FOLD = "two_fold"
FIVE_FOLD = "five_fold"
TWO_FOLD_VALIDATION = 25


class FoldError(ValueError):
    pass


class CvTuneError(RuntimeError):
    def __init__(self, setting, cause):
        super().__init__(f"runner failed for setting {setting!r}: {cause}")
        self.setting = setting


@dataclass(frozen=True)
class Split:
    """One train/validation/test assignment. ``train`` excludes ``validation``."""

    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]


@dataclass(frozen=True)
class FoldSpec:
    mode: str
    seed: int
    folds: tuple[tuple[str, ...], ...]
    splits: tuple[Split, ...]

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "folds": [list(f) for f in self.folds],
            "splits": [
                {"train": list(s.train), "validation": list(s.validation), "test": list(s.test)}
                for s in self.splits
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FoldSpec":
        return cls(d["mode"], d["seed"], tuple(tuple(f) for f in d["folds"]),
                   tuple(Split(tuple(s["train"]), tuple(s["validation"]), tuple(s["test"]))
                         for s in d["splits"]))


def make_folds(topics: Sequence[str], mode: str = FIVE_FOLD, seed: int = 0) -> FoldSpec:
    """Partition topics into folds and derive the train/validation/test splits.

    two_fold: two random halves; each half is the test set once, and 25 topics
    drawn from the other half validate. five_fold: for test fold i, fold
    (i + 1) mod 5 validates and the remaining three train.
    """
    if len(topics) != len(set(topics)):
        raise FoldError("duplicate topic ids")
    topics = sorted_topics(topics)
    rng = np.random.default_rng(seed)
    shuffled = [topics[i] for i in rng.permutation(len(topics))]

    if mode == TWO_FOLD:
        if len(topics) < 2 * TWO_FOLD_VALIDATION:
            raise FoldError(f"two_fold needs at least {2 * TWO_FOLD_VALIDATION} topics, got {len(topics)}")
        half = math.ceil(len(shuffled) / 2)
        folds = (tuple(sorted_topics(shuffled[:half])), tuple(sorted_topics(shuffled[half:])))
        splits = []
        for i in range(2):
            pool = list(folds[1 - i])
            val = set(pool[j] for j in rng.choice(len(pool), TWO_FOLD_VALIDATION, replace=False))
            splits.append(Split(tuple(t for t in pool if t not in val),
                                tuple(sorted_topics(val)), folds[i]))
    elif mode == FIVE_FOLD:
        if len(topics) < 5:
            raise FoldError(f"five_fold needs at least 5 topics, got {len(topics)}")
        folds = tuple(tuple(sorted_topics(chunk.tolist())) for chunk in np.array_split(np.array(shuffled, dtype=object), 5))
        splits = []
        for i in range(5):
            v = (i + 1) % 5
            train = sorted_topics(t for j in range(5) if j not in (i, v) for t in folds[j])
            splits.append(Split(tuple(train), folds[v], folds[i]))
    else:
        raise FoldError(f"unknown fold mode {mode!r}")
    return FoldSpec(mode, seed, folds, tuple(splits))


@dataclass
class CvResult:
    per_topic: dict[str, float]
    chosen: list[Any]
    validation_scores: list[list[float]] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return math.fsum(self.per_topic.values()) / len(self.per_topic) if self.per_topic else 0.0


Runner = Callable[[Any, Split], Mapping[str, float]]


def cv_tune(folds: FoldSpec, grid: Sequence[Any], runner: Runner) -> CvResult:
    """Pick, per split, the grid setting with the best mean validation metric.

    ``runner(setting, split)`` returns a topic -> metric map covering at least
    the split's validation and test topics; the split argument lets runners
    use per-split trained models. Ties go to the earlier grid entry.
    """
    if not grid:
        raise ValueError("parameter grid is empty")
    per_topic: dict[str, float] = {}
    chosen = []
    val_scores = []
    for split in folds.splits:
        best = None
        best_idx = -1
        scores = []
        results = []
        for setting in grid:
            try:
                metrics = runner(setting, split)
                val = math.fsum(metrics[t] for t in split.validation) / len(split.validation)
            except Exception as exc:  # noqa: BLE001 -- surface the failing setting
                raise CvTuneError(setting, exc) from exc
            scores.append(val)
            results.append(metrics)
            if best is None or val > best:
                best, best_idx = val, len(scores) - 1
        chosen.append(grid[best_idx])
        val_scores.append(scores)
        winner = results[best_idx]
        for t in split.test:
            if t in per_topic:
                raise FoldError(f"topic {t} appears in more than one test fold")
            per_topic[t] = winner[t]
    return CvResult(per_topic, chosen, val_scores)
