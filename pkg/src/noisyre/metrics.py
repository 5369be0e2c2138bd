"""Held-out evaluation against gold (head, tail, relation) triples."""

from __future__ import annotations

import csv
import json
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .data import NA, Bag


@dataclass(frozen=True, order=True)
class PredictionRecord:
    head_id: str
    tail_id: str
    relation: str
    score: float

    def __post_init__(self):
        if self.relation == NA:
            raise ValueError("prediction records never carry the NA relation")
        if not np.isfinite(self.score):
            raise ValueError(f"non-finite score {self.score}")

    @property
    def triple(self) -> tuple[str, str, str]:
        return (self.head_id, self.tail_id, self.relation)


def rank_predictions(bags: Sequence[Bag], distributions, labels: Sequence[str]) -> list[PredictionRecord]:
    """One record per (bag, positive relation), best score first.

    Equal scores are ordered by (head, tail, relation).
    """
    if len(bags) != len(distributions):
        raise ValueError(f"{len(bags)} bags but {len(distributions)} distributions")
    records = []
    for bag, dist in zip(bags, distributions):
        dist = np.asarray(dist, dtype=np.float64)
        if dist.shape != (len(labels),):
            raise ValueError(f"distribution of shape {dist.shape} for {len(labels)} labels")
        for k in range(1, len(labels)):
            records.append(PredictionRecord(bag.head_id, bag.tail_id, labels[k], float(dist[k])))
    records.sort(key=lambda r: (-r.score, r.head_id, r.tail_id, r.relation))
    return records


def _hits(ranking, gold) -> np.ndarray:
    return np.fromiter((r.triple in gold for r in ranking), dtype=bool, count=len(ranking))


def pr_curve(ranking: Sequence[PredictionRecord], gold) -> list[tuple[float, float, float]]:
    """Rows ``(recall, precision, score)`` for every prefix of the ranking."""
    if not gold:
        raise ValueError("gold set is empty")
    hits = np.cumsum(_hits(ranking, gold))
    t = np.arange(1, len(ranking) + 1)
    return [(float(h / len(gold)), float(h / k), r.score) for h, k, r in zip(hits, t, ranking)]


def precision_at_n(ranking: Sequence[PredictionRecord], gold, n: int) -> float:
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")
    if not ranking:
        raise ValueError("ranking is empty")
    top = ranking[:n]
    return float(_hits(top, gold).sum() / len(top))


def average_precision(ranking: Sequence[PredictionRecord], gold) -> float:
    """Mean of precision at each hit rank, normalized by the gold size."""
    if not gold:
        raise ValueError("gold set is empty")
    total, hits = 0.0, 0
    for t, record in enumerate(ranking, 1):
        if record.triple in gold:
            hits += 1
            total += hits / t
    return total / len(gold)


def summary(ranking, gold, ns=(100, 200, 300)) -> dict:
    return {
        "p_at": {str(n): precision_at_n(ranking, gold, n) for n in ns} if ranking else {},
        "average_precision": average_precision(ranking, gold),
    }


def write_pr_csv(curve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["recall", "precision", "score"])
        for recall, precision, score in curve:
            writer.writerow([repr(recall), repr(precision), repr(score)])


def write_summary(metrics: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
