"""Bag-level prediction from per-sentence true-label distributions.

Each selector takes an array ``P`` of shape (n_sentences, K) whose rows are
softmax outputs; column 0 is no-relation. Ties go to the lowest sentence
index, then the lowest relation index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SelectorOutput:
    distribution: np.ndarray
    sentence: int | None  # chosen sentence; None when averaged
    relation: int | None  # chosen positive relation; None in the all-NA branch
    all_na: bool

    @property
    def prediction(self) -> int:
        return int(np.argmax(self.distribution))


def _check(P) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n, K) array of distributions, got shape {P.shape}")
    return P


def conditional_optimal_select(P) -> SelectorOutput:
    """Pick the single most telling sentence.

    If every sentence's argmax is no-relation, take the sentence most
    confident in no-relation; otherwise take the (sentence, relation) with
    the highest positive-relation probability. The bag gets that sentence's
    distribution unchanged.
    """
    P = _check(P)
    if (P.argmax(axis=1) == 0).all():
        j = int(P[:, 0].argmax())
        return SelectorOutput(P[j].copy(), j, None, True)
    flat = int(P[:, 1:].argmax())
    j, k = divmod(flat, P.shape[1] - 1)
    return SelectorOutput(P[j].copy(), j, k + 1, False)


def avg_weighted_select(P) -> SelectorOutput:
    """Like :func:`conditional_optimal_select`, but average the positive-predicted sentences."""
    P = _check(P)
    positive = P.argmax(axis=1) != 0
    if not positive.any():
        return conditional_optimal_select(P)
    dist = P[positive].mean(axis=0)
    return SelectorOutput(dist, None, int(dist[1:].argmax()) + 1, False)


SELECTORS = {
    "cond_opt": conditional_optimal_select,
    "avg_weighted": avg_weighted_select,
}


def multi_label_predict(P, threshold: float = 0.5) -> set[int]:
    """Positive relations whose best sentence probability reaches ``threshold``."""
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    P = _check(P)
    best = P[:, 1:].max(axis=0)
    return {int(k) + 1 for k in np.flatnonzero(best >= threshold)}
