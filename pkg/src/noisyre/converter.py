"""Structured logit-space noise converter.

The transition matrix has K free entries, its first column; every other
diagonal entry is 1 and everything else is 0. Applied to true logits ``h``
it gives noisy logits ``w_k * h_1 + h_k * [k != 1]`` (1-based), so only the
no-relation logit leaks into the others. In code the no-relation label is
index 0.
"""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad


def _lse(x: np.ndarray, axis: int = -1) -> np.ndarray:
    top = x.max(axis=axis, keepdims=True)
    return (np.log(np.exp(x - top).sum(axis=axis, keepdims=True)) + top).squeeze(axis)


def softmax(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class StructuredTransition:
    first_column: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        self.first_column = np.array(self.first_column, dtype=np.float64)
        if self.first_column.ndim != 1 or self.first_column.size < 2:
            raise ValueError(f"first_column must be a vector of K >= 2 entries, got shape {self.first_column.shape}")

    @property
    def K(self) -> int:
        return self.first_column.size

    def dense(self) -> np.ndarray:
        m = np.eye(self.K)
        m[:, 0] = self.first_column
        return m

    @classmethod
    def identity(cls, K: int) -> "StructuredTransition":
        return cls(identity_column(K), trainable=False)


@dataclass
class ProbabilityTransition:
    """Column-stochastic ``Q`` with ``Q[u, v] = p(noisy = u | true = v)``."""

    Q: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.Q = np.array(self.Q, dtype=np.float64)
        if self.Q.ndim != 2 or self.Q.shape[0] != self.Q.shape[1]:
            raise ValueError(f"Q must be square, got shape {self.Q.shape}")
        if (self.Q < 0).any() or not np.allclose(self.Q.sum(axis=0), 1.0, atol=1e-12, rtol=0):
            raise ValueError("every column of Q must be a probability distribution")


def identity_column(K: int) -> np.ndarray:
    col = np.zeros(K)
    col[0] = 1.0
    return col


def init_column(e: float, K: int) -> np.ndarray:
    """First column ``[1-e, e/(K-1), ..., e/(K-1)]``, which sums to 1."""
    if not 0 < e < 1:
        raise ValueError(f"init ratio e must be in (0, 1), got {e}")
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    col = np.full(K, e / (K - 1))
    col[0] = 1.0 - e
    return col


def _column(W) -> np.ndarray:
    return W.first_column if isinstance(W, StructuredTransition) else np.asarray(W, dtype=np.float64)


def _check(col: np.ndarray, h: np.ndarray) -> None:
    if h.shape[-1] != col.size:
        raise ValueError(f"logits have K={h.shape[-1]} but the transition has K={col.size}")


def apply(W, h) -> np.ndarray:
    """Noisy logits for true logits ``h`` of shape (K,) or (N, K)."""
    col = _column(W)
    h = np.asarray(h, dtype=np.float64)
    _check(col, h)
    out = h[..., :1] * col
    out[..., 1:] += h[..., 1:]
    return out


def noisy_distribution(W, h) -> np.ndarray:
    return softmax(apply(W, h))


def _per_sentence(bags, W):
    col = _column(W)
    for logits, target in bags:
        logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
        if logits.shape[0] == 0:
            raise ValueError("empty bag")
        _check(col, logits)
        if not 0 <= target < col.size:
            raise ValueError(f"bag label index {target} outside [0, {col.size})")
        yield apply(col, logits), int(target)


def bag_loss(bags: Sequence[tuple[np.ndarray, int]], W) -> float:
    """Bag-averaged negative log-likelihood of the observed labels.

    ``bags`` holds ``(logits, label)`` pairs, ``logits`` of shape (n_g, K)
    and ``label`` the bag's 0-based observed relation index.
    """
    total, count = 0.0, 0
    for noisy, target in _per_sentence(bags, W):
        total += float(np.mean(_lse(noisy) - noisy[:, target]))
        count += 1
    if count == 0:
        raise ValueError("no bags")
    return total / count


def loss_lower_bound(bags: Sequence[tuple[np.ndarray, int]], W) -> float:
    """Same averaging as :func:`bag_loss` with log-sum-exp replaced by max."""
    total, count = 0.0, 0
    for noisy, target in _per_sentence(bags, W):
        total += float(np.mean(noisy.max(axis=1) - noisy[:, target]))
        count += 1
    if count == 0:
        raise ValueError("no bags")
    return total / count


def invert_for_column(h, target, min_abs_h1: float = 1e-6) -> np.ndarray:
    """First column whose noisy distribution of ``h`` equals ``target``.

    Adding the same constant to every entry leaves the softmax unchanged, so
    the solution is pinned by requiring the column to sum to 1.
    """
    h = np.asarray(h, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if h.shape != target.shape or h.ndim != 1:
        raise ValueError(f"h and target must be matching vectors, got {h.shape} and {target.shape}")
    if abs(h[0]) < min_abs_h1:
        raise ValueError(f"|h_1| = {abs(h[0]):.3g} is below {min_abs_h1}: the column is not identifiable")
    if (target <= 0).any():
        raise ValueError("target distribution must be strictly positive")
    rest = h.copy()
    rest[0] = 0.0
    raw = (np.log(target) - rest) / h[0]
    # shift c/h_1 so the entries sum to 1
    return raw + (1.0 - raw.sum()) / raw.size


def bridge_column(h, Q: ProbabilityTransition | np.ndarray) -> np.ndarray:
    """Column reproducing ``Q @ softmax(h)`` through the logit transition."""
    if not isinstance(Q, ProbabilityTransition):
        Q = ProbabilityTransition(Q)
    return invert_for_column(h, Q.Q @ softmax(h))


def log_space_transform(W, true_probs, log_z_true: float) -> np.ndarray:
    """Noisy log-probabilities from true probabilities and their log normalizer.

    Rebuilds the true logits as ``log p + log Z``, maps them with the dense
    transition, then subtracts the noisy log normalizer.
    """
    p = np.asarray(true_probs, dtype=np.float64)
    if (p <= 0).any():
        raise ValueError("true distribution has zero entries; its log is undefined")
    dense = StructuredTransition(_column(W)).dense()
    _check(_column(W), p)
    noisy_logits = dense @ (np.log(p) + log_z_true)
    return noisy_logits - _lse(noisy_logits)


def export_column_csv(W, labels: Sequence[str], path) -> None:
    col = _column(W)
    if len(labels) != col.size:
        raise ValueError(f"{len(labels)} labels for a column of {col.size}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for lab, w in zip(labels, col):
            writer.writerow([lab, repr(float(w))])


def noisy_log_likelihood(h: ad.Tensor, column: ad.Tensor, targets) -> ad.Tensor:
    """Graph node: per-sentence ``log p(noisy = target)``, shape (N,)."""
    noisy = ad.structured_transition(h, column)
    return ad.pick(noisy, targets) - ad.logsumexp(noisy)


def bag_loss_graph(h: ad.Tensor, column: ad.Tensor, targets, bag_sizes: Sequence[int]) -> ad.Tensor:
    """Differentiable :func:`bag_loss` over sentences stored bag by bag in ``h``."""
    sizes = np.asarray(bag_sizes)
    if sizes.sum() != h.shape[0] or (sizes <= 0).any():
        raise ValueError(f"bag sizes {list(sizes)} do not partition {h.shape[0]} sentences")
    weights = np.repeat(-1.0 / (len(sizes) * sizes), sizes)
    return ad.dot(noisy_log_likelihood(h, column, targets), weights)
