"""Piecewise-CNN sentence encoder producing K true-label logits per sentence.

Pipeline per sentence: word + two relative-position embeddings, a valid
convolution of width ``window``, max pooling over the three pieces cut by
the entities, tanh, dropout, and an affine map to K logits.

Feature-map position ``i`` is the window starting at token ``i``. An entity
boundary is the entity's last token (``end - 1``) clamped into the feature
map, and that position belongs to the piece it terminates, so the pieces
are ``[0, b1]``, ``(b1, b2]`` and ``(b2, T)`` for sorted boundaries
``b1 <= b2``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .data import Instance, Vocabulary


class InstanceRejected(ValueError):
    """The instance cannot be encoded (entity cut off by truncation)."""


@dataclass(frozen=True)
class EncoderConfig:
    K: int
    window: int = 3
    filters: int = 230
    word_dim: int = 50
    position_dim: int = 5
    max_len: int = 100
    position_clip: int = 100
    dropout_rate: float = 0.5

    def __post_init__(self):
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if self.window < 1 or self.filters < 1:
            raise ValueError("window and filters must be >= 1")
        if self.max_len < self.window:
            raise ValueError(f"max_len {self.max_len} shorter than window {self.window}")
        if self.position_clip < 1:
            raise ValueError("position_clip must be >= 1")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def input_dim(self) -> int:
        return self.word_dim + 2 * self.position_dim

    @property
    def pooled_dim(self) -> int:
        return 3 * self.filters

    def to_dict(self) -> dict:
        return asdict(self)


def init_encoder_params(config: EncoderConfig, vocabulary: Vocabulary, seed: int = 0,
                        params: ad.ParamStore | None = None) -> ad.ParamStore:
    if vocabulary.dim != config.word_dim:
        raise ValueError(f"vocabulary dimension {vocabulary.dim} != word_dim {config.word_dim}")
    rng = np.random.default_rng(seed)
    params = params if params is not None else ad.ParamStore()
    n_pos = 2 * config.position_clip + 1
    d = config.input_dim
    m, l, K = config.filters, config.window, config.K
    params.add("word_embedding", vocabulary.embeddings)
    params.add("head_position", rng.uniform(-0.25, 0.25, (n_pos, config.position_dim)))
    params.add("tail_position", rng.uniform(-0.25, 0.25, (n_pos, config.position_dim)))
    bound = np.sqrt(6.0 / (l * d + m))
    params.add("filters", rng.uniform(-bound, bound, (m, l, d)))
    params.add("filter_bias", np.zeros(m))
    bound = np.sqrt(6.0 / (3 * m + K))
    params.add("projection", rng.uniform(-bound, bound, (K, 3 * m)))
    params.add("projection_bias", np.zeros(K))
    return params


def relative_positions(instance: Instance, position_clip: int, length: int | None = None):
    """Clipped offsets to the head and tail starts, shifted into ``[0, 2*clip]``."""
    n = len(instance.tokens) if length is None else length
    i = np.arange(n)
    head = np.clip(i - instance.head_span[0], -position_clip, position_clip) + position_clip
    tail = np.clip(i - instance.tail_span[0], -position_clip, position_clip) + position_clip
    return head, tail


@dataclass(frozen=True)
class Prepared:
    """Index arrays for one sentence, ready for batching."""

    word_ids: np.ndarray
    head_pos: np.ndarray
    tail_pos: np.ndarray
    boundaries: tuple[int, int]  # sorted feature-map boundaries b1 <= b2

    @property
    def length(self) -> int:
        return len(self.word_ids)


def segment_boundaries(head_end: int, tail_end: int, n_steps: int) -> tuple[int, int]:
    b = sorted(min(max(e - 1, 0), n_steps - 1) for e in (head_end, tail_end))
    return b[0], b[1]


def prepare(instance: Instance, vocabulary: Vocabulary, config: EncoderConfig) -> Prepared:
    n = len(instance.tokens)
    if n > config.max_len:
        if max(instance.head_span[1], instance.tail_span[1]) > config.max_len:
            raise InstanceRejected(
                f"truncating {n} tokens to {config.max_len} would cut an entity "
                f"(head {instance.head_span}, tail {instance.tail_span})")
        n = config.max_len
    length = max(n, config.window)
    ids = np.full(length, Vocabulary.PAD_INDEX, dtype=np.intp)
    ids[:n] = vocabulary.lookup(instance.tokens[:n])
    head, tail = relative_positions(instance, config.position_clip, length)
    steps = length - config.window + 1
    return Prepared(ids, head, tail, segment_boundaries(instance.head_span[1], instance.tail_span[1], steps))


def prepare_all(instances, vocabulary: Vocabulary, config: EncoderConfig):
    """Prepare every instance; returns (prepared list, indices of rejected instances)."""
    out, rejected = [], []
    for k, inst in enumerate(instances):
        try:
            out.append(prepare(inst, vocabulary, config))
        except InstanceRejected:
            rejected.append(k)
    return out, rejected


def _batch_arrays(batch: list[Prepared], window: int):
    length = max(p.length for p in batch)
    n = len(batch)
    ids = np.full((n, length), Vocabulary.PAD_INDEX, dtype=np.intp)
    hp = np.zeros((n, length), dtype=np.intp)
    tp = np.zeros((n, length), dtype=np.intp)
    steps = length - window + 1
    seg = np.full((n, steps), -1, dtype=np.intp)
    pos = np.arange(steps)
    for r, p in enumerate(batch):
        k = p.length
        ids[r, :k] = p.word_ids
        hp[r, :k] = p.head_pos
        tp[r, :k] = p.tail_pos
        hp[r, k:] = p.head_pos[-1]
        tp[r, k:] = p.tail_pos[-1]
        valid = k - window + 1
        b1, b2 = p.boundaries
        s = np.where(pos <= b1, 0, np.where(pos <= b2, 1, 2))
        seg[r, :valid] = s[:valid]
    return ids, hp, tp, seg


def _inputs(batch: list[Prepared], params: ad.ParamStore):
    window = params["filters"].shape[1]
    ids, hp, tp, seg = _batch_arrays(batch, window)
    x = ad.concat([ad.gather(params["word_embedding"], ids),
                   ad.gather(params["head_position"], hp),
                   ad.gather(params["tail_position"], tp)], axis=-1)
    return x, seg


def embed_batch(batch: list[Prepared], params: ad.ParamStore) -> ad.Tensor:
    return _inputs(batch, params)[0]


def pooled_batch(batch: list[Prepared], params: ad.ParamStore) -> ad.Tensor:
    """tanh of the piecewise-pooled features, shape (N, 3m)."""
    x, seg = _inputs(batch, params)
    c = ad.conv1d(x, params["filters"], params["filter_bias"])
    return ad.tanh(ad.segment_max(c, seg))


def encode_batch(batch: list[Prepared], params: ad.ParamStore, dropout_rate: float = 0.0,
                 train_mode: bool = False, rng: np.random.Generator | None = None,
                 dropout_mask: np.ndarray | None = None) -> ad.Tensor:
    """True-label logits for a batch of prepared sentences, shape (N, K)."""
    hidden = pooled_batch(batch, params)
    if train_mode and dropout_rate > 0:
        if dropout_mask is not None:
            hidden = ad.dropout(hidden, dropout_rate, mask=dropout_mask)
        else:
            hidden = ad.dropout(hidden, dropout_rate, rng=rng if rng is not None else np.random.default_rng(0))
    return ad.affine(hidden, params["projection"], params["projection_bias"])


# single-sentence numpy views --------------------------------------------------

def embed(instance: Instance, vocabulary: Vocabulary, params: ad.ParamStore, config: EncoderConfig) -> np.ndarray:
    """Input matrix (|X|, d): word vector, head-position vector, tail-position vector.

    Rows beyond ``max_len`` are truncated; the padding up to the window
    width that :func:`prepare` adds for convolution is not included.
    """
    n = min(len(instance.tokens), config.max_len)
    return embed_batch([prepare(instance, vocabulary, config)], params).data[0, :n]


def convolve(x: np.ndarray, filters: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Feature maps (m, |X| - l + 1) for an input matrix x (|X|, d)."""
    out = ad.conv1d(ad.constant(x[None]), ad.constant(filters), ad.constant(bias))
    return out.data[0].T


def piecewise_max_pool(features: np.ndarray, b1: int, b2: int) -> np.ndarray:
    """Pool feature maps (m, T) into ``[p_11, p_12, p_13, p_21, ...]``.

    ``b1 <= b2`` are inclusive feature-map boundaries; an empty piece gives 0.
    """
    steps = features.shape[1]
    b1, b2 = sorted((b1, b2))
    pos = np.arange(steps)
    seg = np.where(pos <= b1, 0, np.where(pos <= b2, 1, 2))
    return ad.segment_max(ad.constant(features.T[None]), seg[None]).data[0]


def encode(instance: Instance, vocabulary: Vocabulary, params: ad.ParamStore, config: EncoderConfig,
           train_mode: bool = False, seed: int = 0) -> np.ndarray:
    """True-label logits h (K,) for one sentence; dropout draws from ``seed`` in train mode."""
    batch = [prepare(instance, vocabulary, config)]
    rng = np.random.default_rng(seed) if train_mode else None
    return encode_batch(batch, params, config.dropout_rate, train_mode, rng).data[0]
