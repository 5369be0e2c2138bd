"""Encoder + noise converter bundled with its schema and vocabulary."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .checkpoint import load_checkpoint, save_checkpoint
from .converter import bag_loss_graph, identity_column, softmax
from .data import Bag, RelationSchema, Vocabulary
from .encoder import EncoderConfig, Prepared, encode_batch, init_encoder_params, prepare_all
from .selector import SELECTORS

TRANSITION = "transition"


class SchemaMismatch(ValueError):
    pass


@dataclass
class PreparedBag:
    sentences: list[Prepared]
    label: int | None
    bag: Bag


class RelationModel:
    def __init__(self, schema: RelationSchema, vocabulary: Vocabulary, config: EncoderConfig,
                 params: ad.ParamStore):
        if config.K != schema.K:
            raise SchemaMismatch(f"encoder K={config.K} but schema has K={schema.K}")
        if params[TRANSITION].shape != (schema.K,):
            raise SchemaMismatch(f"transition column of shape {params[TRANSITION].shape} for K={schema.K}")
        self.schema = schema
        self.vocabulary = vocabulary
        self.config = config
        self.params = params

    @classmethod
    def create(cls, schema: RelationSchema, vocabulary: Vocabulary, config: EncoderConfig,
               seed: int = 0) -> "RelationModel":
        params = init_encoder_params(config, vocabulary, seed)
        params.add(TRANSITION, identity_column(schema.K), trainable=False)
        return cls(schema, vocabulary, config, params)

    @property
    def transition(self) -> np.ndarray:
        return self.params[TRANSITION].data

    # graph construction ----------------------------------------------------

    def logits(self, sentences: list[Prepared], train_mode: bool = False,
               rng: np.random.Generator | None = None, dropout_mask=None,
               dropout_rate: float | None = None) -> ad.Tensor:
        rate = self.config.dropout_rate if dropout_rate is None else dropout_rate
        return encode_batch(sentences, self.params, rate, train_mode, rng, dropout_mask)

    def loss(self, bags: list[PreparedBag], train_mode: bool = False,
             rng: np.random.Generator | None = None, dropout_mask=None,
             dropout_rate: float | None = None) -> ad.Tensor:
        sentences = [s for b in bags for s in b.sentences]
        targets = np.concatenate([np.full(len(b.sentences), b.label) for b in bags])
        h = self.logits(sentences, train_mode, rng, dropout_mask, dropout_rate)
        return bag_loss_graph(h, self.params[TRANSITION], targets, [len(b.sentences) for b in bags])

    # inference -------------------------------------------------------------

    def prepare_bags(self, bags, max_bag_size: int | None = None) -> list[PreparedBag]:
        """Prepare bags for this model, skipping sentences that cannot be encoded.

        Bags left without sentences are dropped with a warning.
        """
        out = []
        rejected = 0
        for bag in bags:
            sentences, bad = prepare_all(bag.instances, self.vocabulary, self.config)
            rejected += len(bad)
            if max_bag_size is not None and len(sentences) > max_bag_size:
                warnings.warn(f"bag {bag.pair} truncated from {len(sentences)} to {max_bag_size} sentences")
                sentences = sentences[:max_bag_size]
            if not sentences:
                warnings.warn(f"bag {bag.pair} has no encodable sentence; dropped")
                continue
            label = self.schema.index(bag.relation) if bag.relation is not None else None
            out.append(PreparedBag(sentences, label, bag))
        if rejected:
            warnings.warn(f"{rejected} sentences rejected (entity beyond max_len {self.config.max_len})")
        return out

    def sentence_probs(self, sentences: list[Prepared], batch_size: int = 512) -> np.ndarray:
        """True-label distributions (N, K) with dropout off."""
        if not sentences:
            return np.zeros((0, self.schema.K))
        chunks = [self.logits(sentences[i:i + batch_size]).data for i in range(0, len(sentences), batch_size)]
        return softmax(np.concatenate(chunks))

    def bag_sentence_probs(self, bags: list[PreparedBag]) -> list[np.ndarray]:
        probs = self.sentence_probs([s for b in bags for s in b.sentences])
        bounds = np.cumsum([len(b.sentences) for b in bags])[:-1]
        return np.split(probs, bounds)

    # persistence -----------------------------------------------------------

    def save(self, path, step: int, seed: int, meta: dict | None = None) -> Path:
        path = Path(path)
        full = {"labels": list(self.schema.labels), "encoder": self.config.to_dict(), **(meta or {})}
        save_checkpoint(path, self.params, step, seed, full)
        self.vocabulary.save(path / "vocab.json")
        return path

    @classmethod
    def load(cls, path, schema: RelationSchema | None = None) -> "RelationModel":
        params, manifest = load_checkpoint(path)
        meta = manifest["meta"]
        labels = tuple(meta["labels"])
        if schema is not None and tuple(schema.labels) != labels:
            raise SchemaMismatch(f"checkpoint {path} has K={len(labels)} labels {labels[:3]}..., "
                                 f"schema has K={schema.K}")
        config = EncoderConfig(**meta["encoder"])
        vocab = Vocabulary.load(Path(path) / "vocab.json", config.word_dim)
        vocab.embeddings = params["word_embedding"].data
        return cls(RelationSchema(labels), vocab, config, params)


def select_bags(bag_probs: list[np.ndarray], selector: str = "cond_opt"):
    fn = SELECTORS[selector]
    return [fn(p) for p in bag_probs]
