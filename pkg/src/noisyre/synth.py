"""Synthetic distant-supervision corpora with planted sentence-level truth.

A positive bag gets one knowledge-base relation ``r`` as the observed label
of every sentence, but each sentence only expresses ``r`` with probability
``expressive_rate``: expressive sentences carry ``r``'s template tokens
between the two entities, the rest are filler and truly say nothing. NA
bags hold filler sentences only.

With ``typed_entities`` the entity mentions are type tokens tied to the
relation (as person/company pairs go with *founder*), and NA bags draw
their types from every relation, so a filler sentence's entity types alone
cannot tell a noisy positive from a true negative.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data import NA, Instance, RelationSchema


@dataclass(frozen=True)
class SynthConfig:
    K: int = 5
    vocab_size: int = 200
    bag_count: int = 100
    min_sentences: int = 1
    max_sentences: int = 5
    expressive_rate: float = 0.5
    na_bag_fraction: float = 0.4
    seed: int = 0
    template_length: int = 2
    typed_entities: bool = True

    def __post_init__(self):
        if not 0.0 <= self.expressive_rate <= 1.0:
            raise ValueError(f"expressive_rate must be in [0, 1], got {self.expressive_rate}")
        if not 0.0 <= self.na_bag_fraction <= 1.0:
            raise ValueError(f"na_bag_fraction must be in [0, 1], got {self.na_bag_fraction}")
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if not 1 <= self.min_sentences <= self.max_sentences:
            raise ValueError("need 1 <= min_sentences <= max_sentences")
        if self.vocab_size < 1 or self.bag_count < 0 or self.template_length < 1:
            raise ValueError("vocab_size and template_length must be positive, bag_count non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def synth_schema(K: int) -> RelationSchema:
    return RelationSchema((NA, *(f"rel{k}" for k in range(1, K))))


def templates(config: SynthConfig) -> dict[str, tuple[str, ...]]:
    return {f"rel{k}": tuple(f"tpl{k}_{j}" for j in range(config.template_length))
            for k in range(1, config.K)}


def _sentence(rng, config: SynthConfig, head_tok: str, tail_tok: str, template: tuple[str, ...]):
    def filler(lo, hi):
        return [f"w{i}" for i in rng.integers(0, config.vocab_size, size=rng.integers(lo, hi + 1))]

    left = filler(0, 3)
    middle = filler(0, 2) + list(template) + filler(0, 2)
    right = filler(0, 3)
    tokens = left + [head_tok] + middle + [tail_tok] + right
    h = len(left)
    t = h + 1 + len(middle)
    return tokens, (h, h + 1), (t, t + 1)


def synth_generate(config: SynthConfig) -> list[Instance]:
    """Generate ``bag_count`` bags; every call with the same config is identical."""
    rng = np.random.default_rng(config.seed)
    schema = synth_schema(config.K)
    tpl = templates(config)
    out = []
    for g in range(config.bag_count):
        head_id, tail_id = f"s{config.seed}e{2 * g}", f"s{config.seed}e{2 * g + 1}"
        is_na = rng.random() < config.na_bag_fraction
        relation = NA if is_na else schema.labels[rng.integers(1, config.K)]
        if config.typed_entities:
            kind = rng.integers(0, config.K) if is_na else schema.index(relation)
            head_tok, tail_tok = f"htype{kind}", f"ttype{kind}"
        else:
            head_tok, tail_tok = head_id, tail_id
        n = rng.integers(config.min_sentences, config.max_sentences + 1)
        for _ in range(n):
            expresses = not is_na and rng.random() < config.expressive_rate
            tokens, hspan, tspan = _sentence(rng, config, head_tok, tail_tok,
                                             tpl[relation] if expresses else ())
            out.append(Instance(tuple(tokens), hspan, tspan, head_id, tail_id, relation,
                                true_relation=relation if expresses else NA))
    return out
