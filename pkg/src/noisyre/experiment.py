"""Held-out evaluation helpers and the synthetic noise-converter vs identity comparison."""

from __future__ import annotations

import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics
from .data import build_vocabulary, gold_triples, group_bags, split_validation
from .encoder import EncoderConfig
from .model import RelationModel
from .synth import SynthConfig, synth_generate, synth_schema
from .trainer import TrainConfig, TrainResult, average_sentence_probs, ensemble_predict, train


@dataclass
class Evaluation:
    ranking: list
    gold: set
    average_precision: float
    sentence_accuracy: float | None
    bag_distributions: list = field(repr=False)


def evaluate(models: list[RelationModel], instances, selector: str = "cond_opt", gold=None) -> Evaluation:
    """Rank held-out pairs with an ensemble (or a single model) and score them.

    Sentence accuracy compares the averaged true-label argmax with planted
    ``true_relation`` labels when every instance carries one.
    """
    gold = gold_triples(instances) if gold is None else gold
    bags = group_bags(instances, "eval")
    prepared, outputs = ensemble_predict(models, bags, selector)
    dists = [o.distribution for o in outputs]
    ranking = metrics.rank_predictions([b.bag for b in prepared], dists, models[0].schema.labels)
    acc = None
    if all(i.true_relation is not None for b in prepared for i in b.bag.instances):
        probs = np.concatenate(average_sentence_probs(models, prepared))
        schema = models[0].schema
        truth = np.array([schema.index(i.true_relation) for b in prepared for i in b.bag.instances])
        acc = float((probs.argmax(axis=1) == truth).mean())
    ap = metrics.average_precision(ranking, gold) if gold else 0.0
    return Evaluation(ranking, gold, ap, acc, dists)


@dataclass(frozen=True)
class ComparisonSetup:
    """Synthetic comparison settings: K=5, 2000 bags, 1-5 sentences, rho 0.5, 40% NA."""

    synth: SynthConfig = SynthConfig(K=5, bag_count=2000, min_sentences=1, max_sentences=5,
                                     expressive_rate=0.5, na_bag_fraction=0.4)
    test_bags: int = 1000
    epochs: int = 5
    pretrain_epochs: int = 2
    checkpoint_interval: int = 20
    validation_fraction: float = 0.1
    encoder: dict = field(default_factory=dict)


@dataclass
class RunOutcome:
    variant: str
    seed: int
    average_precision: float
    sentence_accuracy: float
    result: TrainResult = field(repr=False)


def run_variant(setup: ComparisonSetup, seed: int, identity: bool, run_dir) -> RunOutcome:
    synth = replace(setup.synth, seed=seed)
    train_inst = synth_generate(synth)
    test_inst = synth_generate(replace(synth, seed=seed + 10_000, bag_count=setup.test_bags))
    schema = synth_schema(synth.K)
    bags = group_bags(train_inst, "train")
    tr, va = split_validation(bags, setup.validation_fraction, seed)
    enc = EncoderConfig(K=synth.K, **setup.encoder)
    vocab = build_vocabulary(train_inst, enc.word_dim, seed)
    model = RelationModel.create(schema, vocab, enc, seed)
    cfg = TrainConfig(pretrain_epochs=setup.epochs if identity else setup.pretrain_epochs,
                      total_epochs=setup.epochs, checkpoint_interval=setup.checkpoint_interval, seed=seed,
                      dropout_rate=enc.dropout_rate)
    result = train(model, tr, va, cfg, run_dir)
    best = RelationModel.load(result.best.path)
    ev = evaluate([best], test_inst)
    return RunOutcome("identity" if identity else "full", seed, ev.average_precision, ev.sentence_accuracy, result)


def compare_on_synthetic(seeds=(0, 1, 2), setup: ComparisonSetup = ComparisonSetup(),
                         work_dir=None) -> list[RunOutcome]:
    """Train the full model and the identity-transition ablation on the same data per seed."""
    outcomes = []
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(work_dir) if work_dir is not None else Path(tmp)
        for seed in seeds:
            for identity in (False, True):
                name = "identity" if identity else "full"
                outcomes.append(run_variant(setup, seed, identity, root / f"{name}_seed{seed}"))
    return outcomes
