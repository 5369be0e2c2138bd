"""Two-phase training, checkpointing, validation and checkpoint ensembles.

Phase one trains the encoder with the transition frozen at the identity
column. Phase two (re)initializes the first column and trains it jointly.
A batch is a group of whole bags so the bag-averaged loss sees every
sentence of each bag in the same step.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .converter import init_column
from .data import Bag
from .model import TRANSITION, PreparedBag, RelationModel, SchemaMismatch, select_bags
from .optim import OptimizerConfig, adam_step

log = logging.getLogger(__name__)

PRETRAIN, FINETUNE = "pretrain", "finetune"


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 50
    pretrain_epochs: int = 2
    total_epochs: int = 20
    checkpoint_interval: int = 200
    init_ratio: float = 0.1
    ensemble_size: int = 5
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    dropout_rate: float = 0.5
    reinit_transition: bool = True
    final_checkpoint: bool = True
    max_bag_size: int = 512
    selector: str = "cond_opt"

    def __post_init__(self):
        for name in ("batch_size", "total_epochs", "checkpoint_interval", "ensemble_size", "max_bag_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.pretrain_epochs <= self.total_epochs:
            raise ValueError(f"pretrain_epochs {self.pretrain_epochs} must lie in [0, total_epochs]")
        if not 0 < self.init_ratio < 1:
            raise ValueError(f"init_ratio must be in (0, 1), got {self.init_ratio}")


@dataclass(frozen=True)
class CheckpointRecord:
    path: Path
    step: int
    epoch: int
    phase: str
    loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    records: list[CheckpointRecord]
    best: CheckpointRecord
    model: RelationModel


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, records: list[CheckpointRecord]):
        super().__init__(message)
        self.records = records


def validate(model: RelationModel, bags, selector: str = "cond_opt") -> float:
    """Fraction of bags whose selected distribution peaks at the observed label."""
    prepared = bags if bags and isinstance(bags[0], PreparedBag) else model.prepare_bags(bags)
    if not prepared:
        raise ValueError("validation set is empty")
    outputs = select_bags(model.bag_sentence_probs(prepared), selector)
    correct = sum(out.prediction == b.label for out, b in zip(outputs, prepared))
    return correct / len(prepared)


def _enter_finetune(model: RelationModel, config: TrainConfig) -> None:
    params = model.params
    if config.reinit_transition:
        params.set_value(TRANSITION, init_column(config.init_ratio, model.schema.K))
    params.set_trainable(TRANSITION, True)
    params.reset_state(TRANSITION)


def train(model: RelationModel, train_bags: list[Bag], val_bags: list[Bag], config: TrainConfig,
          run_dir) -> TrainResult:
    """Run the full schedule, writing checkpoints and ``train_log.jsonl`` under ``run_dir``.

    Returns every checkpoint record and the one with the best validation
    accuracy (earliest on ties).
    """
    if not train_bags or not val_bags:
        raise ValueError("training and validation bag sets must be non-empty")
    run_dir = Path(run_dir)
    (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    log_path = run_dir / "train_log.jsonl"
    log_path.write_text("")

    train_p = model.prepare_bags(train_bags, config.max_bag_size)
    val_p = model.prepare_bags(val_bags)
    params = model.params
    if not params.is_trainable(TRANSITION) and config.pretrain_epochs == 0:
        _enter_finetune(model, config)

    rng = np.random.default_rng(config.seed)
    records: list[CheckpointRecord] = []
    step = 0
    running: list[float] = []

    def checkpoint(epoch: int, phase: str) -> None:
        acc = validate(model, val_p, config.selector)
        rel = Path("checkpoints") / f"step_{step:07d}"
        loss = float(np.mean(running)) if running else float("nan")
        model.save(run_dir / rel, step, config.seed,
                   {"epoch": epoch, "phase": phase, "val_accuracy": acc})
        rec = CheckpointRecord(run_dir / rel, step, epoch, phase, loss, acc)
        records.append(rec)
        with open(log_path, "a") as fh:
            fh.write(json.dumps({"step": step, "epoch": epoch, "phase": phase, "loss": loss,
                                 "val_accuracy": acc, "path": rel.as_posix()}) + "\n")
        running.clear()
        log.info("step %d epoch %d %s loss %.4f val_acc %.4f", step, epoch, phase, loss, acc)

    phase = PRETRAIN
    for epoch in range(config.total_epochs):
        if epoch == config.pretrain_epochs:
            if epoch > 0:
                _enter_finetune(model, config)
        phase = PRETRAIN if epoch < config.pretrain_epochs else FINETUNE
        order = rng.permutation(len(train_p))
        for start in range(0, len(order), config.batch_size):
            batch = [train_p[i] for i in order[start:start + config.batch_size]]
            step_rng = np.random.default_rng([config.seed, step])
            try:
                value = ad.forward_backward(
                    lambda p: model.loss(batch, True, step_rng, dropout_rate=config.dropout_rate), params)
                if not np.isfinite(value):
                    raise FloatingPointError(f"non-finite loss {value}")
                params["word_embedding"].grad[0] = 0.0  # padding row stays zero
                adam_step(params, config.optimizer)
            except FloatingPointError as exc:
                raise TrainingDiverged(f"diverged at step {step}: {exc}", records) from exc
            step += 1
            running.append(value)
            if step % config.checkpoint_interval == 0:
                checkpoint(epoch, phase)
    if config.final_checkpoint and (not records or records[-1].step != step):
        checkpoint(config.total_epochs - 1, phase)
    if not records:
        raise RuntimeError("training produced no checkpoint")
    best = max(records, key=lambda r: (r.val_accuracy, -r.step))
    return TrainResult(records, best, model)


def ensemble_predict(models: list[RelationModel], bags, selector: str = "cond_opt"):
    """Average per-sentence true-label distributions over models, then select per bag.

    Returns ``(prepared_bags, selector_outputs)``.
    """
    if not models:
        raise ValueError("need at least one checkpoint")
    prepared = models[0].prepare_bags(bags)
    return prepared, select_bags(average_sentence_probs(models, prepared), selector)


def average_sentence_probs(models: list[RelationModel], prepared: list[PreparedBag]) -> list[np.ndarray]:
    """Per-bag (n_g, K) true-label distributions averaged over the models."""
    first = models[0]
    for m in models[1:]:
        if m.schema.labels != first.schema.labels:
            raise SchemaMismatch("ensemble members disagree on the relation schema")
        if m.vocabulary.tokens != first.vocabulary.tokens:
            raise SchemaMismatch("ensemble members were trained with different vocabularies")
    per_model = [np.concatenate(m.bag_sentence_probs(prepared)) for m in models]
    # sorting across models makes the mean independent of checkpoint order; offsetting from
    # the smallest value makes it return identical members' probabilities bit for bit
    ranked = np.sort(np.stack(per_model), axis=0)
    averaged = ranked[0] + (ranked - ranked[0]).sum(axis=0) / len(models)
    bounds = np.cumsum([len(b.sentences) for b in prepared])[:-1]
    return np.split(averaged, bounds)


def load_ensemble(records_or_paths, n: int, schema=None) -> list[RelationModel]:
    """Load the last ``n`` checkpoints of a run."""
    paths = [r.path if isinstance(r, CheckpointRecord) else Path(r) for r in records_or_paths]
    if not paths:
        raise FileNotFoundError("no checkpoints found")
    return [RelationModel.load(p, schema) for p in paths[-n:]]


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
