"""Run configuration: defaults, ``key = value`` files, and flag overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .encoder import EncoderConfig
from .optim import OptimizerConfig
from .synth import SynthConfig
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # paths
    corpus: str = ""
    schema: str = ""
    embeddings: str = ""
    # encoder
    window: int = 3
    filters: int = 230
    word_dim: int = 50
    position_dim: int = 5
    max_len: int = 100
    position_clip: int = 100
    dropout_rate: float = 0.5
    # training
    batch_size: int = 50
    pretrain_epochs: int = 2
    epochs: int = 20
    checkpoint_interval: int = 200
    init_ratio: float = 0.1
    ensemble_size: int = 5
    reinit_transition: bool = True
    validation_fraction: float = 0.1
    selector: str = "cond_opt"
    # optimizer
    learning_rate: float = 0.001
    weight_decay: float = 0.0001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    # synthetic corpus
    relations: int = 5
    vocab_size: int = 200
    bags: int = 100
    min_sentences: int = 1
    max_sentences: int = 5
    rho: float = 0.5
    na_fraction: float = 0.4
    typed_entities: bool = True
    # misc
    seed: int = 0
    threads: int = 1

    def encoder(self, K: int) -> EncoderConfig:
        return EncoderConfig(K=K, window=self.window, filters=self.filters, word_dim=self.word_dim,
                             position_dim=self.position_dim, max_len=self.max_len,
                             position_clip=self.position_clip, dropout_rate=self.dropout_rate)

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(self.learning_rate, self.weight_decay, self.beta1, self.beta2, self.epsilon)

    def training(self) -> TrainConfig:
        return TrainConfig(batch_size=self.batch_size, pretrain_epochs=self.pretrain_epochs,
                           total_epochs=self.epochs, checkpoint_interval=self.checkpoint_interval,
                           init_ratio=self.init_ratio, ensemble_size=self.ensemble_size, seed=self.seed,
                           optimizer=self.optimizer(), dropout_rate=self.dropout_rate,
                           reinit_transition=self.reinit_transition, selector=self.selector)

    def synth(self) -> SynthConfig:
        return SynthConfig(K=self.relations, vocab_size=self.vocab_size, bag_count=self.bags,
                           min_sentences=self.min_sentences, max_sentences=self.max_sentences,
                           expressive_rate=self.rho, na_bag_fraction=self.na_fraction, seed=self.seed,
                           typed_entities=self.typed_entities)

    def to_text(self) -> str:
        lines = ["# resolved run configuration"]
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def coerce(key: str, raw: str):
    if key not in _TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    kind = _TYPES[key]
    raw = raw.strip()
    try:
        if kind in ("bool", bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        key = key.strip()
        try:
            values[key] = coerce(key, raw)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def resolve(config_path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the config file, then non-None overrides."""
    values = {}
    if config_path:
        values.update(parse_config_text(Path(config_path).read_text(), str(config_path)))
    for k, v in (overrides or {}).items():
        if v is not None:
            if k not in _TYPES:
                raise ConfigError(f"unknown configuration key {k!r}")
            values[k] = v
    return dataclasses.replace(RunConfig(), **values)
