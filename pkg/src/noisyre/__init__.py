"""Distant-supervision relation extraction with a logit-space noise converter."""

from .converter import (StructuredTransition, apply, bag_loss, init_column, invert_for_column,
                        loss_lower_bound, noisy_distribution)
from .data import Bag, Instance, RelationSchema, Vocabulary, group_bags, load_corpus, split_validation
from .encoder import EncoderConfig
from .model import RelationModel
from .optim import OptimizerConfig
from .selector import avg_weighted_select, conditional_optimal_select, multi_label_predict
from .synth import SynthConfig, synth_generate
from .trainer import TrainConfig, ensemble_predict, train, validate

__version__ = "0.1.0"

__all__ = [
    "Bag", "EncoderConfig", "Instance", "OptimizerConfig", "RelationModel", "RelationSchema",
    "StructuredTransition", "SynthConfig", "TrainConfig", "Vocabulary", "apply",
    "avg_weighted_select", "bag_loss", "conditional_optimal_select", "ensemble_predict",
    "group_bags", "init_column", "invert_for_column", "load_corpus", "loss_lower_bound",
    "multi_label_predict", "noisy_distribution", "split_validation", "synth_generate",
    "train", "validate",
]
