"""Adam with L2 weight decay folded into the gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ParamStore


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.001
    weight_decay: float = 0.0001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0 < b < 1:
                raise ValueError(f"{name} must be in (0, 1), got {b}")


def adam_step(params: ParamStore, config: OptimizerConfig) -> None:
    """One bias-corrected Adam update of every trainable parameter, in place.

    Weight decay is classic L2: ``weight_decay * p`` is added to the raw
    gradient before the moment updates. Overflow raises ``FloatingPointError``.
    """
    b1, b2 = config.beta1, config.beta2
    with np.errstate(over="raise", invalid="raise"):
        for name, t in params.items():
            if not t.requires_grad:
                continue
            g = t.grad + config.weight_decay * t.data if config.weight_decay else t.grad
            step = params.steps[name] + 1
            m = params.moment1[name]
            v = params.moment2[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            m_hat = m / (1 - b1 ** step)
            v_hat = v / (1 - b2 ** step)
            update = config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
            if not np.all(np.isfinite(update)):
                raise FloatingPointError(f"non-finite Adam update for parameter {name!r}")
            t.data -= update
            params.steps[name] = step
