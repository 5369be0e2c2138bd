"""Randomized self-checks of the gradients and the transition algebra."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import converter
from .data import Bag, Instance, build_vocabulary
from .encoder import EncoderConfig
from .model import TRANSITION, RelationModel
from .synth import synth_schema


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def random_instance(rng: np.random.Generator, vocab_size: int, max_tokens: int, pair, relation) -> Instance:
    n = int(rng.integers(2, max_tokens + 1))
    tokens = [f"w{i}" for i in rng.integers(0, vocab_size, size=n)]
    a, b = sorted(rng.choice(n, size=2, replace=False))
    if rng.random() < 0.5:
        a, b = b, a
    return Instance(tuple(tokens), (int(a), int(a) + 1), (int(b), int(b) + 1), pair[0], pair[1], relation)


def tiny_model(seed: int = 0, K: int = 5, n_bags: int = 4):
    """Model and bags at gradient-check scale: vocab 50, 8 filters, window 3, dims 16/4, <= 12 tokens."""
    rng = np.random.default_rng(seed)
    schema = synth_schema(K)
    bags = []
    for g in range(n_bags):
        rel = schema.labels[int(rng.integers(0, K))]
        insts = tuple(random_instance(rng, 48, 12, (f"h{g}", f"t{g}"), rel)
                      for _ in range(int(rng.integers(1, 4))))
        bags.append(Bag(f"h{g}", f"t{g}", rel, insts))
    vocab = build_vocabulary([i for b in bags for i in b.instances], 16, seed)
    # pad the vocabulary out to 50 rows
    extra = 50 - len(vocab)
    if extra > 0:
        vocab = type(vocab)(vocab.tokens + [f"x{i}" for i in range(extra)],
                            np.vstack([vocab.embeddings, rng.uniform(-0.25, 0.25, (extra, 16))]))
    config = EncoderConfig(K=K, window=3, filters=8, word_dim=16, position_dim=4, max_len=12,
                           position_clip=12, dropout_rate=0.5)
    model = RelationModel.create(schema, vocab, config, seed)
    model.params.set_value(TRANSITION, rng.normal(size=K))
    model.params.set_trainable(TRANSITION, True)
    return model, bags


def check_gradients(seed: int = 0, tolerance: float = 1e-4) -> CheckResult:
    model, bags = tiny_model(seed)
    prepared = model.prepare_bags(bags)
    n = sum(len(b.sentences) for b in prepared)
    mask = ad.dropout_mask((n, model.config.pooled_dim), model.config.dropout_rate, np.random.default_rng(seed))
    report = ad.gradient_check(lambda p: model.loss(prepared, True, dropout_mask=mask), model.params,
                               step=1e-5, tolerance=tolerance)
    return CheckResult("gradients", not report.flagged, f"max relative error {report.max_error:.2e}")


def _random_column_and_logits(rng, K=None):
    K = K or int(rng.integers(2, 12))
    return rng.normal(size=K), rng.normal(scale=3.0, size=K)


def check_structured_algebra(trials: int, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    template_ok = True
    for _ in range(trials):
        col, h = _random_column_and_logits(rng)
        K = col.size
        dense = np.zeros((K, K))
        dense[:, 0] = col
        for k in range(1, K):
            dense[k, k] = 1.0
        template_ok &= np.array_equal(converter.StructuredTransition(col).dense(), dense)
        z = dense @ h
        direct = np.exp(z - z.max()) / np.exp(z - z.max()).sum()
        worst = max(worst, float(np.abs(converter.noisy_distribution(col, h) - direct).max()))
    ok = worst <= 1e-12 and template_ok
    return CheckResult("structured algebra", ok, f"max deviation {worst:.2e}, template {'ok' if template_ok else 'BROKEN'}")


def _random_bags(rng, K, n_bags):
    return [(rng.normal(scale=2.0, size=(int(rng.integers(1, 6)), K)), int(rng.integers(0, K)))
            for _ in range(n_bags)]


def check_loss_bound(trials: int, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(trials):
        K = int(rng.integers(2, 10))
        col = rng.normal(size=K)
        bags = _random_bags(rng, K, int(rng.integers(1, 5)))
        loss = converter.bag_loss(bags, col)
        bound = converter.loss_lower_bound(bags, col)
        if not (loss >= bound >= 0):
            failures += 1
    return CheckResult("loss bound", failures == 0, f"{failures}/{trials} violations")


def check_identity_reduction(trials: int, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        K = int(rng.integers(2, 10))
        bags = _random_bags(rng, K, int(rng.integers(1, 5)))
        ce = np.mean([np.mean([-np.log(np.exp(h - h.max())[r] / np.exp(h - h.max()).sum()) for h in H])
                      for H, r in bags])
        worst = max(worst, abs(converter.bag_loss(bags, converter.identity_column(K)) - ce))
    return CheckResult("identity reduction", worst <= 1e-12, f"max deviation {worst:.2e}")


def check_inversion(trials: int, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        K = int(rng.integers(2, 10))
        col = rng.normal(size=K)
        col += (1.0 - col.sum()) / K
        h = rng.normal(scale=2.0, size=K)
        h[0] = rng.choice([-1, 1]) * rng.uniform(0.1, 3.0)
        target = converter.noisy_distribution(col, h)
        worst = max(worst, float(np.abs(converter.invert_for_column(h, target) - col).max()))
    return CheckResult("inversion recovery", worst <= 1e-8, f"max deviation {worst:.2e}")


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "structured algebra": check_structured_algebra,
    "loss bound": check_loss_bound,
    "identity reduction": check_identity_reduction,
    "inversion recovery": check_inversion,
}


def run_all(trials: int = 1000, seed: int = 0, gradients: bool = True) -> list[CheckResult]:
    results = [check_gradients(seed)] if gradients else []
    results += [fn(trials, seed) for fn in CHECKS.values()]
    return results
