"""
Reverse-mode gradients on numpy arrays
======================================

The engine records each operation on a small ``Tensor`` graph and walks it
backwards. Every primitive the encoder needs is there: gathers for
embedding lookups, a 1-d convolution, segment-wise max pooling, tanh,
dropout, affine maps, and a log-sum-exp.
"""

# %%
import numpy as np

from noisyre import autodiff as ad

rng = np.random.default_rng(0)

# %% [markdown]
# A parameter store holds named leaves. ``forward_backward`` zeroes stale
# gradients, builds the graph and back-propagates a scalar loss.

# %%
params = ad.ParamStore()
params.add("w", rng.normal(size=(3, 4)))
params.add("b", np.zeros(3))
x = rng.normal(size=(5, 4))


def loss(p):
    hidden = ad.tanh(ad.affine(ad.constant(x), p["w"], p["b"]))
    return ad.total(ad.logsumexp(hidden))


value = ad.forward_backward(loss, params)
print(f"loss {value:.6f}")
print("d loss / d b =", np.round(params["b"].grad, 6))

# %% [markdown]
# Central finite differences confirm every analytic entry.

# %%
report = ad.gradient_check(loss, params, step=1e-5, tolerance=1e-4)
print("max relative error per parameter:", {k: f"{v:.1e}" for k, v in report.errors.items()})
print("flagged:", report.flagged)

# %% [markdown]
# Piecewise pooling: ``segment_max`` takes the maximum of each labelled
# stretch of positions. A segment with no positions yields 0, and ties
# send the gradient to the first maximal position.

# %%
c = ad.Tensor(np.array([[[1.0], [5.0], [2.0], [4.0], [3.0]]]), requires_grad=True)
pooled = ad.segment_max(c, np.array([[0, 0, 1, 1, 2]]))
print("pooled:", pooled.data.ravel())
ad.total(pooled).backward()
print("gradient routing:", c.grad.ravel())
