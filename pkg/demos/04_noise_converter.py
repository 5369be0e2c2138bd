"""
The noise converter
===================

The converter maps true-label logits to noisy-label logits with a
transition whose only free entries are its first column: every relation's
noisy logit borrows a weighted share of the no-relation logit. Training
fits the column so the model explains noisy labels without bending the
encoder's view of the truth.
"""

# %%
import numpy as np

from noisyre import converter as cv

h = np.array([1.0, 2.0, 3.0])
column = np.array([0.8, 0.1, 0.1])
print("dense transition:\n", cv.StructuredTransition(column).dense())
print("noisy logits:", cv.apply(column, h))

# %% [markdown]
# Bag loss: the mean over bags of the mean per-sentence negative
# log-likelihood of the observed label under the noisy distribution. The
# max in place of log-sum-exp gives a lower bound.

# %%
bags = [(np.array([[1.0, 0.0]]), 1)]
print(f"loss {cv.bag_loss(bags, [0.7, 0.3]):.4f}, lower bound {cv.loss_lower_bound(bags, [0.7, 0.3]):.4f}")
print(f"identity column gives plain cross-entropy: {cv.bag_loss(bags, cv.identity_column(2)):.4f}")

# %% [markdown]
# Shifting the whole column by a constant leaves the softmax unchanged, so
# inversion pins the column by making it sum to 1, the same rule the
# initialization follows.

# %%
target = cv.noisy_distribution(column, h)
print("recovered column:", cv.invert_for_column(h, target))
print("shifted column, same distribution:", np.allclose(cv.noisy_distribution(column + 0.3, h), target))
print("init column e=0.1, K=5:", cv.init_column(0.1, 5))

# %% [markdown]
# A column-stochastic Q (``Q[u, v]`` = p(noisy u | true v)) can be
# bridged to the logit transition for one set of logits.

# %%
Q = np.array([[0.9, 0.3, 0.2], [0.05, 0.7, 0.0], [0.05, 0.0, 0.8]])
bridged = cv.bridge_column(h, Q)
print("bridged column:", np.round(bridged, 4))
print("matches Q @ softmax(h):", np.allclose(cv.noisy_distribution(bridged, h), Q @ cv.softmax(h)))
