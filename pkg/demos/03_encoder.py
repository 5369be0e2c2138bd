"""
The piecewise CNN encoder
=========================

Each token becomes a word vector plus two position vectors (distance to
each entity). A width-3 convolution slides over the sentence, and max
pooling runs separately over the three pieces the entities cut it into.
tanh, dropout and an affine map give one logit per relation.
"""

# %%
import numpy as np

from noisyre.data import Instance, build_vocabulary
from noisyre.encoder import (EncoderConfig, convolve, embed, encode, init_encoder_params, piecewise_max_pool,
                             prepare, relative_positions)

sentence = Instance(tuple("steve jobs founded apple in a garage".split()), (0, 2), (3, 4),
                    "m.jobs", "m.apple", "NA")
config = EncoderConfig(K=5)  # 230 filters, 50 + 2 x 5 input dims
vocab = build_vocabulary([sentence], config.word_dim, seed=0)
params = init_encoder_params(config, vocab, seed=0)

# %%
head, tail = relative_positions(sentence, config.position_clip)
print("offsets to head:", head - config.position_clip)
print("offsets to tail:", tail - config.position_clip)

x = embed(sentence, vocab, params, config)
print("input matrix:", x.shape)

# %% [markdown]
# The convolution produces one feature map per filter. Boundaries are the
# last token of each entity, and each entity belongs to the piece it ends.

# %%
features = convolve(x, params["filters"].data, params["filter_bias"].data)
b1, b2 = prepare(sentence, vocab, config).boundaries
pooled = piecewise_max_pool(features, b1, b2)
print(f"feature maps {features.shape}, pieces end at {b1} and {b2}, pooled vector {pooled.shape}")

# %%
logits = encode(sentence, vocab, params, config)
print("true-label logits:", np.round(logits, 4))
print("inference is deterministic:", np.array_equal(logits, encode(sentence, vocab, params, config)))
print("training mode applies dropout:", np.round(encode(sentence, vocab, params, config, True, seed=1), 4))
