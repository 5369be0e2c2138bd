"""
From sentences to a bag prediction
==================================

The conditional optimal selector looks at per-sentence true-label
distributions. If every sentence votes no-relation it keeps the most
confident one. Otherwise it keeps the single sentence with the highest
probability for any real relation. The averaging variant pools all
positive-voting sentences instead.
"""

# %%
import numpy as np

from noisyre.selector import avg_weighted_select, conditional_optimal_select, multi_label_predict

labels = ["NA", "founder", "born_in", "ceo_of"]
bag = np.array([
    [0.70, 0.10, 0.10, 0.10],
    [0.20, 0.60, 0.05, 0.15],
    [0.30, 0.45, 0.05, 0.20],
    [0.40, 0.05, 0.05, 0.50],
])

# %%
best = conditional_optimal_select(bag)
print(f"cond_opt keeps sentence {best.sentence} and relation {labels[best.relation]}")
avg = avg_weighted_select(bag)
print("avg_weighted distribution:", np.round(avg.distribution, 4), "->", labels[avg.prediction])

# %%
quiet = np.array([[0.9, 0.05, 0.03, 0.02], [0.6, 0.2, 0.1, 0.1]])
out = conditional_optimal_select(quiet)
print(f"all-NA bag: sentence {out.sentence} chosen, branch all_na={out.all_na}")

# %% [markdown]
# A bag can hold several facts. Thresholding each relation's best sentence
# probability yields a multi-label answer.

# %%
print("relations at threshold 0.5:", sorted(labels[k] for k in multi_label_predict(bag, 0.5)))
