"""
Corpora, bags and a synthetic noise model
=========================================

A corpus is JSONL, one sentence per line, with entity spans and an
observed relation. Sentences sharing an entity pair form a bag. The
synthetic generator plants which sentences truly express the bag's
relation, so label noise can be measured instead of guessed.
"""

# %%
import tempfile
from collections import Counter
from pathlib import Path

from noisyre.data import build_vocabulary, group_bags, load_corpus, split_validation, write_corpus
from noisyre.synth import SynthConfig, synth_generate, synth_schema

work = Path(tempfile.mkdtemp())

# %% [markdown]
# Half of the sentences in positive bags express the relation
# (``expressive_rate=0.5``); the rest are noise that distant supervision
# labels anyway.

# %%
config = SynthConfig(K=5, bag_count=200, expressive_rate=0.5, na_bag_fraction=0.4, seed=3)
instances = synth_generate(config)
schema = synth_schema(config.K)
positives = [i for i in instances if i.relation != "NA"]
noisy = sum(i.true_relation != i.relation for i in positives)
print(f"{len(instances)} sentences, {noisy / len(positives):.2f} of positive-bag sentences are noise")
print("example:", " ".join(positives[0].tokens), "->", positives[0].relation,
      f"(truly {positives[0].true_relation})")

# %% [markdown]
# Writing and reading back the canonical format is lossless.

# %%
write_corpus(instances, work / "corpus.jsonl")
schema.save(work / "schema.json")
assert load_corpus(work / "corpus.jsonl", schema) == instances
print((work / "corpus.jsonl").read_text().splitlines()[0])

# %% [markdown]
# Training bags are keyed by pair and relation, evaluation bags by pair
# only. Validation holds out whole entity pairs.

# %%
train_bags = group_bags(instances, "train")
eval_bags = group_bags(instances, "eval")
train, val = split_validation(train_bags, 0.1, seed=0)
print(f"{len(train_bags)} training bags, {len(eval_bags)} evaluation bags")
print(f"split: {len(train)} train / {len(val)} validation bags")
print("bag sizes:", sorted(Counter(len(b) for b in train_bags).items()))

vocab = build_vocabulary(instances, dim=50, seed=0)
print(f"vocabulary of {len(vocab)} tokens, padding row zero: {not vocab.embeddings[0].any()}")
