"""
Two-phase training
==================

Phase one trains the encoder with the transition frozen at the identity,
so the model first learns as if labels were clean. Phase two initializes
the transition column and trains it jointly. Checkpoints are written at a
fixed batch interval and scored on held-out validation bags.
"""

# %%
import json
import tempfile
from pathlib import Path

from noisyre.data import build_vocabulary, group_bags, split_validation
from noisyre.encoder import EncoderConfig
from noisyre.model import RelationModel
from noisyre.synth import SynthConfig, synth_generate, synth_schema
from noisyre.trainer import TrainConfig, train

run_dir = Path(tempfile.mkdtemp()) / "run"
instances = synth_generate(SynthConfig(bag_count=300, seed=0))
train_bags, val_bags = split_validation(group_bags(instances, "train"), 0.1, seed=0)

encoder = EncoderConfig(K=5, filters=64)
model = RelationModel.create(synth_schema(5), build_vocabulary(instances, 50, 0), encoder, seed=0)
config = TrainConfig(batch_size=50, pretrain_epochs=2, total_epochs=12, checkpoint_interval=8, seed=0)

# %%
result = train(model, train_bags, val_bags, config, run_dir)
for line in (run_dir / "train_log.jsonl").read_text().splitlines():
    row = json.loads(line)
    print(f"step {row['step']:3d} {row['phase']:8s} loss {row['loss']:.4f} val acc {row['val_accuracy']:.3f}")
print("best:", result.best.path.name, f"({result.best.val_accuracy:.3f})")

# %% [markdown]
# The learned first column. Entries below the first show how much each
# relation's noisy logit leans on the no-relation logit.

# %%
for label, w in zip(model.schema.labels, model.transition):
    print(f"{label:6s} {w:+.4f}")
