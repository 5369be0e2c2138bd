"""
Held-out evaluation and checkpoint ensembles
============================================

Each evaluation bag contributes one score per real relation. Scores are
ranked and compared against gold triples, giving a precision/recall curve,
precision at N, and average precision. Ensembles average per-sentence
probabilities over the last few checkpoints before selection.
"""

# %%
import tempfile
from pathlib import Path

from noisyre import metrics
from noisyre.data import build_vocabulary, group_bags, split_validation
from noisyre.encoder import EncoderConfig
from noisyre.experiment import evaluate
from noisyre.model import RelationModel
from noisyre.synth import SynthConfig, synth_generate, synth_schema
from noisyre.trainer import TrainConfig, load_ensemble, train

work = Path(tempfile.mkdtemp())
instances = synth_generate(SynthConfig(bag_count=300, seed=1))
train_bags, val_bags = split_validation(group_bags(instances, "train"), 0.1, seed=1)
model = RelationModel.create(synth_schema(5), build_vocabulary(instances, 50, 1), EncoderConfig(K=5, filters=64), 1)
result = train(model, train_bags, val_bags,
               TrainConfig(pretrain_epochs=2, total_epochs=12, checkpoint_interval=8, seed=1), work / "run")
test = synth_generate(SynthConfig(bag_count=200, seed=1001))

# %%
single = evaluate([RelationModel.load(result.best.path)], test)
ensemble = evaluate(load_ensemble(result.records, 5), test)
for name, ev in (("best checkpoint", single), ("last-5 ensemble", ensemble)):
    p = metrics.summary(ev.ranking, ev.gold, ns=(50, 100))["p_at"]
    print(f"{name:16s} AP {ev.average_precision:.4f}  P@50 {p['50']:.2f}  P@100 {p['100']:.2f}  "
          f"sentence acc {ev.sentence_accuracy:.3f}")

# %%
curve = metrics.pr_curve(ensemble.ranking, ensemble.gold)
metrics.write_pr_csv(curve, work / "pr_curve.csv")
for recall, precision, score in curve[:: max(1, len(curve) // 8)]:
    print(f"recall {recall:.2f} precision {precision:.2f} (score {score:.3f})")
