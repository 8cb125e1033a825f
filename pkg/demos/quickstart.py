"""Train a deep embedding model on a synthetic benchmark and compare it with ridge.

    python demos/quickstart.py
"""

from demzsl import ridge
from demzsl.data import SynthSpec, synth_generate
from demzsl.model import TrainConfig, build_model, evaluate, train

ds = synth_generate(SynthSpec(seed=0))
print(f"{ds.features.shape[1]} images, {len(ds.seen)} seen and {len(ds.unseen)} unseen classes")

# closed-form baseline, lambda picked on held-out seen classes
lam, _ = ridge.select_lambda(ds, "s2v", seed=0)
baseline = ridge.fit_direction(ds, lam, "s2v")
print(f"ridge (lambda={lam:g}) unseen hit@1: {ridge.ridge_accuracy(baseline, ds):.3f}")

cfg = TrainConfig(epochs=60, lam=1e-3, seed=0)
model = build_model(ds, cfg)
_, history = train(model, ds, cfg)
print(f"training loss {history[0]:.3f} -> {history[-1]:.3f}")
scores = evaluate(model, ds, ks=(1, 2, 5))
print("deep embedding unseen " + ", ".join(f"hit@{k}: {v:.3f}" for k, v in scores.items()))
