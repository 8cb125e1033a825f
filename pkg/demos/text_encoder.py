"""Zero-shot recognition from free-text class descriptions.

Each synthetic class gets short sentences naming the sign of a few of its
semantic dimensions ("high3 low7"); a BiLSTM reads them and the model
is trained without ever seeing an attribute vector.

    python demos/text_encoder.py
"""

import numpy as np

from demzsl.data import Dataset, SynthSpec, synth_generate
from demzsl.model import TrainConfig, build_model, evaluate, train

base = synth_generate(SynthSpec(dim=30, semantic_dim=8, num_seen=40, num_unseen=5,
                                samples_per_class=20, seed=5))
attr = base.semantic["attribute"]
rng = np.random.default_rng(5)


def sentence(col):
    dims = rng.choice(attr.shape[0], size=5, replace=False)
    return " ".join(f"{'high' if attr[d, col] > 0 else 'low'}{d}" for d in dims)


col_of = {int(c): i for i, c in enumerate(base.class_ids)}
descriptions = {j: [sentence(col_of[int(c)]) for _ in range(3)]
                for j, c in enumerate(base.labels)}
ds = Dataset(base.features, base.labels, base.class_ids, dict(base.semantic),
             base.seen, base.unseen, descriptions)
print("example:", descriptions[0][0])

cfg = TrainConfig(modalities=("description",), optimizer="rmsprop", clip_norm=5.0, lr=3e-3,
                  epochs=40, batch_size=32, hidden=64, embed_dim=16, lstm_hidden=16,
                  max_len=12, seed=5)
model = build_model(ds, cfg)
_, history = train(model, ds, cfg)
print(f"loss {history[0]:.3f} -> {history[-1]:.3f}")
scores = evaluate(model, ds, ks=(1, 2))
print(f"unseen hit@1 {scores[1]:.3f}, hit@2 {scores[2]:.3f} (chance {1 / len(ds.unseen):.2f})")
