"""Why the visual space is the better embedding target.

Fits ridge maps in both directions and prints how often each unseen
prototype is the nearest neighbour of a test image (N_1). Mapping images
into the semantic space shrinks them towards the origin, so a few
prototypes collect most queries; the skewness of N_1 shows it.

    python demos/hubness_direction.py
"""

import numpy as np

from demzsl import hubness, ridge
from demzsl.data import SynthSpec, synth_generate

ds = synth_generate(SynthSpec(seed=2))
models = {}
for direction in ridge.DIRECTIONS:
    lam, _ = ridge.select_lambda(ds, direction, seed=2)
    models[direction] = ridge.fit_direction(ds, lam, direction)
    acc = ridge.ridge_accuracy(models[direction], ds)
    print(f"{direction}: lambda={lam:g}, unseen hit@1 {acc:.3f}")

rep = hubness.direction_report(ds, models["s2v"], models["v2s"], k=1)
for name, dist, skew in (("semantic -> visual", rep.nk_sv, rep.skew_sv),
                         ("visual -> semantic", rep.nk_vs, rep.skew_vs)):
    counts = np.sort(dist.counts)[::-1]
    print(f"{name}: N_1 counts {counts.tolist()}, skewness {skew:+.2f}")
