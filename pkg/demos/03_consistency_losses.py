"""The two consistency regularizers on a single batch, step by step.

AKC (adaptive knowledge consistency) penalizes divergence between the
frozen source extractor's features and the current target extractor's
features, but only on examples the source model recognizes confidently
(low prediction entropy). ARC (adaptive representation consistency)
penalizes the MMD between confidently predicted labeled and unlabeled
representation sets, stabilized by replay buffers of recent selections.
"""

import numpy as np

from akcarc.consistency import (
    GateConfig,
    ReplayBuffer,
    akc_loss,
    akc_weights,
    arc_loss,
)
from akcarc.model import Classifier, LinearHead, MlpExtractor, ModelPair
from akcarc.numerics import entropy_rows, mmd2, softmax_rows

rng = np.random.default_rng(0)

# a source/target pair whose target extractor has drifted a little
ext = MlpExtractor([8, 16, 6], rng)
source = Classifier(ext, LinearHead(5, 6, rng))
tgt_ext = ext.copy()
for w in tgt_ext.weights:
    w += rng.normal(0, 0.05, size=w.shape)
pair = ModelPair(source=source, target=Classifier(tgt_ext, LinearHead(3, 6, rng)))

x = rng.normal(size=(12, 8))
gate = GateConfig.default(n_source_classes=5, n_target_classes=3)
print(f"gates: eps_k = 0.7 ln 5 = {gate.eps_k:.3f} nats, "
      f"eps_r = 0.7 ln 3 = {gate.eps_r:.3f} nats")

# --- AKC -------------------------------------------------------------
probs = softmax_rows(source.forward(x))
ents = entropy_rows(probs)
w = akc_weights(source, x, gate.eps_k)
print(f"\nsource prediction entropies: {np.round(ents, 2).tolist()}")
print(f"AKC gate weights:            {w.astype(int).tolist()}")

value, grads, frac = akc_loss(pair, x, gate.eps_k, mode="mse")
print(f"AKC loss {value:.4f}, selected fraction {frac:.2f}")
print(f"gradient keys (target extractor only): {sorted(grads)}")

# identical extractors -> zero penalty regardless of the gate
same = ModelPair(source=source, target=Classifier(ext.copy(), LinearHead(3, 6)))
v0, _, _ = akc_loss(same, x, gate.eps_k)
print(f"with theta == theta0 the penalty is exactly {v0}")

# --- ARC -------------------------------------------------------------
buf_l = ReplayBuffer(capacity=64, k=64)
buf_u = ReplayBuffer(capacity=64, k=64)
x_l = rng.normal(size=(6, 8))
x_u = rng.normal(size=(10, 8)) + 0.3  # slightly shifted unlabeled stream

print("\nARC over three steps (buffers fill up):")
for step in range(3):
    v, _, frac_l, frac_u = arc_loss(pair, x_l, x_u, np.log(3), buf_l, buf_u)
    print(f"  step {step}: R_R = {v:.5f}, selected "
          f"{frac_l:.2f} labeled / {frac_u:.2f} unlabeled, "
          f"buffers hold {len(buf_l)}/{len(buf_u)} rows")

# the penalty is the MMD of the fetched sets; equal sets give zero
f = pair.target.extractor.forward(x_l)
print(f"\nmmd2 of a set against itself: {mmd2(f, f, [1.0]):.2e}")
