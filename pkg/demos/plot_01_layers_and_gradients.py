"""
Layers with hand-written backward passes
========================================

Dense, batch normalization, GELU and dropout each keep what their backward
pass needs in a cache. Central differences confirm the analytic gradients.
"""

import numpy as np

from semlp.core_net import EVAL, TRAIN, BatchNorm, Dense, Dropout, GELU, gelu, make_rng
from semlp.gradcheck import run_suite

# every random stream comes from one integer seed
rng = make_rng(0)
x = rng.uniform(0.0, 1.0, (6, 5))

# a dense layer maps 5 features to 4
dense = Dense(5, 4, rng)
h = dense.forward(x, TRAIN)
print("dense output shape:", h.shape)

# batch normalization: batch statistics in train mode, running statistics in eval mode
bn = BatchNorm(4)
z = bn.forward(h, TRAIN)
print("per-feature mean after batchnorm:", np.round(z.mean(axis=0), 12))
print("running mean after one batch:", np.round(bn.running_mean, 4))

# exact GELU, 0.5 x (1 + erf(x / sqrt 2))
print("gelu(1) =", float(gelu(1.0)))

# inverted dropout keeps the expectation; eval mode is the identity
drop = Dropout(0.1)
a = drop.forward(GELU().forward(z, TRAIN), TRAIN, rng)
print("eval-mode dropout is identity:", np.array_equal(drop.forward(z, EVAL), z))

# backward needs a train-mode cache; eval mode clears it
grad_in = dense.backward(bn.backward(np.ones_like(z)))
print("gradient w.r.t. input:", grad_in.shape)

# the full suite over a few seeds (the CLI runs twenty: semlp gradcheck)
report = run_suite(range(3))
print("\n".join(report.lines()))
