"""
Squeeze-and-excitation gates and the three model variants
=========================================================

On vector features the squeeze step is the identity, so an SE gate is a
small bottleneck network whose sigmoid outputs rescale each channel.
"""

import math

import numpy as np

from semlp.core_net import Dense, make_rng
from semlp.se_mlp import (
    VARIANT_LABELS,
    SEBlock,
    SEMLPConfig,
    build_variant,
    residual_fuse,
    se_excitation,
    se_scale,
)

# a hand-set gate: C = 2 channels, reduction ratio 2
se = SEBlock(2, 2)
se.reduce.weight[...] = [[1.0, 0.0]]
se.expand.bias[...] = [0.0, math.log(3.0)]
s = se_excitation([[0.4, -2.0]], se)
print("gates:", s)  # [0.5, 0.75]
print("rescaled:", se_scale([[0.4, -2.0]], s))

# the residual shortcut adds a learned projection of the input
proj = Dense(1, 2)
proj.weight[...] = [[1.0], [3.0]]
print("fused:", residual_fuse([[1.0, 1.0]], [[2.0]], proj))  # [[3, 7]]

# the ablation variants differ only in the SE gates and the shortcut
x = make_rng(1).uniform(0.0, 1.0, (4, 5))
for variant, label in VARIANT_LABELS.items():
    model = build_variant(SEMLPConfig.for_variant(variant), rng=0)
    n_params = sum(v.size for _, v, _ in model.parameters())
    print(f"{label:<22} parameters={n_params:>6}  eval output shape={model.predict(x).shape}")

# same seed, same initial weights
a = build_variant(SEMLPConfig(), rng=7).state_arrays()
b = build_variant(SEMLPConfig(), rng=7).state_arrays()
print("reproducible init:", all(np.array_equal(a[k], b[k]) for k in a))
