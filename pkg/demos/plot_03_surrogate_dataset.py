"""
The synthetic surrogate corpus
==============================

A closed-form recursion stands in for layer-by-layer penetration
simulations. It is a learnable nonlinear mapping, not a physics model.
"""

import math
import tempfile
from pathlib import Path

from semlp.data import (
    Condition,
    GeneratorConfig,
    GridConfig,
    fit_norm_params,
    generate_dataset,
    kfold_split,
    layer_response,
    normalize_features,
    normalize_peak,
    read_dataset,
    write_dataset,
)

# one condition, noise off: (peak g, width ms, entry speed m/s) per layer
clean = GeneratorConfig(noise_enabled=False)
for k, (peak, width, v) in enumerate(layer_response(Condition(94.0, 926.0, 40, 6), clean)[:3], start=1):
    print(f"layer {k}: peak {peak:9.1f} g  width {width:.4f} ms  entry speed {v:6.1f} m/s")

# 4 masses x 9 velocities x 3 grades; layer counts cycle through 6..10
grid = GridConfig()
dataset = generate_dataset(grid, GeneratorConfig(seed=0))
print(len(grid.conditions()), "conditions,", len(dataset), "layer samples")

# four folds; scales are fitted on the training part only
split = kfold_split(dataset, k=4, seed=0)
train_idx, val_idx = split.pairs()[0]
params = fit_norm_params([dataset[i] for i in train_idx])
print("fold sizes:", [len(f) for f in split.folds])
print("log_max =", round(params.log_max, 4), " width_max =", round(params.width_max, 4))

# min-max features and log-compressed peaks
print("normalized features:", normalize_features(dataset[0].condition, 1, params).round(3))
print("33750 g with log_max ln(62501):", round(normalize_peak(33750.0, params.__class__(
    params.x_min, params.x_max, math.log(62501.0), params.width_max)), 5))

# CSV round trip
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "dataset.csv"
    write_dataset(dataset, path)
    print(path.read_text().splitlines()[0])
    print("round trip equal:", read_dataset(path) == dataset)
