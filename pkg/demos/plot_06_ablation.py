"""
Cross-validation and the ablation comparison
============================================

The three variants are cross-validated on one shared split. Widths and
epochs are cut down here so the demo finishes in seconds; ``semlp ablate``
runs the full configuration.
"""

from semlp.data import GeneratorConfig, generate_dataset
from semlp.reports import ablation_csv
from semlp.se_mlp import SEMLPConfig
from semlp.training import TrainConfig, ablation_suite

dataset = generate_dataset(g=GeneratorConfig(seed=0))
results = ablation_suite(dataset, TrainConfig(max_epochs=5, seed=0), SEMLPConfig(hidden_dims=(16, 16, 16)))

for variant, cv in results.items():
    avg = cv.average
    print(f"{variant:<7} split {cv.split_sha256[:12]}  peak RMSE {avg.peak.rmse:9.1f} g  width RMSE {avg.width.rmse:.4f} ms")

# five epochs are far too few to rank the variants; the full run is needed for that

# the same numbers as a CSV table
print(ablation_csv(results).splitlines()[0])
