"""
Saving, loading and predicting
==============================

A model file embeds its configuration, weights, batchnorm statistics and the
normalization scales, and records the checksum of the paired scale file.
"""

import tempfile
import warnings
from pathlib import Path

import numpy as np

from semlp.core_net import make_rng
from semlp.data import GeneratorConfig, denormalize_outputs, fit_norm_params, generate_dataset, normalize_matrix
from semlp.errors import ChecksumError, ExtrapolationWarning
from semlp.se_mlp import SEMLPConfig, build_variant
from semlp.serialization import deserialize_model, load_model, persist_norm_params, save_model, serialize_model

dataset = generate_dataset(g=GeneratorConfig(noise_enabled=False))
model = build_variant(SEMLPConfig(), make_rng(0))
model.norm_params = fit_norm_params(dataset)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    persist_norm_params(model.norm_params, tmp / "fold_1.norm")
    save_model(model, tmp / "fold_1.model")
    loaded = load_model(tmp / "fold_1.model", tmp / "fold_1.norm")

x = make_rng(1).uniform(0.0, 1.0, (5, 5))
print("max prediction change:", np.max(np.abs(loaded.predict(x) - model.predict(x))))

# any corrupted byte is caught by the checksum
blob = bytearray(serialize_model(model))
blob[100] ^= 0xFF
try:
    deserialize_model(bytes(blob))
except ChecksumError as exc:
    print("rejected:", exc)

# physical-unit prediction; out-of-range conditions are flagged, not refused
row = np.array([[150.0, 2000.0, 60, 8, 2]])
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    y = loaded.predict(normalize_matrix(row, loaded.norm_params))
print("peak, width:", denormalize_outputs(y, loaded.norm_params)[0])
print("warnings:", [w.category.__name__ for w in caught if issubclass(w.category, ExtrapolationWarning)])
