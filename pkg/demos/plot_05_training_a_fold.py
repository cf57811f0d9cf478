"""
Training one fold
=================

Weighted MSE, AdamW and a plateau scheduler drive the epoch loop; the
weights with the lowest validation loss are restored at the end. The demo
trains for 40 epochs instead of the default 200 to stay quick.
"""

from semlp.core_net import make_rng
from semlp.data import GeneratorConfig, generate_dataset, kfold_split
from semlp.se_mlp import SEMLPConfig, build_variant
from semlp.training import TrainConfig, evaluate_model, train_fold

dataset = generate_dataset(g=GeneratorConfig(noise_enabled=False))
train_idx, val_idx = kfold_split(dataset, 4, seed=0).pairs()[0]
train = [dataset[i] for i in train_idx]
val = [dataset[i] for i in val_idx]

cfg = TrainConfig(max_epochs=40, seed=0)
model = build_variant(SEMLPConfig(), make_rng(0))
model, report = train_fold(model, train, val, cfg)

for row in report.history()[::8]:
    print(f"epoch {row['epoch']:>3}  train {row['train_loss']:.5f}  val {row['val_loss']:.5f}  lr {row['lr']:.1e}")
print("best epoch", report.best_epoch, "val loss", round(report.best_val_loss, 6))

# metrics are computed after mapping predictions back to g and ms
metrics = evaluate_model(model, val)
print(f"peak  R2 {metrics.peak.r2:.4f}  RMSE {metrics.peak.rmse:.1f} g")
print(f"width R2 {metrics.width.r2:.4f}  RMSE {metrics.width.rmse:.4f} ms")
