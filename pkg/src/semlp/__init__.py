"""Layer-wise penetration-acceleration prior prediction with an SE-MLP, in numpy."""

from .core_net import finite_difference_grad, make_rng
from .data import (
    Condition,
    GeneratorConfig,
    GridConfig,
    LayerSample,
    NormParams,
    denormalize_outputs,
    fit_norm_params,
    generate_dataset,
    kfold_split,
    read_dataset,
    write_dataset,
)
from .metrics import MetricReport, fold_aggregate, mape, nrmse, r2, rmse
from .se_mlp import SEMLPConfig, SEMLPModel, build_variant, model_forward
from .serialization import (
    deserialize_model,
    load_model,
    load_norm_params,
    persist_norm_params,
    save_model,
    serialize_model,
)
from .training import TrainConfig, ablation_suite, cross_validate, train_fold, wmse_loss

__version__ = "0.1.0"

__all__ = [
    "Condition",
    "GeneratorConfig",
    "GridConfig",
    "LayerSample",
    "MetricReport",
    "NormParams",
    "SEMLPConfig",
    "SEMLPModel",
    "TrainConfig",
    "ablation_suite",
    "build_variant",
    "cross_validate",
    "denormalize_outputs",
    "deserialize_model",
    "finite_difference_grad",
    "fit_norm_params",
    "fold_aggregate",
    "generate_dataset",
    "kfold_split",
    "load_model",
    "load_norm_params",
    "make_rng",
    "mape",
    "model_forward",
    "nrmse",
    "persist_norm_params",
    "r2",
    "read_dataset",
    "rmse",
    "save_model",
    "serialize_model",
    "train_fold",
    "wmse_loss",
    "write_dataset",
]
