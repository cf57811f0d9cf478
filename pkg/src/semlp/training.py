"""Weighted MSE, AdamW, plateau scheduling, the epoch loop, cross-validation and ablation."""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core_net import EVAL, TRAIN, as_matrix, make_rng
from .data import (
    STREAM_DROPOUT,
    STREAM_INIT,
    STREAM_SHUFFLE,
    denormalize_outputs,
    feature_matrix,
    fit_norm_params,
    kfold_split,
    normalize_matrix,
    normalize_targets,
    target_matrix,
)
from .errors import ConfigError, DimensionError
from .metrics import MetricReport, fold_aggregate
from .se_mlp import VARIANTS, SEMLPConfig, build_variant


@dataclass
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 200
    lr0: float = 1e-3
    weight_decay: float = 1e-4
    plateau_factor: float = 0.5
    plateau_patience: int = 15
    lr_floor: float = 1e-6
    loss_weights: tuple = (0.7, 0.3)
    k: int = 4
    seed: int = 0
    betas: tuple = (0.9, 0.999)
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        self.loss_weights = tuple(float(w) for w in self.loss_weights)
        self.betas = tuple(float(b) for b in self.betas)

    def validate(self):
        if len(self.loss_weights) != 2 or any(w < 0 for w in self.loss_weights):
            raise ConfigError("loss_weights must be two non-negative numbers")
        if abs(sum(self.loss_weights) - 1.0) > 1e-12:
            raise ConfigError(f"loss weights must sum to 1, got {self.loss_weights}")
        if not self.lr0 > self.lr_floor > 0:
            raise ConfigError("need lr0 > lr_floor > 0")
        if not 0 < self.plateau_factor < 1:
            raise ConfigError("plateau_factor must lie in (0, 1)")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2 (batchnorm)")
        if self.max_epochs < 1 or self.plateau_patience < 0:
            raise ConfigError("max_epochs must be positive and plateau_patience non-negative")
        if self.k < 2:
            raise ConfigError("K must be at least 2")
        if self.weight_decay < 0 or self.adam_epsilon <= 0:
            raise ConfigError("weight_decay must be >= 0 and adam_epsilon > 0")
        if not all(0 <= b < 1 for b in self.betas) or len(self.betas) != 2:
            raise ConfigError("betas must be two numbers in [0, 1)")
        return self

    def to_dict(self):
        d = asdict(self)
        d["loss_weights"] = list(self.loss_weights)
        d["betas"] = list(self.betas)
        return d


def wmse_loss(pred, target, weights=(0.7, 0.3)):
    """Weighted per-column MSE. Returns ``(loss, dloss/dpred)``."""
    pred = as_matrix(pred)
    target = as_matrix(target)
    if pred.shape != target.shape or pred.shape[1] != len(weights):
        raise DimensionError(
            f"prediction shape {pred.shape} does not match target shape {target.shape}"
        )
    w = np.asarray(weights, dtype=np.float64)
    diff = pred - target
    per_column = (diff * diff).mean(axis=0)
    loss = float(per_column @ w)
    grad = diff * (2.0 * w / pred.shape[0])
    return loss, grad


# ---- AdamW ---------------------------------------------------------------------


@dataclass
class AdamWState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0


def adamw_step(params, grads, st, cfg, lr=None):
    """One AdamW update, in place. Weight decay is decoupled from the gradient.

    ``theta -= lr * m_hat / (sqrt(v_hat) + eps) + lr * weight_decay * theta``
    """
    lr = cfg.lr0 if lr is None else lr
    b1, b2 = cfg.betas
    if not st.m:
        st.m = [np.zeros_like(p) for p in params]
        st.v = [np.zeros_like(p) for p in params]
    st.t += 1
    c1 = 1.0 - b1 ** st.t
    c2 = 1.0 - b2 ** st.t
    for p, g, m, v in zip(params, grads, st.m, st.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        step = (m / c1) / (np.sqrt(v / c2) + cfg.adam_epsilon)
        p -= lr * step + lr * cfg.weight_decay * p
    return params


# ---- plateau scheduler -----------------------------------------------------------


@dataclass
class SchedulerState:
    best: float = math.inf
    bad_epochs: int = 0
    lr: float = 1e-3


def plateau_step(val_loss, st, cfg):
    """Halve the learning rate after more than ``plateau_patience`` epochs without a strict improvement."""
    if val_loss < st.best:
        st.best = val_loss
        st.bad_epochs = 0
    else:
        st.bad_epochs += 1
    if st.bad_epochs > cfg.plateau_patience:
        st.lr = max(st.lr * cfg.plateau_factor, cfg.lr_floor)
        st.bad_epochs = 0
    return st.lr


# ---- epoch loop --------------------------------------------------------------------


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    best_epoch: int = 0  # 1-based
    best_val_loss: float = math.inf
    wall_time: float = 0.0

    def history(self):
        return [
            {"epoch": i + 1, "train_loss": tl, "val_loss": vl, "lr": lr}
            for i, (tl, vl, lr) in enumerate(zip(self.train_loss, self.val_loss, self.lr))
        ]

    def same_numbers(self, other):
        return (
            self.train_loss == other.train_loss
            and self.val_loss == other.val_loss
            and self.lr == other.lr
            and self.best_epoch == other.best_epoch
        )


def make_batches(n, batch_size, rng):
    """Shuffled index batches; a trailing single-sample batch joins its predecessor."""
    perm = rng.permutation(n)
    batches = [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def validation_loss(model, x, y, weights):
    return wmse_loss(model.forward(x, EVAL), y, weights)[0]


def fit_arrays(model, x_train, y_train, x_val, y_val, cfg, stream=()):
    """Train on already-normalized arrays and restore the best validation snapshot.

    ``stream`` is appended to the random-stream keys so different folds draw
    different shuffles and dropout masks from the same seed.
    """
    cfg.validate()
    x_train, y_train = as_matrix(x_train), as_matrix(y_train)
    x_val, y_val = as_matrix(x_val), as_matrix(y_val)
    if len(x_train) < 2 or len(x_val) == 0:
        raise ConfigError(
            f"need at least 2 training and 1 validation samples, got {len(x_train)} and {len(x_val)}"
        )
    shuffle_rng = make_rng(cfg.seed, STREAM_SHUFFLE, *stream)
    dropout_rng = make_rng(cfg.seed, STREAM_DROPOUT, *stream)
    weights = cfg.loss_weights
    names, values, grads = zip(*model.parameters())
    opt = AdamWState()
    sched = SchedulerState(lr=cfg.lr0)
    report = TrainReport()
    best = None
    t0 = time.perf_counter()
    for epoch in range(1, cfg.max_epochs + 1):
        lr = sched.lr
        total = 0.0
        for idx in make_batches(len(x_train), cfg.batch_size, shuffle_rng):
            model.zero_grad()
            pred = model.forward(x_train[idx], TRAIN, dropout_rng)
            loss, grad = wmse_loss(pred, y_train[idx], weights)
            model.backward(grad)
            adamw_step(values, grads, opt, cfg, lr)
            total += loss * len(idx)
        val = validation_loss(model, x_val, y_val, weights)
        report.train_loss.append(total / len(x_train))
        report.val_loss.append(val)
        report.lr.append(lr)
        if val < report.best_val_loss:
            report.best_val_loss = val
            report.best_epoch = epoch
            best = model.snapshot()
        plateau_step(val, sched, cfg)
    if best is not None:
        model.load_snapshot(best)
    report.wall_time = time.perf_counter() - t0
    return model, report


def train_fold(model, train_set, val_set, cfg, stream=()):
    """Train ``model`` on samples, fitting its normalization on ``train_set`` if it has none."""
    if not train_set or not val_set:
        raise ConfigError("training and validation partitions must both be non-empty")
    if model.norm_params is None:
        model.norm_params = fit_norm_params(train_set)
    norm = model.norm_params
    x_tr = normalize_matrix(feature_matrix(train_set), norm, warn=False)
    y_tr = normalize_targets(target_matrix(train_set), norm)
    x_va = normalize_matrix(feature_matrix(val_set), norm, warn=False)
    y_va = normalize_targets(target_matrix(val_set), norm)
    return fit_arrays(model, x_tr, y_tr, x_va, y_va, cfg, stream)


def predict_physical(model, samples):
    """Eval-mode predictions in physical units (g, ms) for a list of samples."""
    x = normalize_matrix(feature_matrix(samples), model.norm_params, warn=False)
    return denormalize_outputs(model.forward(x, EVAL), model.norm_params)


def evaluate_model(model, samples):
    return MetricReport.compute(predict_physical(model, samples), target_matrix(samples))


# ---- cross-validation ----------------------------------------------------------------


@dataclass
class FoldResult:
    fold: int  # 1-based
    metrics: MetricReport
    train_report: TrainReport
    model: object = None


@dataclass
class CVReport:
    variant: str
    folds: list
    average: MetricReport
    split_sha256: str

    def rows(self):
        out = [{"fold": f"{r.fold}-Fold", **r.metrics.row()} for r in self.folds]
        out.append({"fold": "Average", **self.average.row()})
        return out


def default_fit(train_set, val_set, cfg, model_cfg, fold):
    model = build_variant(model_cfg, make_rng(cfg.seed, STREAM_INIT, fold))
    model, report = train_fold(model, train_set, val_set, cfg, stream=(fold,))
    return model, report


def _run_fold(args):
    dataset, train_idx, val_idx, cfg, model_cfg, fold, fit_fn = args
    train_set = [dataset[i] for i in train_idx]
    val_set = [dataset[i] for i in val_idx]
    model, report = fit_fn(train_set, val_set, cfg, model_cfg, fold)
    return FoldResult(fold, evaluate_model(model, val_set), report, model)


def cross_validate(dataset, cfg, model_cfg=None, split=None, fit_fn=None, n_jobs=1):
    """K-fold training with metrics computed on denormalized validation predictions.

    ``fit_fn(train_set, val_set, cfg, model_cfg, fold) -> (model, TrainReport)``
    replaces the default trainer; the returned model needs ``norm_params`` and
    an eval-mode ``forward``. Folds are independent, so ``n_jobs > 1`` runs
    them in worker processes with identical results.
    """
    cfg.validate()
    model_cfg = (model_cfg or SEMLPConfig()).validate()
    split = split or kfold_split(dataset, cfg.k, cfg.seed)
    fit_fn = fit_fn or default_fit
    jobs = [
        (dataset, tr, va, cfg, model_cfg, i, fit_fn)
        for i, (tr, va) in enumerate(split.pairs(), start=1)
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_fold, jobs))
    else:
        results = [_run_fold(j) for j in jobs]
    return CVReport(
        variant=model_cfg.variant,
        folds=results,
        average=fold_aggregate(r.metrics for r in results),
        split_sha256=split.checksum(),
    )


def ablation_suite(dataset, cfg, base_config=None, n_jobs=1):
    """Cross-validate the three variants on one shared split. Returns ``{variant: CVReport}``."""
    cfg.validate()
    base = base_config or SEMLPConfig()
    split = kfold_split(dataset, cfg.k, cfg.seed)
    out = {}
    for variant, (use_se, use_residual) in VARIANTS.items():
        model_cfg = SEMLPConfig(**{**base.to_dict(), "use_se": use_se, "use_residual": use_residual})
        out[variant] = cross_validate(dataset, cfg, model_cfg, split=split, n_jobs=n_jobs)
    return out
