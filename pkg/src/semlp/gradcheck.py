"""Analytic-vs-numeric gradient suite for every layer type and the assembled variants.

Each check builds a small random instance, computes backpropagated gradients,
and compares them with central differences. During probing the dropout masks
are replayed from a fixed seed and batchnorm running statistics are left
untouched, so the probed loss is a deterministic function of the parameters.

The pass criterion is the normwise relative error of each gradient tensor,
``max|a - n| / max(max|a|, max|n|, floor)``. The elementwise figure is also
reported; on components that happen to sit near zero it measures the O(h^2)
truncation of the difference quotient rather than the backward pass.
"""

import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import core_net
from .core_net import TRAIN, BatchNorm, Dense, Dropout, GELU, finite_difference_grad, make_rng
from .errors import ExtrapolationWarning
from .se_mlp import SEBlock, SEMLPConfig, build_variant
from .training import wmse_loss

STEP = 1e-4
TOLERANCE = 1e-4
# denominator floor; keeps all-zero gradients meaningful
ERROR_FLOOR = 1e-6


def normwise_error(analytic, numeric, floor=ERROR_FLOOR):
    a = np.abs(np.asarray(analytic, dtype=np.float64))
    n = np.abs(np.asarray(numeric, dtype=np.float64))
    diff = np.abs(np.asarray(analytic, dtype=np.float64) - np.asarray(numeric, dtype=np.float64))
    return float(diff.max() / max(a.max(), n.max(), floor))


@dataclass
class CheckResult:
    name: str
    worst: float
    param: str
    seed: int
    elementwise: float = 0.0

    @property
    def passed(self):
        return self.worst < TOLERANCE


def _compare(names, analytic, numeric):
    """``(worst normwise error, tensor name, worst elementwise error)`` over the tensors."""
    worst, where, elem = 0.0, names[0], 0.0
    for name, a, n in zip(names, analytic, numeric):
        if not a.size:
            continue
        err = normwise_error(a, n)
        elem = max(elem, float(core_net.relative_error(a, n, ERROR_FLOOR).max()))
        if err > worst or not np.isfinite(err):
            worst, where = err, name
    return worst, where, elem


def _layer_check(layer, x, seed, take_rng=False):
    """Loss ``sum(R * layer(x))`` with a fixed random projection ``R``."""
    rng = make_rng(seed, 11)
    out_shape = layer.forward(x, TRAIN, make_rng(seed, 12)).shape if take_rng else layer.forward(x, TRAIN).shape
    proj = rng.standard_normal(out_shape)

    def forward():
        if take_rng:
            return layer.forward(x, TRAIN, make_rng(seed, 12))
        return layer.forward(x, TRAIN)

    def loss():
        return float(np.sum(proj * forward()))

    if isinstance(layer, BatchNorm):
        layer.track_running_stats = False
    for _, _, g in layer.params():
        g.fill(0.0)
    forward()
    grad_x = layer.backward(proj)
    names = ["input"] + [n for n, _, _ in layer.params()]
    analytic = [grad_x] + [g.copy() for _, _, g in layer.params()]
    numeric = finite_difference_grad(loss, [x] + [v for _, v, _ in layer.params()], STEP)
    return _compare(names, analytic, numeric)


def check_dense(seed):
    rng = make_rng(seed, 10)
    layer = Dense(5, 4, rng)
    layer.bias[:] = rng.normal(0.0, 0.1, 4)
    return _layer_check(layer, rng.uniform(0, 1, (8, 5)), seed)


def check_batchnorm(seed):
    rng = make_rng(seed, 10)
    layer = BatchNorm(4)
    layer.gamma[:] = rng.uniform(0.5, 1.5, 4)
    layer.beta[:] = rng.normal(0.0, 0.1, 4)
    return _layer_check(layer, rng.normal(0.0, 1.0, (8, 4)), seed)


def check_gelu(seed):
    rng = make_rng(seed, 10)
    return _layer_check(GELU(), rng.normal(0.0, 2.0, (8, 4)), seed)


def check_dropout(seed):
    rng = make_rng(seed, 10)
    return _layer_check(Dropout(0.1), rng.normal(0.0, 1.0, (8, 4)), seed, take_rng=True)


def check_se(seed):
    rng = make_rng(seed, 10)
    layer = SEBlock(8, 2, rng)
    for _, v, _ in layer.params():
        if v.ndim == 1:
            v[:] = rng.normal(0.0, 0.1, v.shape)
    return _layer_check(layer, rng.normal(0.0, 1.0, (8, 8)), seed)


def check_wmse(seed):
    rng = make_rng(seed, 10)
    pred = rng.normal(0.0, 1.0, (8, 2))
    target = rng.normal(0.0, 1.0, (8, 2))
    _, grad = wmse_loss(pred, target)
    numeric = finite_difference_grad(lambda: wmse_loss(pred, target)[0], [pred], STEP)
    return _compare(["pred"], [grad], numeric)


def check_model(seed, variant="se-mlp", hidden=8, batch=8):
    """Gradient of the weighted MSE with respect to every model parameter and the input."""
    cfg = SEMLPConfig.for_variant(variant, hidden_dims=(hidden,) * 3)
    model = build_variant(cfg, make_rng(seed, 10))
    rng = make_rng(seed, 13)
    for bn in model.batchnorms():
        bn.gamma[:] = rng.uniform(0.5, 1.5, bn.gamma.shape)
        bn.beta[:] = rng.normal(0.0, 0.1, bn.beta.shape)
    x = rng.uniform(0.0, 1.0, (batch, cfg.input_dim))
    y = rng.uniform(0.0, 1.0, (batch, 2))

    def loss():
        return wmse_loss(model.forward(x, TRAIN, make_rng(seed, 14)), y)[0]

    with model.frozen_statistics(), warnings.catch_warnings():
        # probing x + h can step just outside [0, 1]
        warnings.simplefilter("ignore", ExtrapolationWarning)
        model.zero_grad()
        _, g = wmse_loss(model.forward(x, TRAIN, make_rng(seed, 14)), y)
        grad_x = model.backward(g)
        params = model.parameters()
        analytic = [grad_x] + [gr.copy() for _, _, gr in params]
        numeric = finite_difference_grad(loss, [x] + [v for _, v, _ in params], STEP)
    return _compare(["input"] + [n for n, _, _ in params], analytic, numeric)


CHECKS = {
    "dense": check_dense,
    "batchnorm": check_batchnorm,
    "gelu": check_gelu,
    "dropout": check_dropout,
    "se": check_se,
    "wmse": check_wmse,
    "model[mlp]": lambda s: check_model(s, "mlp"),
    "model[mlp-se]": lambda s: check_model(s, "mlp-se"),
    "model[se-mlp]": lambda s: check_model(s, "se-mlp"),
}


@dataclass
class SuiteReport:
    results: list
    seconds: float

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    @property
    def worst(self):
        return max(self.results, key=lambda r: r.worst)

    def failures(self):
        return [r for r in self.results if not r.passed]

    def lines(self):
        out = [
            f"{r.name:<14} worst_rel_err={r.worst:.3e} at {r.param} (seed {r.seed}) "
            f"elementwise={r.elementwise:.1e} {'ok' if r.passed else 'FAIL'}"
            for r in self.results
        ]
        w = self.worst
        out.append(
            f"overall worst_rel_err={w.worst:.3e} in {w.name}:{w.param}; "
            f"{'PASS' if self.passed else 'FAIL'} ({self.seconds:.1f}s)"
        )
        return out


def run_suite(seeds=range(20), checks=None):
    """Run each check over ``seeds`` and keep the worst case per layer type."""
    t0 = time.perf_counter()
    results = []
    for name, fn in (checks or CHECKS).items():
        worst = CheckResult(name, 0.0, "-", -1)
        elem = 0.0
        for seed in seeds:
            err, param, e = fn(seed)
            elem = max(elem, e)
            if err > worst.worst or not np.isfinite(err):
                worst = CheckResult(name, err, param, seed)
        worst.elementwise = elem
        results.append(worst)
    return SuiteReport(results, time.perf_counter() - t0)
