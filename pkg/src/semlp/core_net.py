"""Minimal dense-network engine: layers with hand-written backward passes.

Matrices are plain 2-D ``float64`` numpy arrays laid out as (batch, features).
Every layer keeps the tensors it needs for its backward pass in ``cache``;
the cache is filled by a train-mode forward pass and cleared by an eval-mode
one, so calling ``backward`` after inference raises :class:`StateError`.

Randomness comes from numpy's PCG64 bit generator. Independent streams are
derived from a single integer seed through :class:`numpy.random.SeedSequence`
spawn keys (see :func:`make_rng`).
"""

import math

import numpy as np
from scipy.special import erf

from .errors import BatchTooSmallError, DimensionError, StateError

TRAIN = "train"
EVAL = "eval"

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def make_rng(seed, *stream):
    """Return a PCG64 generator for ``seed`` and an integer stream key.

    ``make_rng(s, 3, 1)`` and ``make_rng(s, 3, 2)`` are statistically
    independent, and both are reproducible bit for bit on any platform.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in stream))
    return np.random.Generator(np.random.PCG64(seq))


def _check_mode(mode):
    if mode not in (TRAIN, EVAL):
        raise ValueError(f"mode must be {TRAIN!r} or {EVAL!r}, got {mode!r}")
    return mode == TRAIN


def as_matrix(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {x.shape}")
    return x


INIT_SCHEMES = ("fan_in", "glorot")


def glorot_uniform(rng, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def fan_in_uniform(rng, fan_in, fan_out):
    """Weights and biases from U(-1/sqrt(fan_in), 1/sqrt(fan_in)) (torch.nn.Linear's default)."""
    limit = 1.0 / math.sqrt(fan_in)
    weight = rng.uniform(-limit, limit, size=(fan_out, fan_in))
    bias = rng.uniform(-limit, limit, size=fan_out)
    return weight, bias


class Dense:
    """Affine map ``x @ W.T + b`` with ``W`` of shape (out_dim, in_dim).

    Without ``rng`` all parameters start at zero. ``init="glorot"`` draws
    weights from U(+-sqrt(6/(fan_in+fan_out))) and leaves biases at zero.
    """

    kind = "dense"

    def __init__(self, in_dim, out_dim, rng=None, init="fan_in"):
        if init not in INIT_SCHEMES:
            raise ValueError(f"unknown init scheme {init!r}; expected one of {INIT_SCHEMES}")
        self.bias = np.zeros(out_dim)
        if rng is None:
            self.weight = np.zeros((out_dim, in_dim))
        elif init == "glorot":
            self.weight = glorot_uniform(rng, in_dim, out_dim)
        else:
            self.weight, self.bias = fan_in_uniform(rng, in_dim, out_dim)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self.cache = None

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]

    def forward(self, x, mode=EVAL):
        out = dense_forward(x, self)
        self.cache = x if _check_mode(mode) else None
        return out

    def backward(self, grad_out):
        if self.cache is None:
            raise StateError("dense backward called without a train-mode forward pass")
        x = self.cache
        self.grad_weight += grad_out.T @ x
        self.grad_bias += grad_out.sum(axis=0)
        return grad_out @ self.weight

    def params(self):
        return [("weight", self.weight, self.grad_weight), ("bias", self.bias, self.grad_bias)]


def dense_forward(x, p):
    """Apply the affine part of a dense layer to every row of ``x``."""
    x = as_matrix(x)
    if x.shape[1] != p.weight.shape[1]:
        raise DimensionError(
            f"input shape {x.shape} does not match weight shape {p.weight.shape}"
        )
    return x @ p.weight.T + p.bias


def gelu(x):
    """Exact GELU, ``0.5 * x * (1 + erf(x / sqrt(2)))``."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def gelu_grad(x):
    x = np.asarray(x, dtype=np.float64)
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class GELU:
    kind = "gelu"

    def __init__(self):
        self.cache = None

    def forward(self, x, mode=EVAL):
        self.cache = x if _check_mode(mode) else None
        return gelu(x)

    def backward(self, grad_out):
        if self.cache is None:
            raise StateError("gelu backward called without a train-mode forward pass")
        return grad_out * gelu_grad(self.cache)

    def params(self):
        return []


class BatchNorm:
    """Per-feature batch normalization.

    Train mode normalizes with the biased batch variance and folds the batch
    statistics into the running estimates as
    ``running = (1 - momentum) * running + momentum * batch``; the running
    variance uses the unbiased estimate. Eval mode uses the running
    statistics only.
    """

    kind = "batchnorm"

    def __init__(self, num_features, momentum=0.1, eps=1e-5):
        if not 0.0 < momentum < 1.0:
            raise ValueError("momentum must lie in (0, 1)")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.gamma = np.ones(num_features)
        self.beta = np.zeros(num_features)
        self.grad_gamma = np.zeros(num_features)
        self.grad_beta = np.zeros(num_features)
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)
        self.momentum = float(momentum)
        self.eps = float(eps)
        self.track_running_stats = True
        self.cache = None

    @property
    def num_features(self):
        return self.gamma.shape[0]

    def forward(self, x, mode=EVAL):
        x = as_matrix(x)
        if x.shape[1] != self.num_features:
            raise DimensionError(
                f"input shape {x.shape} does not match {self.num_features} batchnorm features"
            )
        if not _check_mode(mode):
            self.cache = None
            x_hat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
            return self.gamma * x_hat + self.beta

        n = x.shape[0]
        if n < 2:
            raise BatchTooSmallError(f"train-mode batchnorm needs batch size >= 2, got {n}")
        mean = x.mean(axis=0)
        centered = x - mean
        var = (centered * centered).mean(axis=0)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = centered * inv_std
        if self.track_running_stats:
            m = self.momentum
            self.running_mean *= 1.0 - m
            self.running_mean += m * mean
            self.running_var *= 1.0 - m
            self.running_var += m * var * (n / (n - 1))
        self.cache = (x_hat, inv_std)
        return self.gamma * x_hat + self.beta

    def backward(self, grad_out):
        if self.cache is None:
            raise StateError("batchnorm backward called without a train-mode forward pass")
        x_hat, inv_std = self.cache
        self.grad_gamma += (grad_out * x_hat).sum(axis=0)
        self.grad_beta += grad_out.sum(axis=0)
        g = grad_out * self.gamma
        return inv_std * (g - g.mean(axis=0) - x_hat * (g * x_hat).mean(axis=0))

    def params(self):
        return [("gamma", self.gamma, self.grad_gamma), ("beta", self.beta, self.grad_beta)]


def batchnorm_forward(x, state, mode):
    return state.forward(x, mode)


def dropout(x, rate, mode, rng=None):
    """Inverted dropout. Returns ``(output, mask)``; the mask already holds the 1/(1-rate) scale."""
    x = as_matrix(x)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not _check_mode(mode) or rate == 0.0:
        return x, np.ones_like(x)
    if rng is None:
        raise StateError("train-mode dropout needs a random generator")
    keep = rng.random(x.shape) >= rate
    mask = keep / (1.0 - rate)
    return x * mask, mask


class Dropout:
    kind = "dropout"

    def __init__(self, rate):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = float(rate)
        self.cache = None

    def forward(self, x, mode=EVAL, rng=None):
        out, mask = dropout(x, self.rate, mode, rng)
        self.cache = mask if mode == TRAIN else None
        return out

    def backward(self, grad_out):
        if self.cache is None:
            raise StateError("dropout backward called without a train-mode forward pass")
        return grad_out * self.cache

    def params(self):
        return []


def finite_difference_grad(loss_fn, params, step=1e-4):
    """Central-difference gradient of ``loss_fn()`` with respect to each array in ``params``.

    The arrays are perturbed in place and restored afterwards, so ``loss_fn``
    must read them by reference. It must also be deterministic: replay the
    same dropout masks and do not let probing update running statistics.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn()
            flat[i] = orig - step
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def relative_error(analytic, numeric, floor=1e-6):
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return np.abs(a - n) / denom
