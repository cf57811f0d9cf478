"""Squeeze-and-excitation gating, residual fusion and the three-block SE-MLP.

Each block runs ``dense -> batchnorm -> GELU -> dropout`` and, when enabled,
re-weights its channels with an SE gate computed from the block output. A
learned linear projection of the (normalized) input is added to the third
block's output when the residual shortcut is enabled, and a linear head maps
the result to the two normalized targets (peak, width).
"""

import contextlib
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .core_net import (
    EVAL,
    GELU,
    INIT_SCHEMES,
    TRAIN,
    BatchNorm,
    Dense,
    Dropout,
    as_matrix,
    dense_forward,
    gelu,
    make_rng,
    sigmoid,
)
from .errors import ConfigError, DimensionError, ExtrapolationWarning, StateError

VARIANTS = {
    "mlp": (False, False),
    "mlp-se": (True, False),
    "se-mlp": (True, True),
}
VARIANT_LABELS = {
    "mlp": "Three-layer MLP",
    "mlp-se": "Three-layer MLP + SE",
    "se-mlp": "SE-MLP",
}

# inputs are min-max scaled to [0, 1] on the training partition
_RANGE_SLACK = 1e-9


@dataclass
class SEMLPConfig:
    input_dim: int = 5
    hidden_dims: tuple = (128, 128, 128)
    reduction_ratio: int = 2
    dropout_rate: float = 0.1
    use_se: bool = True
    use_residual: bool = True
    output_dim: int = 2
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    init: str = "fan_in"

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)

    @classmethod
    def for_variant(cls, variant, **overrides):
        try:
            use_se, use_residual = VARIANTS[variant]
        except KeyError:
            raise ConfigError(
                f"unknown variant {variant!r}; expected one of {sorted(VARIANTS)}"
            ) from None
        return cls(use_se=use_se, use_residual=use_residual, **overrides)

    @property
    def variant(self):
        for name, flags in VARIANTS.items():
            if flags == (self.use_se, self.use_residual):
                return name
        raise ConfigError(
            f"(use_se={self.use_se}, use_residual={self.use_residual}) is not a supported variant"
        )

    def validate(self):
        if len(self.hidden_dims) != 3:
            raise ConfigError(f"expected three hidden widths, got {self.hidden_dims}")
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ConfigError("layer widths must be positive")
        if self.reduction_ratio < 1:
            raise ConfigError("reduction_ratio must be a positive integer")
        for h in self.hidden_dims:
            if h % self.reduction_ratio:
                raise ConfigError(
                    f"hidden width {h} is not divisible by reduction ratio {self.reduction_ratio}"
                )
        if self.output_dim != 2:
            raise ConfigError("the model predicts exactly two targets (peak, width)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")
        if self.init not in INIT_SCHEMES:
            raise ConfigError(f"init must be one of {INIT_SCHEMES}, got {self.init!r}")
        self.variant  # raises for (use_se=False, use_residual=True)
        return self

    def to_dict(self):
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def se_squeeze(x):
    """Global average pooling over a 1x1 spatial extent, i.e. the identity on vector features."""
    return as_matrix(x)


def se_excitation(z, se):
    """Channel gates ``sigmoid(W2 gelu(W1 z + b1) + b2)``, each strictly inside (0, 1)."""
    z = as_matrix(z)
    if z.shape[1] != se.channels:
        raise DimensionError(f"input shape {z.shape} does not match {se.channels} SE channels")
    return sigmoid(dense_forward(gelu(dense_forward(z, se.reduce)), se.expand))


def se_scale(x, s):
    x = as_matrix(x)
    s = as_matrix(s)
    if x.shape != s.shape:
        raise DimensionError(f"feature shape {x.shape} does not match gate shape {s.shape}")
    return s * x


def residual_fuse(h, x, proj):
    """``h + proj(x)``: add a learned projection of the block input to the extracted features."""
    h = as_matrix(h)
    shortcut = dense_forward(x, proj)
    if shortcut.shape != h.shape:
        raise DimensionError(
            f"feature shape {h.shape} does not match projected input shape {shortcut.shape}"
        )
    return h + shortcut


class SEBlock:
    kind = "se"

    def __init__(self, channels, reduction_ratio, rng=None, init="fan_in"):
        if channels % reduction_ratio:
            raise ConfigError(
                f"channel count {channels} is not divisible by reduction ratio {reduction_ratio}"
            )
        self.reduction_ratio = reduction_ratio
        self.reduce = Dense(channels, channels // reduction_ratio, rng, init)
        self.act = GELU()
        self.expand = Dense(channels // reduction_ratio, channels, rng, init)
        self.cache = None

    @property
    def channels(self):
        return self.expand.out_dim

    def forward(self, x, mode=EVAL):
        z = se_squeeze(x)
        a = self.reduce.forward(z, mode)
        e = self.expand.forward(self.act.forward(a, mode), mode)
        s = sigmoid(e)
        self.cache = (x, s) if mode == TRAIN else None
        return se_scale(x, s)

    def backward(self, grad_out):
        if self.cache is None:
            raise StateError("SE backward called without a train-mode forward pass")
        x, s = self.cache
        grad_e = grad_out * x * s * (1.0 - s)
        grad_z = self.reduce.backward(self.act.backward(self.expand.backward(grad_e)))
        return grad_out * s + grad_z

    def params(self):
        return [(f"reduce.{n}", v, g) for n, v, g in self.reduce.params()] + [
            (f"expand.{n}", v, g) for n, v, g in self.expand.params()
        ]


class Block:
    """One hidden stage: dense, batchnorm, GELU, dropout, optional SE gate."""

    def __init__(self, in_dim, out_dim, cfg, rng):
        self.dense = Dense(in_dim, out_dim, rng, cfg.init)
        self.bn = BatchNorm(out_dim, momentum=cfg.bn_momentum, eps=cfg.bn_eps)
        self.act = GELU()
        self.drop = Dropout(cfg.dropout_rate)
        self.se = SEBlock(out_dim, cfg.reduction_ratio, rng, cfg.init) if cfg.use_se else None

    def forward(self, x, mode, rng):
        h = self.dense.forward(x, mode)
        h = self.bn.forward(h, mode)
        h = self.act.forward(h, mode)
        h = self.drop.forward(h, mode, rng)
        if self.se is not None:
            h = self.se.forward(h, mode)
        return h

    def backward(self, grad):
        if self.se is not None:
            grad = self.se.backward(grad)
        grad = self.drop.backward(grad)
        grad = self.act.backward(grad)
        grad = self.bn.backward(grad)
        return self.dense.backward(grad)

    def named_layers(self):
        out = [("dense", self.dense), ("bn", self.bn)]
        if self.se is not None:
            out.append(("se", self.se))
        return out


class SEMLPModel:
    """Three-block perceptron with optional SE gates and an input shortcut.

    ``norm_params`` is the :class:`~semlp.data.NormParams` fitted on the
    training partition; it is carried along so a saved model can always
    map its outputs back to physical units.
    """

    def __init__(self, config, rng=None, norm_params=None):
        config.validate()
        self.config = config
        dims = (config.input_dim,) + config.hidden_dims
        self.blocks = [Block(dims[i], dims[i + 1], config, rng) for i in range(3)]
        self.residual_projection = (
            Dense(config.input_dim, config.hidden_dims[-1], rng, config.init)
            if config.use_residual
            else None
        )
        self.head = Dense(config.hidden_dims[-1], config.output_dim, rng, config.init)
        self.norm_params = norm_params

    # ---- forward / backward -------------------------------------------------

    def forward(self, x, mode=EVAL, rng=None):
        x = as_matrix(x)
        if x.shape[1] != self.config.input_dim:
            raise DimensionError(
                f"input shape {x.shape} does not match model input_dim {self.config.input_dim}"
            )
        if np.any(x < -_RANGE_SLACK) or np.any(x > 1.0 + _RANGE_SLACK):
            warnings.warn(
                "normalized inputs fall outside [0, 1]; predictions are extrapolated",
                ExtrapolationWarning,
                stacklevel=2,
            )
        h = x
        for block in self.blocks:
            h = block.forward(h, mode, rng)
        if self.residual_projection is not None:
            h = h + self.residual_projection.forward(x, mode)
        return self.head.forward(h, mode)

    def backward(self, grad_out):
        """Accumulate parameter gradients for the last train-mode forward pass.

        Returns the gradient with respect to the model input.
        """
        grad_h = self.head.backward(as_matrix(grad_out))
        grad_x = 0.0
        if self.residual_projection is not None:
            grad_x = self.residual_projection.backward(grad_h)
        grad = grad_h
        for block in reversed(self.blocks):
            grad = block.backward(grad)
        return grad + grad_x

    def predict(self, x):
        return self.forward(x, EVAL)

    # ---- parameter access ----------------------------------------------------

    def named_layers(self):
        out = []
        for i, block in enumerate(self.blocks):
            out.extend((f"block{i}.{name}", layer) for name, layer in block.named_layers())
        if self.residual_projection is not None:
            out.append(("residual", self.residual_projection))
        out.append(("head", self.head))
        return out

    def parameters(self):
        """``[(name, value, grad), ...]`` in a fixed order; arrays are live references."""
        return [
            (f"{prefix}.{name}", value, grad)
            for prefix, layer in self.named_layers()
            for name, value, grad in layer.params()
        ]

    def zero_grad(self):
        for _, _, grad in self.parameters():
            grad.fill(0.0)

    def batchnorms(self):
        return [block.bn for block in self.blocks]

    def state_arrays(self):
        """Every array needed to reproduce eval-mode predictions, keyed by stable names."""
        state = {name: value for name, value, _ in self.parameters()}
        for i, bn in enumerate(self.batchnorms()):
            state[f"block{i}.bn.running_mean"] = bn.running_mean
            state[f"block{i}.bn.running_var"] = bn.running_var
        return dict(sorted(state.items()))

    def snapshot(self):
        return {k: v.copy() for k, v in self.state_arrays().items()}

    def load_snapshot(self, snap):
        state = self.state_arrays()
        if set(snap) != set(state):
            missing = sorted(set(state) ^ set(snap))
            raise DimensionError(f"snapshot keys do not match model layout: {missing}")
        for name, target in state.items():
            src = np.asarray(snap[name], dtype=np.float64)
            if src.shape != target.shape:
                raise DimensionError(
                    f"{name}: snapshot shape {src.shape} does not match model shape {target.shape}"
                )
            target[...] = src

    @contextlib.contextmanager
    def frozen_statistics(self):
        """Run train-mode passes without touching the batchnorm running statistics."""
        saved = [bn.track_running_stats for bn in self.batchnorms()]
        for bn in self.batchnorms():
            bn.track_running_stats = False
        try:
            yield self
        finally:
            for bn, flag in zip(self.batchnorms(), saved):
                bn.track_running_stats = flag


def model_forward(m, x, mode=EVAL, rng=None):
    return m.forward(x, mode, rng)


def build_variant(config, rng=0):
    """Freshly initialized model. ``rng`` may be a seed or a numpy Generator."""
    config.validate()
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    return SEMLPModel(config, rng)
