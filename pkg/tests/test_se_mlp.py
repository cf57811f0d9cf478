import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semlp.core_net import EVAL, TRAIN, Dense, make_rng
from semlp.errors import ConfigError, DimensionError, ExtrapolationWarning
from semlp.se_mlp import (
    VARIANTS,
    SEBlock,
    SEMLPConfig,
    SEMLPModel,
    build_variant,
    model_forward,
    residual_fuse,
    se_excitation,
    se_scale,
    se_squeeze,
)
from scipy.special import erf


def _small(variant="se-mlp", **kw):
    return SEMLPConfig.for_variant(variant, hidden_dims=(8, 8, 8), **kw)


def _dense(weight, bias):
    layer = Dense(np.shape(weight)[1], np.shape(weight)[0])
    layer.weight[...] = weight
    layer.bias[...] = bias
    return layer


# ---- squeeze / excitation / scale ---------------------------------------------


def test_squeeze_is_identity():
    x = np.array([[1.0, 2.0, 3.0]])
    assert se_squeeze(x).tobytes() == x.tobytes()
    assert not se_squeeze(np.zeros((2, 3))).any()


def test_excitation_zero_weights_gives_half():
    se = SEBlock(4, 2)
    np.testing.assert_array_equal(se_excitation(make_rng(0).standard_normal((3, 4)), se), 0.5)


def test_excitation_hand_example():
    se = SEBlock(2, 2)
    se.reduce.weight[...] = [[1.0, 0.0]]
    se.expand.bias[...] = [0.0, math.log(3.0)]
    np.testing.assert_allclose(se_excitation([[0.4, -2.0]], se), [[0.5, 0.75]], atol=1e-15)


def test_excitation_shape_mismatch():
    with pytest.raises(DimensionError):
        se_excitation(np.ones((1, 3)), SEBlock(4, 2))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 6), elements=st.floats(-50, 50)), st.integers(0, 1000))
def test_gates_strictly_inside_unit_interval(z, seed):
    se = SEBlock(6, 2, make_rng(seed))
    s = se_excitation(z, se)
    assert np.all(s > 0) and np.all(s < 1)


def test_scale_examples():
    x = make_rng(1).standard_normal((2, 3))
    assert se_scale(x, np.ones_like(x)).tobytes() == x.tobytes()
    assert not se_scale(x, np.zeros_like(x)).any()
    np.testing.assert_array_equal(se_scale([[2.0, 4.0]], [[0.5, 0.25]]), [[1.0, 1.0]])
    with pytest.raises(DimensionError):
        se_scale(np.ones((1, 2)), np.ones((1, 3)))


def test_se_block_uses_gelu_inside_the_gate():
    se = SEBlock(2, 2, make_rng(3))
    z = np.array([[0.3, -0.7]])
    a = z @ se.reduce.weight.T + se.reduce.bias
    g = 0.5 * a * (1 + erf(a / math.sqrt(2)))
    e = g @ se.expand.weight.T + se.expand.bias
    np.testing.assert_allclose(se_excitation(z, se), 1 / (1 + np.exp(-e)), atol=1e-15)
    np.testing.assert_allclose(se.forward(z, EVAL), z / (1 + np.exp(-e)), atol=1e-15)


# ---- residual fusion ----------------------------------------------------------------


def test_residual_examples():
    x = np.array([[0.2, 0.5]])
    np.testing.assert_array_equal(residual_fuse(np.zeros((1, 2)), x, _dense(np.eye(2), [0, 0])), x)
    h = np.array([[4.0, -1.0]])
    np.testing.assert_array_equal(residual_fuse(h, x, Dense(2, 2)), h)
    out = residual_fuse([[1.0, 1.0]], [[2.0]], _dense([[1.0], [3.0]], [0.0, 0.0]))
    np.testing.assert_array_equal(out, [[3.0, 7.0]])
    with pytest.raises(DimensionError):
        residual_fuse(np.ones((1, 3)), x, Dense(2, 2))


# ---- assembly --------------------------------------------------------------------------


def test_forward_shape_and_eval_determinism():
    m = build_variant(_small(), 0)
    x = make_rng(1).random((32, 5))
    a = model_forward(m, x, EVAL)
    assert a.shape == (32, 2)
    assert a.tobytes() == model_forward(m, x, EVAL).tobytes()


def _plain_mlp(x, model):
    """Reference three-layer MLP written from scratch against the copied weights (eval mode)."""
    h = x
    for block in model.blocks:
        w, b = block.dense.weight.copy(), block.dense.bias.copy()
        bn = block.bn
        z = h @ w.T + b
        z = (z - bn.running_mean) / np.sqrt(bn.running_var + bn.eps) * bn.gamma + bn.beta
        h = 0.5 * z * (1 + erf(z / math.sqrt(2)))
    return h @ model.head.weight.T + model.head.bias


def test_plain_variant_matches_independent_mlp():
    m = build_variant(SEMLPConfig.for_variant("mlp", hidden_dims=(16, 16, 16)), 4)
    rng = make_rng(5)
    for bn in m.batchnorms():
        bn.running_mean[...] = rng.standard_normal(bn.num_features)
        bn.running_var[...] = rng.uniform(0.5, 2.0, bn.num_features)
        bn.gamma[...] = rng.uniform(0.5, 1.5, bn.num_features)
        bn.beta[...] = rng.standard_normal(bn.num_features)
    x = rng.random((20, 5))
    assert np.max(np.abs(m.predict(x) - _plain_mlp(x, m))) <= 1e-12


@pytest.mark.parametrize("variant", sorted(VARIANTS))
def test_variant_structure(variant):
    m = build_variant(SEMLPConfig.for_variant(variant), 0)
    use_se, use_residual = VARIANTS[variant]
    assert all((b.se is not None) == use_se for b in m.blocks)
    assert (m.residual_projection is not None) == use_residual
    assert m.head.out_dim == 2
    assert m.config.variant == variant


def test_same_seed_same_bytes():
    a = build_variant(SEMLPConfig(), 7).state_arrays()
    b = build_variant(SEMLPConfig(), 7).state_arrays()
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)
    c = build_variant(SEMLPConfig(), 8).state_arrays()
    assert any(a[k].tobytes() != c[k].tobytes() for k in a)


def test_config_errors():
    with pytest.raises(ConfigError):
        build_variant(SEMLPConfig(hidden_dims=(64, 63, 64)), 0)
    with pytest.raises(ConfigError):
        SEMLPConfig(use_se=False, use_residual=True).validate()
    with pytest.raises(ConfigError):
        SEMLPConfig.for_variant("transformer")
    with pytest.raises(ConfigError):
        SEMLPConfig(hidden_dims=(8, 8)).validate()


def test_input_dimension_checked():
    with pytest.raises(DimensionError):
        build_variant(_small(), 0).predict(np.zeros((2, 4)))


def test_out_of_range_inputs_warn():
    m = build_variant(_small(), 0)
    with pytest.warns(ExtrapolationWarning):
        m.predict(np.full((2, 5), 1.5))


def test_shortcut_carries_signal_when_main_path_dead():
    m = build_variant(_small(), 1)
    for block in m.blocks:
        for _, value, _ in block.dense.params() + block.se.params():
            value[...] = 0.0
        block.bn.running_mean[...] = 0.0
    x = make_rng(2).random((6, 5))
    # the main path then contributes 0.5 * gelu(0) == 0
    expected = (x @ m.residual_projection.weight.T + m.residual_projection.bias) @ m.head.weight.T
    np.testing.assert_allclose(m.predict(x), expected + m.head.bias, atol=1e-15)


def test_backward_accumulates_input_gradient():
    m = build_variant(_small(dropout_rate=0.0), 2)
    x = make_rng(3).random((4, 5))
    out = m.forward(x, TRAIN, make_rng(0))
    gx = m.backward(np.ones_like(out))
    assert gx.shape == x.shape
    assert all(np.isfinite(g).all() for _, _, g in m.parameters())


def test_snapshot_round_trip_and_frozen_statistics():
    m = build_variant(_small(), 3)
    snap = m.snapshot()
    with m.frozen_statistics():
        m.forward(make_rng(0).random((8, 5)), TRAIN, make_rng(1))
    assert all(np.array_equal(m.state_arrays()[k], snap[k]) for k in snap if "running" in k)
    m.forward(make_rng(0).random((8, 5)), TRAIN, make_rng(1))
    assert not np.array_equal(m.blocks[0].bn.running_mean, snap["block0.bn.running_mean"])
    m.load_snapshot(snap)
    assert all(np.array_equal(m.state_arrays()[k], snap[k]) for k in snap)
    with pytest.raises(DimensionError):
        m.load_snapshot({"nope": np.zeros(1)})


def test_model_requires_valid_config():
    with pytest.raises(ConfigError):
        SEMLPModel(SEMLPConfig(reduction_ratio=3), make_rng(0))
