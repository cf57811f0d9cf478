import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semlp import core_net
from semlp.core_net import (
    EVAL,
    TRAIN,
    BatchNorm,
    Dense,
    Dropout,
    GELU,
    dense_forward,
    dropout,
    finite_difference_grad,
    gelu,
    make_rng,
)
from semlp.errors import BatchTooSmallError, DimensionError, StateError
from semlp.training import wmse_loss


def _dense(weight, bias):
    layer = Dense(np.shape(weight)[1], np.shape(weight)[0])
    layer.weight[...] = weight
    layer.bias[...] = bias
    return layer


# ---- dense -----------------------------------------------------------------


@pytest.mark.parametrize(
    "x, w, b, expected",
    [
        ([[1, 2]], np.eye(2), [0, 0], [[1, 2]]),
        ([[1, 2]], [[0, 0], [0, 0]], [3, 4], [[3, 4]]),
        ([[1, 1]], [[2, 3]], [1], [[6]]),
    ],
)
def test_dense_forward_examples(x, w, b, expected):
    np.testing.assert_array_equal(dense_forward(x, _dense(w, b)), expected)


def test_dense_shape_mismatch_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(1, 3\).*\(2, 2\)"):
        dense_forward([[1, 2, 3]], _dense(np.eye(2), [0, 0]))


def test_dense_default_init_is_fan_in_uniform():
    layer = Dense(16, 8, make_rng(0))
    assert np.all(np.abs(layer.weight) <= 1 / 4) and np.all(np.abs(layer.bias) <= 1 / 4)
    assert np.any(layer.bias != 0)


def test_dense_glorot_init_bounds_and_zero_bias():
    layer = Dense(16, 8, make_rng(0), init="glorot")
    assert np.all(np.abs(layer.weight) <= math.sqrt(6 / 24))
    assert not layer.bias.any()


# ---- GELU --------------------------------------------------------------------


def test_gelu_examples():
    assert gelu(0.0) == 0.0
    assert abs(gelu(10.0) - 10.0) < 1e-6
    mpmath.mp.dps = 30
    oracle = float(0.5 * (1 + mpmath.erf(1 / mpmath.sqrt(2))))
    assert abs(gelu(1.0) - oracle) < 1e-12
    assert abs(gelu(1.0) - 0.841345) < 1e-5


def test_gelu_matches_high_precision_erf_on_grid():
    grid = np.linspace(-10, 10, 2001)
    mpmath.mp.dps = 30
    oracle = np.array([float(0.5 * v * (1 + mpmath.erf(v / mpmath.sqrt(2)))) for v in grid])
    assert np.max(np.abs(gelu(grid) - oracle)) < 1e-12


# ---- batchnorm -------------------------------------------------------------------


def test_batchnorm_standardizes_in_train_mode():
    rng = make_rng(1)
    x = 5.0 + 2.0 * rng.standard_normal((256, 3))
    x = (x - x.mean(0)) / x.std(0) * 2.0 + 5.0  # exact mean 5, variance 4
    bn = BatchNorm(3)
    out = bn.forward(x, TRAIN)
    assert np.all(np.abs(out.mean(0)) < 1e-10)
    assert np.all(np.abs(out.var(0) - 1.0) < 10 * bn.eps)


def test_batchnorm_constant_column_gives_zero():
    x = np.full((4, 2), 7.0)
    np.testing.assert_array_equal(BatchNorm(2).forward(x, TRAIN), np.zeros((4, 2)))


def test_batchnorm_eval_is_deterministic_and_uses_running_stats():
    bn = BatchNorm(3)
    rng = make_rng(2)
    for _ in range(5):
        bn.forward(rng.standard_normal((8, 3)), TRAIN)
    x = rng.standard_normal((5, 3))
    a = bn.forward(x, EVAL)
    b = bn.forward(x, EVAL)
    assert a.tobytes() == b.tobytes()
    expected = (x - bn.running_mean) / np.sqrt(bn.running_var + bn.eps)
    np.testing.assert_allclose(a, expected, rtol=0, atol=1e-15)


def test_batchnorm_running_statistics_update():
    bn = BatchNorm(1, momentum=0.1)
    x = np.array([[1.0], [3.0]])
    bn.forward(x, TRAIN)
    assert bn.running_mean[0] == pytest.approx(0.1 * 2.0)
    # unbiased batch variance is 2
    assert bn.running_var[0] == pytest.approx(0.9 * 1.0 + 0.1 * 2.0)
    assert np.all(bn.running_var >= 0)


def test_batchnorm_batch_of_one_rejected_in_train_mode():
    with pytest.raises(BatchTooSmallError):
        BatchNorm(2).forward(np.ones((1, 2)), TRAIN)
    BatchNorm(2).forward(np.ones((1, 2)), EVAL)


# ---- dropout ---------------------------------------------------------------------


def test_dropout_eval_is_bitwise_identity():
    x = make_rng(3).standard_normal((7, 4))
    out, mask = dropout(x, 0.5, EVAL, make_rng(0))
    assert out.tobytes() == x.tobytes()
    assert np.all(mask == 1)


def test_dropout_rate_zero_is_identity_in_train_mode():
    x = make_rng(3).standard_normal((7, 4))
    out, mask = dropout(x, 0.0, TRAIN, make_rng(0))
    np.testing.assert_array_equal(out, x)
    np.testing.assert_array_equal(mask, np.ones_like(x))


def test_dropout_preserves_expectation():
    x = make_rng(4).uniform(0.5, 2.0, (1, 5))
    rng = make_rng(5)
    total = np.zeros_like(x)
    draws = 10_000
    for _ in range(draws):
        total += dropout(x, 0.1, TRAIN, rng)[0]
    np.testing.assert_allclose(total / draws, x, rtol=0.01)


def test_dropout_masks_drop_and_rescale():
    out, mask = dropout(np.ones((100, 100)), 0.1, TRAIN, make_rng(6))
    assert set(np.unique(mask)) == {0.0, 1.0 / 0.9}
    assert 0.08 < np.mean(mask == 0) < 0.12


# ---- caches and backward -----------------------------------------------------------


@pytest.mark.parametrize("layer", [Dense(3, 2, make_rng(0)), GELU(), BatchNorm(3), Dropout(0.1)])
def test_backward_without_train_cache_raises(layer):
    x = np.ones((4, 3)) * np.arange(4)[:, None]
    if isinstance(layer, Dropout):
        layer.forward(x, EVAL, make_rng(0))
    else:
        layer.forward(x, EVAL)
    assert layer.cache is None
    with pytest.raises(StateError):
        layer.backward(np.ones((4, 3 if not isinstance(layer, Dense) else 2)))


def test_train_forward_populates_cache():
    layer = Dense(3, 2, make_rng(0))
    layer.forward(np.ones((2, 3)), TRAIN)
    assert layer.cache is not None


def test_single_dense_at_minimum_has_zero_gradients():
    layer = _dense(np.eye(2), [0.0, 0.0])
    x = np.array([[0.3, 0.7], [0.1, 0.2]])
    pred = layer.forward(x, TRAIN)
    _, grad = wmse_loss(pred, x.copy())
    grad_x = layer.backward(grad)
    assert not layer.grad_weight.any() and not layer.grad_bias.any() and not grad_x.any()


def test_scalar_chain_rule_by_hand():
    layer = _dense([[1.0]], [0.0])
    x = np.array([[2.0]])
    y = layer.forward(x, TRAIN)
    layer.backward(2.0 * (y - 0.0))  # d/dy of (y - t)^2
    assert layer.grad_weight[0, 0] == 8.0


def test_gradients_accumulate_until_zeroed():
    layer = Dense(2, 1, make_rng(0))
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    layer.forward(x, TRAIN)
    layer.backward(np.ones((2, 1)))
    first = layer.grad_weight.copy()
    layer.forward(x, TRAIN)
    layer.backward(np.ones((2, 1)))
    np.testing.assert_allclose(layer.grad_weight, 2 * first)


# ---- finite differences --------------------------------------------------------------


def test_finite_difference_quadratic():
    w = np.array([3.0])
    (g,) = finite_difference_grad(lambda: float(w[0] ** 2), [w], 1e-4)
    assert abs(g[0] - 6.0) < 1e-6
    assert w[0] == 3.0


def test_finite_difference_sine():
    w = np.array([0.0])
    (g,) = finite_difference_grad(lambda: math.sin(w[0]), [w], 1e-4)
    assert abs(g[0] - 1.0) < 1e-8


def test_relative_error_floor():
    assert core_net.relative_error(0.0, 0.0) == 0.0
    assert core_net.relative_error(1.0, 1.0 + 1e-6) < 1.01e-6


# ---- properties -------------------------------------------------------------------------

finite = arrays(
    np.float64,
    st.tuples(st.integers(2, 6), st.integers(1, 5)),
    elements=st.floats(-1e3, 1e3, allow_nan=False),
)


@settings(max_examples=60, deadline=None)
@given(finite)
def test_forward_passes_stay_finite(x):
    rng = make_rng(0)
    layer = Dense(x.shape[1], 3, rng)
    h = layer.forward(x, TRAIN)
    h = BatchNorm(3).forward(h, TRAIN)
    h = GELU().forward(h, TRAIN)
    h = Dropout(0.1).forward(h, TRAIN, rng)
    assert np.all(np.isfinite(h))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 50), elements=st.floats(-10, 10)))
def test_gelu_between_zero_and_identity(v):
    out = gelu(v)
    assert np.all(np.isfinite(out))
    assert np.all(out <= np.maximum(v, 0) + 1e-15)
    assert np.all(out >= np.minimum(v, 0) - 0.17)


def test_make_rng_streams_are_reproducible_and_distinct():
    a = make_rng(7, 1).random(4)
    assert np.array_equal(a, make_rng(7, 1).random(4))
    assert not np.array_equal(a, make_rng(7, 2).random(4))
    assert not np.array_equal(a, make_rng(8, 1).random(4))
