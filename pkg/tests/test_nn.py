#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

import numpy as np
import pytest

from greensec import nn
from greensec.nn import (Network, Layout, ParamVector, Dense, Conv2D, Flatten,
                         ReLU, Tanh, Sigmoid)


#===============================================================================
# PARAMETERS
#===============================================================================

def test_layout_slices():
    layout = Layout([("a", (2, 3)), ("b", (4,))])
    assert layout.size == 10
    assert layout.slice("b") == slice(6, 10)
    assert "a" in layout and "c" not in layout
    assert Layout.from_json(layout.to_json()) == layout
    assert layout.prefixed("x.").names() == ["x.a", "x.b"]
    with pytest.raises(ValueError):
        Layout([("a", (1,)), ("a", (2,))])


def test_param_vector_views_share_memory():
    params = ParamVector(Layout([("a", (2, 2)), ("b", (3,))]))
    params["a"][...] = 1.
    assert params.data[:4].sum() == 4.
    assert params.data[4:].sum() == 0.
    unpacked = params.unpack()
    again = ParamVector.pack(params.layout, unpacked)
    np.testing.assert_array_equal(again.data, params.data)


def test_param_vector_shape_checks():
    layout = Layout([("a", (2,))])
    with pytest.raises(nn.ShapeError):
        ParamVector(layout, np.zeros(3))
    with pytest.raises(nn.ShapeError):
        ParamVector(layout).assign(np.zeros(3))
    with pytest.raises(nn.ShapeError):
        ParamVector.pack(layout, {"a": np.zeros((1, 2))})


def test_updates_bump_version():
    params = ParamVector(Layout([("a", (2,))]))
    params.add_(np.ones(2), scale=0.5)
    params.assign(params.copy())
    assert params.version == 2
    np.testing.assert_allclose(params.data, [0.5, 0.5])


def test_float_dtype():
    assert nn.float_dtype(32) is np.float32
    with pytest.raises(ValueError):
        nn.float_dtype(16)


#===============================================================================
# NETWORKS
#===============================================================================

def test_parameter_names_and_init(rng):
    net = Network([Dense(4), ReLU(), Dense(2)], (3,), prefix="q.")
    assert net.layout.names() == ["q.0.W", "q.0.b", "q.2.W", "q.2.b"]
    params = net.init(rng)
    assert np.all(np.abs(params["q.0.W"]) <= 1. / np.sqrt(3))
    assert np.all(np.abs(params["q.2.W"]) <= 1. / np.sqrt(4))
    assert net.predict(params, np.zeros((5, 3))).shape == (5, 2)


def test_input_shape_is_checked(rng):
    net = Network([Dense(2)], (3,))
    with pytest.raises(nn.ShapeError):
        net.predict(net.init(rng), np.zeros((1, 4)))
    with pytest.raises(nn.ShapeError):
        Network([Conv2D(2, 3)], (1, 2, 2))


def test_conv_matches_direct_sum(rng):
    net = Network([Conv2D(2, 3)], (3, 5, 4))
    params = net.init(rng)
    x = rng.normal(size=(2, 3, 5, 4))
    y = net.predict(params, x)
    assert y.shape == (2, 2, 3, 2)
    W, b = params["0.W"], params["0.b"]
    expected = b[1] + sum(x[1, c, 1 + i, 0 + j] * W[i, j, c, 1]
                          for c in range(3) for i in range(3)
                          for j in range(3))
    assert y[1, 1, 1, 0] == pytest.approx(expected)


@pytest.mark.parametrize("layers, input_shape", [
    ([Dense(4), Tanh(), Dense(3)], (5,)),
    ([Dense(4), Sigmoid(), Dense(2), ReLU()], (3,)),
    ([Conv2D(3, 3), ReLU(), Conv2D(2, 2), Flatten(), Dense(3)], (2, 5, 5)),
])
def test_gradients_match_finite_differences(layers, input_shape, rng, fd):
    net = Network(layers, input_shape)
    params = net.init(rng)
    x = rng.normal(size=(3,) + input_shape)
    target = rng.normal(size=(3,) + net.output_shape)

    def loss(data):
        trial = ParamVector(net.layout, data)
        return nn.mse(net.predict(trial, x), target)[0]

    y, cache = net.forward(params, x)
    _, dy = nn.mse(y, target)
    grad, dx = net.backward(params, cache, dy, input_grad=True)
    np.testing.assert_allclose(grad.data, fd(loss, params.data),
                               rtol=1e-4, atol=1e-7)

    def input_loss(inputs):
        return nn.mse(net.predict(params, inputs), target)[0]

    np.testing.assert_allclose(dx, fd(input_loss, x), rtol=1e-4, atol=1e-7)


def test_backward_accumulates(rng):
    net = Network([Dense(2)], (3,))
    params = net.init(rng)
    x = rng.normal(size=(4, 3))
    y, cache = net.forward(params, x)
    once = net.backward(params, cache, np.ones_like(y))
    twice = net.backward(params, cache, np.ones_like(y), once.copy())
    np.testing.assert_allclose(twice.data, 2 * once.data)


def test_stale_cache_is_detected(rng):
    net = Network([Dense(2)], (3,))
    params = net.init(rng)
    y, cache = net.forward(params, np.ones((1, 3)))
    params.add_(np.ones(len(params)))
    with pytest.raises(nn.StaleCacheError):
        net.backward(params, cache, np.ones_like(y))
    with pytest.raises(nn.StaleCacheError):
        net.backward(params.copy(), cache, np.ones_like(y))


#===============================================================================
# LOSSES AND OPTIMIZER
#===============================================================================

def test_q_loss_only_touches_taken_actions():
    q = np.array([[1., 2., 3.], [0., 0., 0.]])
    loss, grad = nn.q_loss(q, np.array([2, 0]), np.array([1., 1.]))
    assert loss == pytest.approx((4. + 1.) / 2)
    np.testing.assert_allclose(grad, [[0, 0, 2.], [-1., 0, 0]])


def test_softmax_rows_sum_to_one():
    probs = nn.softmax(np.array([[1000., 0.], [0., 0.]]))
    np.testing.assert_allclose(probs.sum(axis=1), 1.)
    assert probs[1, 0] == pytest.approx(0.5)


def test_adam_minimizes_a_quadratic():
    params = ParamVector(Layout([("x", (2,))]), np.array([3., -2.]))
    state = nn.AdamState.for_params(params, lr=0.05)
    for _ in range(2000):
        nn.adam_step(params, 2 * params.data, state)
    np.testing.assert_allclose(params.data, 0., atol=5e-2)
    assert state.t == 2000
    with pytest.raises(nn.ShapeError):
        nn.adam_step(params, np.zeros(3), state)


def test_mixed_products():
    D = np.arange(6.).reshape(2, 3)
    np.testing.assert_allclose(nn.jacobian_vector_products(D, np.ones(3)),
                               D.dot(np.ones(3)))
    np.testing.assert_allclose(
        nn.jacobian_vector_products(D, np.ones(2), transpose=True),
        D.T.dot(np.ones(2)))
    with pytest.raises(nn.ShapeError):
        nn.jacobian_vector_products(D, np.ones(2))


#===============================================================================
# CHECKPOINTS
#===============================================================================

def test_checkpoint_preserves_values(tmp_path, rng):
    net = Network([Dense(3)], (2,), prefix="enc.")
    params = net.init(rng)
    path = str(tmp_path / "net.ckpt")
    nn.save_checkpoint(path, params, {"role": "defender"})
    loaded, meta = nn.load_checkpoint(path)
    assert meta == {"role": "defender"}
    assert loaded.layout == params.layout
    np.testing.assert_array_equal(loaded.data, params.data)


def test_corrupted_checkpoint(tmp_path, rng):
    params = Network([Dense(3)], (2,)).init(rng)
    path = str(tmp_path / "net.ckpt")
    nn.save_checkpoint(path, params)
    with open(path, "rb") as fp:
        raw = bytearray(fp.read())
    raw[-40] ^= 0xff
    with open(path, "wb") as fp:
        fp.write(bytes(raw))
    with pytest.raises(nn.CheckpointError):
        nn.load_checkpoint(path)
    with open(path, "wb") as fp:
        fp.write(b"not a checkpoint at all, clearly too short")
    with pytest.raises(nn.CheckpointError):
        nn.load_checkpoint(path)
