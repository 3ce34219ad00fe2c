#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Small neural toolkit shared by the patrol and allocation learners.

Parameters live in one flat ``ParamVector``; a ``Layout`` maps names such as
``"drone.0.W"`` to slices of it. A ``Network`` is a fixed stack of layers that
reads its weights by name, so several networks (an actor trunk, its heads and
a critic) can share one vector.

Arrays are batch-first. Convolutions are channels-first, stride 1 and
unpadded.

Checkpoint format (little endian)::

    b"GSCK" | uint16 version | uint32 header size | JSON header |
    float64 payload | sha256 of everything before

"""

#===============================================================================
# IMPORTS
#===============================================================================

import collections
import hashlib
import json
import struct

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from scipy import special
from scipy.sparse import linalg as splinalg


#===============================================================================
# CONSTANTS
#===============================================================================

CHECKPOINT_MAGIC = b"GSCK"

CHECKPOINT_VERSION = 1

FLOAT_TYPES = {64: np.float64, 32: np.float32}


#===============================================================================
# ERRORS
#===============================================================================

class ShapeError(ValueError):
    pass


class StaleCacheError(RuntimeError):

    def __init__(self):
        super(StaleCacheError, self).__init__(
            "Parameters changed after the forward pass")


class CheckpointError(IOError):
    pass


def float_dtype(bits):
    try:
        return FLOAT_TYPES[int(bits)]
    except (KeyError, ValueError):
        raise ValueError("FLOAT_BITS must be 32 or 64, got {0!r}".format(bits))


#===============================================================================
# PARAMETERS
#===============================================================================

class Layout(object):
    """Ordered ``name -> shape`` map over a flat vector"""

    def __init__(self, entries):
        self._shapes = collections.OrderedDict()
        self._slices = {}
        offset = 0
        for name, shape in entries:
            if name in self._shapes:
                raise ValueError("Duplicated parameter '{0}'".format(name))
            shape = tuple(int(s) for s in shape)
            size = int(np.prod(shape, dtype=np.int64))
            self._shapes[name] = shape
            self._slices[name] = slice(offset, offset + size)
            offset += size
        self.size = offset

    def __repr__(self):
        return "Layout({0} entries, size={1})".format(
            len(self._shapes), self.size)

    def __eq__(self, other):
        return isinstance(other, Layout) and \
            list(self.entries()) == list(other.entries())

    def __ne__(self, other):
        return not self == other

    __hash__ = None

    def __contains__(self, name):
        return name in self._shapes

    def __len__(self):
        return len(self._shapes)

    def entries(self):
        return iter(self._shapes.items())

    def names(self):
        return list(self._shapes)

    def shape(self, name):
        return self._shapes[name]

    def slice(self, name):
        return self._slices[name]

    def prefixed(self, prefix):
        return Layout((prefix + name, shape) for name, shape in self.entries())

    @classmethod
    def concat(cls, *layouts):
        entries = []
        for layout in layouts:
            entries.extend(layout.entries())
        return cls(entries)

    def to_json(self):
        return [[name, list(shape)] for name, shape in self.entries()]

    @classmethod
    def from_json(cls, data):
        return cls((name, tuple(shape)) for name, shape in data)


class ParamVector(object):
    """A flat parameter vector with named views.

    Every in-place update bumps ``version`` so forward caches built on older
    values are detected.

    """

    def __init__(self, layout, data=None, dtype=np.float64):
        self.layout = layout
        if data is None:
            data = np.zeros(layout.size, dtype=dtype)
        data = np.array(data, dtype=dtype).ravel()
        if data.size != layout.size:
            raise ShapeError("Layout expects {0} values, got {1}".format(
                layout.size, data.size))
        self.data = data
        self.version = 0

    def __repr__(self):
        return "ParamVector(size={0}, version={1})".format(
            self.layout.size, self.version)

    def __len__(self):
        return self.layout.size

    def __getitem__(self, name):
        return self.view(name)

    @property
    def dtype(self):
        return self.data.dtype

    def view(self, name):
        return self.data[self.layout.slice(name)].reshape(
            self.layout.shape(name))

    def copy(self):
        return ParamVector(self.layout, self.data.copy(), self.dtype)

    def zeros_like(self):
        return ParamVector(self.layout, None, self.dtype)

    def assign(self, values):
        values = np.asarray(getattr(values, "data", values))
        if values.shape != self.data.shape:
            raise ShapeError("Cannot assign {0} values to {1}".format(
                values.size, self.data.size))
        self.data[...] = values
        self.version += 1
        return self

    def add_(self, delta, scale=1.):
        delta = np.asarray(getattr(delta, "data", delta))
        if delta.shape != self.data.shape:
            raise ShapeError("Cannot add {0} values to {1}".format(
                delta.size, self.data.size))
        self.data += scale * delta
        self.version += 1
        return self

    def unpack(self):
        return collections.OrderedDict(
            (name, self.view(name).copy()) for name in self.layout.names())

    @classmethod
    def pack(cls, layout, arrays, dtype=np.float64):
        params = cls(layout, None, dtype)
        for name, shape in layout.entries():
            value = np.asarray(arrays[name])
            if value.shape != shape:
                raise ShapeError("'{0}' expects shape {1}, got {2}".format(
                    name, shape, value.shape))
            params.data[layout.slice(name)] = value.ravel()
        return params


#===============================================================================
# LAYERS
#===============================================================================

class Layer(object):

    def param_shapes(self, input_shape):
        return []

    def fan_in(self, input_shape):
        return 1

    def output_shape(self, input_shape):
        return input_shape

    def forward(self, params, x):
        raise NotImplementedError()

    def backward(self, params, cache, dy, grads):
        raise NotImplementedError()

    def __repr__(self):
        return "{0}()".format(self.__class__.__name__)


class Dense(Layer):

    def __init__(self, units):
        self.units = int(units)

    def __repr__(self):
        return "Dense({0})".format(self.units)

    def param_shapes(self, input_shape):
        if len(input_shape) != 1:
            raise ShapeError("Dense expects flat inputs, got {0}".format(
                input_shape))
        return [("W", (input_shape[0], self.units)), ("b", (self.units,))]

    def fan_in(self, input_shape):
        return input_shape[0]

    def output_shape(self, input_shape):
        return (self.units,)

    def forward(self, params, x):
        return x.dot(params["W"]) + params["b"], x

    def backward(self, params, x, dy, grads):
        grads["W"] += x.T.dot(dy)
        grads["b"] += dy.sum(axis=0)
        return dy.dot(params["W"].T)


class Conv2D(Layer):

    def __init__(self, filters, kernel=3):
        self.filters = int(filters)
        self.kernel = int(kernel)

    def __repr__(self):
        return "Conv2D({0}, {1}x{1})".format(self.filters, self.kernel)

    def param_shapes(self, input_shape):
        channels = input_shape[0]
        return [("W", (self.kernel, self.kernel, channels, self.filters)),
                ("b", (self.filters,))]

    def fan_in(self, input_shape):
        return input_shape[0] * self.kernel * self.kernel

    def output_shape(self, input_shape):
        channels, height, width = input_shape
        k = self.kernel
        if height < k or width < k:
            raise ShapeError("A {0}x{0} kernel does not fit {1}x{2}".format(
                k, height, width))
        return (self.filters, height - k + 1, width - k + 1)

    def forward(self, params, x):
        k = self.kernel
        windows = sliding_window_view(x, (k, k), axis=(2, 3))
        y = np.einsum("nchwij,ijco->nohw", windows, params["W"],
                      optimize=True)
        return y + params["b"][None, :, None, None], windows

    def backward(self, params, windows, dy, grads):
        k = self.kernel
        grads["W"] += np.einsum("nchwij,nohw->ijco", windows, dy,
                                optimize=True)
        grads["b"] += dy.sum(axis=(0, 2, 3))
        pad = k - 1
        padded = np.pad(dy, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        dy_windows = sliding_window_view(padded, (k, k), axis=(2, 3))
        flipped = params["W"][::-1, ::-1]
        return np.einsum("nohwij,ijco->nchw", dy_windows, flipped,
                         optimize=True)


class Flatten(Layer):

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, params, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, params, shape, dy, grads):
        return dy.reshape(shape)


class ReLU(Layer):

    def forward(self, params, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, params, mask, dy, grads):
        return dy * mask


class Tanh(Layer):

    def forward(self, params, x):
        y = np.tanh(x)
        return y, y

    def backward(self, params, y, dy, grads):
        return dy * (1. - y * y)


class Sigmoid(Layer):

    def forward(self, params, x):
        y = special.expit(x)
        return y, y

    def backward(self, params, y, dy, grads):
        return dy * y * (1. - y)


#===============================================================================
# NETWORK
#===============================================================================

class ForwardCache(object):

    def __init__(self, params, layer_caches):
        self.params_id = id(params)
        self.version = params.version
        self.layer_caches = layer_caches


class Network(object):
    """A fixed stack of layers.

    :param layers: ``Layer`` instances
    :param input_shape: shape of one sample (no batch axis)
    :param prefix: prepended to every parameter name

    """

    def __init__(self, layers, input_shape, prefix=""):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.prefix = prefix
        entries, self._names, self._fans = [], [], []
        shape = self.input_shape
        for idx, layer in enumerate(self.layers):
            names = {}
            for suffix, pshape in layer.param_shapes(shape):
                name = "{0}{1}.{2}".format(prefix, idx, suffix)
                names[suffix] = name
                entries.append((name, pshape))
            self._names.append(names)
            self._fans.append(layer.fan_in(shape))
            shape = layer.output_shape(shape)
        self.output_shape = shape
        self.layout = Layout(entries)

    def __repr__(self):
        return "Network({0})".format(", ".join(repr(l) for l in self.layers))

    def init(self, rng, dtype=np.float64, layout=None):
        """Uniform weights in +-1/sqrt(fan_in)"""
        params = ParamVector(layout or self.layout, None, dtype)
        self.init_into(params, rng)
        return params

    def init_into(self, params, rng):
        for names, fan in zip(self._names, self._fans):
            bound = 1. / np.sqrt(fan)
            for name in names.values():
                view = params.view(name)
                view[...] = rng.uniform(-bound, bound, size=view.shape)
        params.version += 1
        return params

    def _views(self, params, idx):
        return dict((suffix, params.view(name))
                    for suffix, name in self._names[idx].items())

    def forward(self, params, x):
        x = np.asarray(x, dtype=params.dtype)
        if x.shape[1:] != self.input_shape:
            raise ShapeError("Network expects inputs {0}, got {1}".format(
                self.input_shape, x.shape[1:]))
        caches = []
        for idx, layer in enumerate(self.layers):
            x, cache = layer.forward(self._views(params, idx), x)
            caches.append(cache)
        return x, ForwardCache(params, caches)

    def predict(self, params, x):
        return self.forward(params, x)[0]

    def backward(self, params, cache, dy, grad=None, input_grad=False):
        """Accumulates the gradient of ``sum(dy * output)`` into ``grad``.

        :returns: ``grad`` or ``(grad, input gradient)``

        """
        if cache.params_id != id(params) or cache.version != params.version:
            raise StaleCacheError()
        if grad is None:
            grad = params.zeros_like()
        dy = np.asarray(dy, dtype=params.dtype)
        for idx in reversed(range(len(self.layers))):
            dy = self.layers[idx].backward(
                self._views(params, idx), cache.layer_caches[idx], dy,
                self._views(grad, idx))
        if input_grad:
            return grad, dy
        return grad


#===============================================================================
# LOSSES
#===============================================================================

def mse(prediction, target):
    """Mean squared error and its gradient w.r.t. ``prediction``"""
    prediction = np.asarray(prediction)
    diff = prediction - np.asarray(target, dtype=prediction.dtype)
    return float(np.mean(diff * diff)), 2. * diff / diff.size


def q_loss(q_values, actions, targets):
    """Mean squared TD error of the taken actions"""
    rows = np.arange(q_values.shape[0])
    td = q_values[rows, actions] - targets
    grad = np.zeros_like(q_values)
    grad[rows, actions] = 2. * td / td.size
    return float(np.mean(td * td)), grad


def softmax(logits, axis=-1):
    return special.softmax(logits, axis=axis)


#===============================================================================
# OPTIMIZER
#===============================================================================

class AdamState(object):

    def __init__(self, size, lr, beta1=0.9, beta2=0.999, epsilon=1e-8,
                 dtype=np.float64):
        self.m = np.zeros(size, dtype=dtype)
        self.v = np.zeros(size, dtype=dtype)
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon

    def __repr__(self):
        return "AdamState(t={0}, lr={1!r})".format(self.t, self.lr)

    @classmethod
    def for_params(cls, params, lr, **kwargs):
        return cls(len(params), lr, dtype=params.dtype, **kwargs)


def adam_step(params, grad, state):
    """One bias-corrected Adam descent step, in place"""
    grad = np.asarray(getattr(grad, "data", grad))
    if grad.shape != state.m.shape:
        raise ShapeError("Gradient has {0} values, optimizer {1}".format(
            grad.size, state.m.size))
    state.t += 1
    state.m = state.beta1 * state.m + (1. - state.beta1) * grad
    state.v = state.beta2 * state.v + (1. - state.beta2) * grad * grad
    m_hat = state.m / (1. - state.beta1 ** state.t)
    v_hat = state.v / (1. - state.beta2 ** state.t)
    delta = -state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    if isinstance(params, ParamVector):
        return params.add_(delta)
    params += delta
    return params


#===============================================================================
# MIXED PRODUCTS
#===============================================================================

def as_operator(matrix_or_operator):
    return splinalg.aslinearoperator(matrix_or_operator)


def jacobian_vector_products(operator, v, transpose=False):
    """``D v`` or ``D^T v`` for a mixed second-derivative operator ``D``
    mapping the second player's parameters to the first player's"""
    operator = as_operator(operator)
    v = np.asarray(v)
    expected = operator.shape[0] if transpose else operator.shape[1]
    if v.shape != (expected,):
        raise ShapeError("Expected a vector of {0} values, got {1}".format(
            expected, v.shape))
    if transpose:
        return operator.rmatvec(v)
    return operator.matvec(v)


#===============================================================================
# CHECKPOINTS
#===============================================================================

def save_checkpoint(path, params, meta=None):
    header = json.dumps({"layout": params.layout.to_json(),
                         "meta": meta or {}}, sort_keys=True).encode("utf-8")
    body = (CHECKPOINT_MAGIC +
            struct.pack("<HI", CHECKPOINT_VERSION, len(header)) + header +
            params.data.astype("<f8").tobytes())
    with open(path, "wb") as fp:
        fp.write(body + hashlib.sha256(body).digest())


def load_checkpoint(path, dtype=np.float64):
    """Returns ``(params, meta)``"""
    with open(path, "rb") as fp:
        raw = fp.read()
    if len(raw) < 42 or raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("{0} is not a greensec checkpoint".format(path))
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("Checksum mismatch in {0}".format(path))
    version, size = struct.unpack("<HI", body[4:10])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError("Unsupported checkpoint version {0}".format(
            version))
    header = json.loads(body[10:10 + size].decode("utf-8"))
    layout = Layout.from_json(header["layout"])
    payload = np.frombuffer(body[10 + size:], dtype="<f8")
    if payload.size != layout.size:
        raise CheckpointError("Truncated payload in {0}".format(path))
    return ParamVector(layout, payload, dtype), header["meta"]


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
