"""Parameter-holding layer blocks used by the backbones and attention.

Each layer owns its Tensors and exposes ``parameters()`` as a list of
(name, Tensor) pairs; initialization is deterministic in the numpy
Generator handed to the constructor.
"""

from __future__ import annotations

import numpy as np

from . import nn_ops, tensor as T
from .tensor import Tensor


def _he_init(rng, shape, fan_in):
    std = np.sqrt(2.0 / fan_in)
    return (std * rng.standard_normal(shape)).astype(T.get_default_dtype())


def _scaled_init(rng, shape, fan_in):
    std = 1.0 / np.sqrt(fan_in)
    return (std * rng.standard_normal(shape)).astype(T.get_default_dtype())


class Conv2d:
    def __init__(self, in_ch, out_ch, kernel, stride=1, padding=0, rng=None, bias=True):
        self.stride = stride
        self.padding = padding
        fan_in = in_ch * kernel * kernel
        self.weight = Tensor(_he_init(rng, (out_ch, in_ch, kernel, kernel), fan_in), requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch, dtype=T.get_default_dtype()), requires_grad=True) if bias else None

    def __call__(self, x):
        return nn_ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)

    def parameters(self):
        out = [("weight", self.weight)]
        if self.bias is not None:
            out.append(("bias", self.bias))
        return out


class BatchNorm2d:
    def __init__(self, channels, momentum=0.1, eps=1e-5):
        dt = T.get_default_dtype()
        self.gamma = Tensor(np.ones(channels, dtype=dt), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dt), requires_grad=True)
        self.running_mean = np.zeros(channels, dtype=dt)
        self.running_var = np.ones(channels, dtype=dt)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x, training: bool):
        return nn_ops.batchnorm2d(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            training, momentum=self.momentum, eps=self.eps,
        )

    def parameters(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def state_arrays(self):
        """Non-learned state persisted in checkpoints."""
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]


class ConvBnRelu:
    """3x3 (or 1x1) conv + batch norm + ReLU, the pyramid building block."""

    def __init__(self, in_ch, out_ch, kernel=3, stride=1, padding=1, rng=None):
        self.conv = Conv2d(in_ch, out_ch, kernel, stride, padding, rng, bias=False)
        self.bn = BatchNorm2d(out_ch)

    def __call__(self, x, training: bool):
        return T.relu(self.bn(self.conv(x), training))

    def parameters(self):
        return [(f"conv.{n}", p) for n, p in self.conv.parameters()] + [
            (f"bn.{n}", p) for n, p in self.bn.parameters()
        ]

    def state_arrays(self):
        return [(f"bn.{n}", a) for n, a in self.bn.state_arrays()]


class Linear:
    def __init__(self, in_dim, out_dim, rng=None, bias=True, init="scaled"):
        init_fn = _he_init if init == "he" else _scaled_init
        self.weight = Tensor(init_fn(rng, (in_dim, out_dim), in_dim), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim, dtype=T.get_default_dtype()), requires_grad=True) if bias else None

    def __call__(self, x):
        out = T.matmul(x, self.weight)
        if self.bias is not None:
            out = out + self.bias
        return out

    def parameters(self):
        out = [("weight", self.weight)]
        if self.bias is not None:
            out.append(("bias", self.bias))
        return out


class LayerNorm:
    """Normalization over the last axis, composed from primitive ops."""

    def __init__(self, dim, eps=1e-5):
        dt = T.get_default_dtype()
        self.gamma = Tensor(np.ones(dim, dtype=dt), requires_grad=True)
        self.beta = Tensor(np.zeros(dim, dtype=dt), requires_grad=True)
        self.eps = eps

    def __call__(self, x):
        mu = T.tmean(x, axis=-1, keepdims=True)
        xc = x - mu
        var = T.tmean(xc * xc, axis=-1, keepdims=True)
        xn = xc / T.tsqrt(var + self.eps)
        return xn * self.gamma + self.beta

    def parameters(self):
        return [("gamma", self.gamma), ("beta", self.beta)]


def prefix_params(prefix, params):
    return [(f"{prefix}.{n}", p) for n, p in params]
