"""Stateful layer wrappers around the functional kernels.

A layer keeps its parameters in ``params`` and accumulates gradients into
``grads`` during ``backward``.  The most recent ``forward`` call is cached, so
a layer instance must not be reused twice inside one forward pass.
"""

from __future__ import annotations

import math

import numpy as np

from ..rng import counter_uniform, derive_seed
from . import functional as F


class Module:
    """Minimal container: named parameters, gradients and child modules."""

    def __init__(self):
        object.__setattr__(self, "params", {})
        object.__setattr__(self, "grads", {})
        object.__setattr__(self, "_children", {})

    def __setattr__(self, name, value):
        if isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def add_param(self, name, value):
        self.params[name] = np.asarray(value, dtype=np.float64)
        self.grads[name] = np.zeros_like(self.params[name])

    def named_modules(self, prefix=""):
        yield prefix, self
        for name, child in self._children.items():
            yield from child.named_modules(f"{prefix}{name}.")

    def named_parameters(self):
        for prefix, mod in self.named_modules():
            for name, value in mod.params.items():
                yield prefix + name, value

    def named_grads(self):
        for prefix, mod in self.named_modules():
            for name, value in mod.grads.items():
                yield prefix + name, value

    def zero_grad(self):
        for _, mod in self.named_modules():
            for name in mod.grads:
                mod.grads[name] = np.zeros_like(mod.params[name])

    def state_dict(self):
        return {name: value.copy() for name, value in self.named_parameters()}

    def load_state_dict(self, state, strict=True):
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        unexpected = set(state) - set(own)
        if strict and (missing or unexpected):
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for prefix, mod in self.named_modules():
            for name in mod.params:
                key = prefix + name
                if key not in state:
                    continue
                value = np.asarray(state[key], dtype=np.float64)
                if value.shape != mod.params[name].shape:
                    raise ValueError(f"{key}: shape {value.shape} != {mod.params[name].shape}")
                mod.params[name] = value.copy()
        return self

    def num_parameters(self):
        return sum(v.size for _, v in self.named_parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def init_uniform(seed, shape, fan_in):
    bound = math.sqrt(1.0 / fan_in)
    size = int(np.prod(shape))
    return counter_uniform(seed, size, -bound, bound).reshape(shape)


class Conv2d(Module):
    def __init__(self, c_in, c_out, kernel_size, stride=1, padding=0, dilation=1, groups=1, bias=True, seed=0):
        super().__init__()
        kh, kw = F._pair(kernel_size)
        self.stride, self.padding, self.dilation, self.groups = stride, padding, dilation, groups
        fan_in = (c_in // groups) * kh * kw
        self.add_param("weight", init_uniform(seed, (c_out, c_in // groups, kh, kw), fan_in))
        self.has_bias = bias
        if bias:
            self.add_param("bias", np.zeros(c_out))
        self._cache = None

    def forward(self, x):
        out, self._cache = F.conv2d_forward(
            x, self.params["weight"], self.params.get("bias"), self.stride, self.padding, self.dilation, self.groups
        )
        return out

    def backward(self, dout):
        dx, dw, db = F.conv2d_backward(dout, self._cache)
        self.grads["weight"] += dw
        if self.has_bias:
            self.grads["bias"] += db
        return dx


class BatchNorm2d(Module):
    """Inference-form batch normalization with stored running statistics."""

    def __init__(self, channels):
        super().__init__()
        self.add_param("gamma", np.ones(channels))
        self.add_param("beta", np.zeros(channels))
        self.add_param("running_mean", np.zeros(channels))
        self.add_param("running_var", np.ones(channels))
        self._cache = None

    def _bn(self):
        return {k: self.params[k] for k in ("gamma", "beta", "running_mean", "running_var")}

    def forward(self, x):
        out, self._cache = F.pointwise_forward(x, "batchnorm", self._bn())
        return out

    def backward(self, dout):
        dx, dgamma, dbeta = F.pointwise_backward(dout, self._cache)
        self.grads["gamma"] += dgamma
        self.grads["beta"] += dbeta
        return dx


class Activation(Module):
    def __init__(self, mode):
        super().__init__()
        self.mode = mode
        self._cache = None

    def forward(self, x):
        out, self._cache = F.pointwise_forward(x, self.mode)
        return out

    def backward(self, dout):
        return F.pointwise_backward(dout, self._cache)


class Sequential(Module):
    def __init__(self, *layers):
        super().__init__()
        self.layers = list(layers)
        for i, layer in enumerate(layers):
            setattr(self, str(i), layer)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout


class Upsample(Module):
    def __init__(self, factor=2):
        super().__init__()
        self.factor = factor
        self._cache = None

    def forward(self, x):
        out, self._cache = F.bilinear_upsample_forward(x, self.factor)
        return out

    def backward(self, dout):
        return F.bilinear_upsample_backward(dout, self._cache)


def child_seed(seed, index):
    return derive_seed(seed, index)
