"""Leaf layers: convolutions, batch norm, activations, pooling, linear, SE."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, DimensionError
from ..tensor import Rng
from . import functional as Fn
from .base import Layer


def he_uniform(rng: Rng, shape, fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, shape)


class Conv2d(Layer):
    def __init__(self, in_ch, out_ch, kernel, rng: Rng, stride=1, padding=0, dilation=1,
                 groups=1, bias=False):
        super().__init__()
        if in_ch % groups or out_ch % groups:
            raise ConfigError(f"channels ({in_ch}, {out_ch}) not divisible by groups={groups}")
        kh, kw = Fn.pair(kernel)
        self.in_ch, self.out_ch, self.groups = in_ch, out_ch, groups
        self.stride, self.padding, self.dilation = Fn.pair(stride), Fn.pair(padding), Fn.pair(dilation)
        fan_in = (in_ch // groups) * kh * kw
        self.params["weight"] = he_uniform(rng, (out_ch, in_ch // groups, kh, kw), fan_in)
        if bias:
            self.params["bias"] = np.zeros(out_ch)

    def _hyper(self):
        return self.stride, self.padding, self.dilation, self.groups

    def forward(self, x, train=False):
        self._save(x)
        return Fn.conv2d_forward(x, self.params["weight"], self.params.get("bias"), *self._hyper())

    def backward(self, grad):
        (x,) = self._load()
        gx, gw, gb = Fn.conv2d_backward(grad, x, self.params["weight"], *self._hyper())
        self.grads["weight"] = gw
        if "bias" in self.params:
            self.grads["bias"] = gb
        return gx

    def output_shape(self, in_shape):
        _, h, w = in_shape
        _, _, kh, kw = self.params["weight"].shape
        return (
            self.out_ch,
            Fn.conv_output_size(h, kh, self.stride[0], self.padding[0], self.dilation[0]),
            Fn.conv_output_size(w, kw, self.stride[1], self.padding[1], self.dilation[1]),
        )

    def macs(self, in_shape):
        return Fn.conv2d_macs(in_shape, self.params["weight"].shape, *self._hyper())


class Conv1d(Layer):
    def __init__(self, in_ch, out_ch, kernel, rng: Rng, stride=1, padding=0, dilation=1,
                 groups=1, bias=True):
        super().__init__()
        if in_ch % groups or out_ch % groups:
            raise ConfigError(f"channels ({in_ch}, {out_ch}) not divisible by groups={groups}")
        self.in_ch, self.out_ch = in_ch, out_ch
        self.stride, self.padding, self.dilation, self.groups = stride, padding, dilation, groups
        self.params["weight"] = he_uniform(rng, (out_ch, in_ch // groups, kernel), (in_ch // groups) * kernel)
        if bias:
            self.params["bias"] = np.zeros(out_ch)

    def _hyper(self):
        return self.stride, self.padding, self.dilation, self.groups

    def forward(self, x, train=False):
        self._save(x)
        return Fn.conv1d_forward(x, self.params["weight"], self.params.get("bias"), *self._hyper())

    def backward(self, grad):
        (x,) = self._load()
        gx, gw, gb = Fn.conv1d_backward(grad, x, self.params["weight"], *self._hyper())
        self.grads["weight"] = gw
        if "bias" in self.params:
            self.grads["bias"] = gb
        return gx

    def output_shape(self, in_shape):
        _, length = in_shape
        k = self.params["weight"].shape[-1]
        return self.out_ch, Fn.conv_output_size(length, k, self.stride, self.padding, self.dilation)

    def macs(self, in_shape):
        cout, cg, k = self.params["weight"].shape
        return cout * cg * k * self.output_shape(in_shape)[1]


class BatchNorm(Layer):
    """Per-channel batch norm over every axis except axis 1.

    Running variance uses the unbiased batch variance. Before any training
    step the running statistics are the init values (mean 0, var 1).
    """

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        super().__init__()
        if eps <= 0:
            raise ConfigError("BatchNorm eps must be positive")
        self.momentum, self.eps = momentum, eps
        self.params["gamma"] = np.ones(channels)
        self.params["beta"] = np.zeros(channels)
        self.buffers["running_mean"] = np.zeros(channels)
        self.buffers["running_var"] = np.ones(channels)

    def _bcast(self, v, ndim):
        return v.reshape((1, -1) + (1,) * (ndim - 2))

    @staticmethod
    def _csum(a):
        # per-channel sum; reducing the contiguous trailing axis first is much faster
        return a.reshape(a.shape[0], a.shape[1], -1).sum(axis=2).sum(axis=0)

    def forward(self, x, train=False):
        nd = x.ndim
        gamma = self._bcast(self.params["gamma"], nd)
        beta = self._bcast(self.params["beta"], nd)
        if train:
            x = np.ascontiguousarray(x)
            n = x.size // x.shape[1]
            mean = self._csum(x) / n
            xc = x - self._bcast(mean, nd)
            var = self._csum(xc * xc) / n
            m = self.momentum
            unbiased = var * n / (n - 1) if n > 1 else var
            self.buffers["running_mean"] = (1 - m) * self.buffers["running_mean"] + m * mean
            self.buffers["running_var"] = (1 - m) * self.buffers["running_var"] + m * unbiased
        else:
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
            xc = x - self._bcast(mean, nd)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = xc * self._bcast(inv, nd)
        self._save(xhat, inv, train)
        return gamma * xhat + beta

    def backward(self, grad):
        xhat, inv, train = self._load()
        nd = grad.ndim
        grad = np.ascontiguousarray(grad)
        self.grads["gamma"] = self._csum(grad * xhat)
        self.grads["beta"] = self._csum(grad)
        if not train:
            return grad * self._bcast(self.params["gamma"] * inv, nd)
        n = grad.size // grad.shape[1]
        scale = self._bcast(self.params["gamma"] * inv, nd)
        mean_g = self._bcast(self.grads["beta"] / n, nd)
        mean_gx = self._bcast(self.grads["gamma"] / n, nd)
        return scale * (grad - mean_g - xhat * mean_gx)


class ReLU(Layer):
    def forward(self, x, train=False):
        mask = x > 0
        self._save(mask)
        return np.where(mask, x, 0.0)

    def backward(self, grad):
        (mask,) = self._load()
        return np.where(mask, grad, 0.0)


class Abs(Layer):
    def forward(self, x, train=False):
        self._save(np.sign(x))
        return np.abs(x)

    def backward(self, grad):
        (sign,) = self._load()
        return grad * sign


class MaxPool2d(Layer):
    """Max pool over the last two axes, floor semantics."""

    def __init__(self, window, stride=None):
        super().__init__()
        self.window = Fn.pair(window)
        self.stride = Fn.pair(stride if stride is not None else window)

    def forward(self, x, train=False):
        y, arg = Fn.maxpool2d_forward(x, self.window, self.stride)
        self._save(arg, x.shape)
        return y

    def backward(self, grad):
        arg, shape = self._load()
        return Fn.maxpool2d_backward(grad, arg, shape, self.window, self.stride)

    def output_shape(self, in_shape):
        *lead, h, w = in_shape
        kh, kw = self.window
        if kh > h or kw > w:
            raise DimensionError(f"pool window {kh}x{kw} larger than input {h}x{w}")
        return (*lead, (h - kh) // self.stride[0] + 1, (w - kw) // self.stride[1] + 1)


class MeanPool(Layer):
    """Global average over one axis of a batched map (axis counts the batch)."""

    def __init__(self, axis: int, keepdims: bool = True):
        super().__init__()
        self.axis, self.keepdims = axis, keepdims

    def forward(self, x, train=False):
        self._save(x.shape)
        return x.mean(axis=self.axis, keepdims=self.keepdims)

    def backward(self, grad):
        (shape,) = self._load()
        if not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return np.broadcast_to(grad / shape[self.axis], shape).copy()

    def output_shape(self, in_shape):
        ax = self.axis - 1
        if self.keepdims:
            return in_shape[:ax] + (1,) + in_shape[ax + 1:]
        return in_shape[:ax] + in_shape[ax + 1:]


class Linear(Layer):
    def __init__(self, n_in, n_out, rng: Rng, bias=True):
        super().__init__()
        self.params["weight"] = he_uniform(rng, (n_out, n_in), n_in)
        if bias:
            self.params["bias"] = np.zeros(n_out)

    def forward(self, x, train=False):
        self._save(x)
        y = x @ self.params["weight"].T
        if "bias" in self.params:
            y = y + self.params["bias"]
        return y

    def backward(self, grad):
        (x,) = self._load()
        self.grads["weight"] = grad.T @ x
        if "bias" in self.params:
            self.grads["bias"] = grad.sum(axis=0)
        return grad @ self.params["weight"]

    def output_shape(self, in_shape):
        return (self.params["weight"].shape[0],)

    def macs(self, in_shape):
        return int(self.params["weight"].size)


class SEBlock(Layer):
    """Squeeze-and-excitation: per-channel gate from the spatial mean of x."""

    def __init__(self, channels, rng: Rng, reduction=8):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.fc1 = self.add("fc1", Linear(channels, hidden, rng))
        self.fc2 = self.add("fc2", Linear(hidden, channels, rng))

    def forward(self, x, train=False):
        s = x.mean(axis=(2, 3))
        z = self.fc1.forward(s)
        a = np.maximum(z, 0.0)
        gate = Fn.sigmoid(self.fc2.forward(a))
        self._save(x, z > 0, gate)
        return x * gate[:, :, None, None]

    def backward(self, grad):
        x, pos, gate = self._load()
        g_gate = (grad * x).sum(axis=(2, 3))
        g_pre = g_gate * gate * (1.0 - gate)
        g_a = self.fc2.backward(g_pre)
        g_s = self.fc1.backward(np.where(pos, g_a, 0.0))
        hw = x.shape[2] * x.shape[3]
        return grad * gate[:, :, None, None] + (g_s / hw)[:, :, None, None]

    def describe(self, in_shape, prefix=""):
        c = in_shape[0]
        rows = [
            (f"{prefix}.fc1", self.fc1.param_count(), self.fc1.macs((c,))),
            (f"{prefix}.fc2", self.fc2.param_count(), self.fc2.macs((c,))),
        ]
        return rows, in_shape
