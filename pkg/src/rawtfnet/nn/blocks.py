"""Frontend residual blocks built from depthwise-separable convolutions."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..tensor import Rng
from .base import Layer, Sequential
from .layers import BatchNorm, Conv2d, MaxPool2d, ReLU, SEBlock


def depthwise(channels, rng, kernel=3, dilation=1):
    k = kernel if isinstance(kernel, tuple) else (kernel, kernel)
    pad = (dilation * (k[0] - 1) // 2, dilation * (k[1] - 1) // 2)
    return Conv2d(channels, channels, k, rng, padding=pad, dilation=dilation, groups=channels)


def pointwise(in_ch, out_ch, rng, bias=False):
    return Conv2d(in_ch, out_ch, 1, rng, bias=bias)


class _Residual(Layer):
    """body(x) + shortcut(x) -> ReLU -> optional max pool."""

    def _init_tail(self, in_ch, filters, rng, pool):
        self.proj = self.add("proj", pointwise(in_ch, filters, rng, bias=True)) if in_ch != filters else None
        self.relu = self.add("relu", ReLU())
        self.pool = self.add("pool", MaxPool2d(pool)) if pool is not None else None

    def _tail_forward(self, body, x, train):
        skip = self.proj.forward(x, train) if self.proj is not None else x
        out = self.relu.forward(body + skip, train)
        return self.pool.forward(out, train) if self.pool is not None else out

    def _tail_backward(self, grad):
        if self.pool is not None:
            grad = self.pool.backward(grad)
        grad = self.relu.backward(grad)
        g_skip = self.proj.backward(grad) if self.proj is not None else grad
        return grad, g_skip

    def _tail_describe(self, in_shape, body_shape, prefix):
        rows = []
        if self.proj is not None:
            rows, _ = self.proj.describe(in_shape, f"{prefix}.proj")
        shape = body_shape
        if self.pool is not None:
            shape = self.pool.output_shape(shape)
        return rows, shape


class ResBlock(_Residual):
    """Two depthwise-separable 3x3 convolutions with a residual shortcut.

    dw -> pw -> BN -> ReLU -> dw -> pw -> BN, plus identity or 1x1 projection,
    then ReLU and an optional max pool.
    """

    def __init__(self, in_ch, filters, rng: Rng, pool=(1, 2)):
        super().__init__()
        self.body = self.add("body", Sequential(
            ("dw1", depthwise(in_ch, rng)),
            ("pw1", pointwise(in_ch, filters, rng)),
            ("bn1", BatchNorm(filters)),
            ("relu1", ReLU()),
            ("dw2", depthwise(filters, rng)),
            ("pw2", pointwise(filters, filters, rng)),
            ("bn2", BatchNorm(filters)),
        ))
        self._init_tail(in_ch, filters, rng, pool)

    def forward(self, x, train=False):
        return self._tail_forward(self.body.forward(x, train), x, train)

    def backward(self, grad):
        g_body, g_skip = self._tail_backward(grad)
        return self.body.backward(g_body) + g_skip

    def describe(self, in_shape, prefix=""):
        rows, shape = self.body.describe(in_shape, f"{prefix}.body")
        tail, shape = self._tail_describe(in_shape, shape, prefix)
        return rows + tail, shape


class SERes2Block(_Residual):
    """Depthwise-separable SE-Res2Net block.

    1x1 (in -> filters) -> BN -> ReLU -> Res2 hierarchy -> 1x1 -> BN -> SE,
    plus shortcut, ReLU and optional pool. In the hierarchy the first of
    ``scale`` channel groups passes through and group i >= 2 becomes
    ReLU(BN(dw3x3(group_i + y_{i-1}))). With ``scale == 1`` a single
    depthwise conv covers all channels.
    """

    def __init__(self, in_ch, filters, rng: Rng, scale=4, dilation=2, se_reduction=8, pool=(1, 2)):
        super().__init__()
        if scale < 1 or filters % scale:
            raise ConfigError(f"filters={filters} not divisible by Res2 scale={scale}")
        self.scale = scale
        self.width = filters // scale
        self.pw1 = self.add("pw1", pointwise(in_ch, filters, rng))
        self.bn1 = self.add("bn1", BatchNorm(filters))
        self.relu1 = self.add("relu1", ReLU())
        n_convs = 1 if scale == 1 else scale - 1
        width = filters if scale == 1 else self.width
        self.hier = [
            self.add(f"res2_{i}", Sequential(
                ("dw", depthwise(width, rng, dilation=dilation)),
                ("bn", BatchNorm(width)),
                ("relu", ReLU()),
            ))
            for i in range(n_convs)
        ]
        self.pw2 = self.add("pw2", pointwise(filters, filters, rng))
        self.bn2 = self.add("bn2", BatchNorm(filters))
        self.se = self.add("se", SEBlock(filters, rng, se_reduction))
        self._init_tail(in_ch, filters, rng, pool)

    def _res2_forward(self, h, train):
        if self.scale == 1:
            return self.hier[0].forward(h, train)
        w = self.width
        groups = [h[:, i * w:(i + 1) * w] for i in range(self.scale)]
        outs = [groups[0]]
        for i in range(1, self.scale):
            outs.append(self.hier[i - 1].forward(groups[i] + outs[-1], train))
        return np.concatenate(outs, axis=1)

    def _res2_backward(self, grad):
        if self.scale == 1:
            return self.hier[0].backward(grad)
        w = self.width
        g_out = [grad[:, i * w:(i + 1) * w].copy() for i in range(self.scale)]
        g_in = [None] * self.scale
        for i in range(self.scale - 1, 0, -1):
            gu = self.hier[i - 1].backward(g_out[i])
            g_in[i] = gu
            g_out[i - 1] += gu
        g_in[0] = g_out[0]
        return np.concatenate(g_in, axis=1)

    def forward(self, x, train=False):
        h = self.relu1.forward(self.bn1.forward(self.pw1.forward(x, train), train), train)
        h = self._res2_forward(h, train)
        h = self.se.forward(self.bn2.forward(self.pw2.forward(h, train), train), train)
        return self._tail_forward(h, x, train)

    def backward(self, grad):
        g_body, g_skip = self._tail_backward(grad)
        g = self.pw2.backward(self.bn2.backward(self.se.backward(g_body)))
        g = self._res2_backward(g)
        g = self.pw1.backward(self.bn1.backward(self.relu1.backward(g)))
        return g + g_skip

    def describe(self, in_shape, prefix=""):
        rows, shape = [], in_shape
        for name in ("pw1", "bn1"):
            sub, shape = self._children[name].describe(shape, f"{prefix}.{name}")
            rows += sub
        c, f, t = shape
        hier_in = shape if self.scale == 1 else (self.width, f, t)
        for i, conv in enumerate(self.hier):
            sub, _ = conv.describe(hier_in, f"{prefix}.res2_{i}")
            rows += sub
        for name in ("pw2", "bn2", "se"):
            sub, shape = self._children[name].describe(shape, f"{prefix}.{name}")
            rows += sub
        tail, shape = self._tail_describe(in_shape, shape, prefix)
        return rows + tail, shape
