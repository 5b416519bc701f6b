"""Time-frequency separated convolution block.

Input (B, C, F, T) goes through a 1x1 transition to C' channels, an optional
channel shuffle, and an even channel split. The first half feeds the
frequency branch, the second half the time branch. Each branch summarises
its half into a 1D vector (per time step or per frequency bin) that is
broadcast back and added to the half it came from:

    freq: out[c, i, j] = x_f[c, i, j] + v_f[c, j]
    time: out[c, i, j] = x_t[c, i, j] + v_t[c, i]

The two halves are concatenated back to C' channels (frequency half first).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .nn.base import Layer, Sequential, caching
from .nn.blocks import pointwise
from .nn.layers import BatchNorm, Conv2d, MeanPool, ReLU
from .tensor import Rng


@dataclass(frozen=True)
class TfConvConfig:
    in_channels: int
    out_channels: int
    enable_freq_branch: bool = True
    enable_time_branch: bool = True
    enable_shuffle: bool = True
    shuffle_groups: int = 2

    def validate(self) -> None:
        if not (self.enable_freq_branch or self.enable_time_branch):
            raise ConfigError("TF-Conv needs at least one of the frequency/time branches")
        if self.in_channels < 1 or self.out_channels < 2 or self.out_channels % 2:
            raise ConfigError(f"out_channels must be even and >= 2, got {self.out_channels}")
        if self.enable_shuffle and self.out_channels % self.shuffle_groups:
            raise ConfigError(
                f"out_channels={self.out_channels} not divisible by shuffle_groups={self.shuffle_groups}"
            )


def shuffle_permutation(channels: int, groups: int) -> np.ndarray:
    """Source channel for each output channel: ``out[k] = in[perm[k]]``."""
    if groups < 1 or channels % groups:
        raise ConfigError(f"{channels} channels not divisible by {groups} shuffle groups")
    return np.arange(channels).reshape(groups, channels // groups).T.reshape(-1)


def channel_shuffle(x: np.ndarray, groups: int) -> np.ndarray:
    """Reshape channels to (groups, C/groups), transpose, flatten. Channel axis is ndim-3."""
    axis = x.ndim - 3
    return np.take(x, shuffle_permutation(x.shape[axis], groups), axis=axis)


def channel_unshuffle(x: np.ndarray, groups: int) -> np.ndarray:
    axis = x.ndim - 3
    perm = shuffle_permutation(x.shape[axis], groups)
    return np.take(x, np.argsort(perm), axis=axis)


def split_channels(x: np.ndarray):
    axis = x.ndim - 3
    c = x.shape[axis]
    if c % 2:
        raise ConfigError(f"cannot split {c} channels evenly")
    return np.split(x, 2, axis=axis)


def broadcast_add_freq(x_f: np.ndarray, v_f: np.ndarray) -> np.ndarray:
    """``x_f[..., c, i, j] + v_f[..., c, 0, j]`` for every frequency bin i."""
    if v_f.shape[-2] != 1 or v_f.shape[-1] != x_f.shape[-1] or v_f.shape[-3] != x_f.shape[-3]:
        raise DimensionError(f"frequency summary {v_f.shape} incompatible with map {x_f.shape}")
    return x_f + v_f


def broadcast_add_time(x_t: np.ndarray, v_t: np.ndarray) -> np.ndarray:
    """``x_t[..., c, i, j] + v_t[..., c, i, 0]`` for every time step j."""
    if v_t.shape[-1] != 1 or v_t.shape[-2] != x_t.shape[-2] or v_t.shape[-3] != x_t.shape[-3]:
        raise DimensionError(f"time summary {v_t.shape} incompatible with map {x_t.shape}")
    return x_t + v_t


class AxisBranch(Sequential):
    """Depthwise conv along one axis -> BN -> ReLU -> mean over that axis -> 1x1 -> BN."""

    def __init__(self, channels: int, axis: str, rng: Rng):
        if axis == "freq":
            kernel, pad, pool_axis = (3, 1), (1, 0), 2
        elif axis == "time":
            kernel, pad, pool_axis = (1, 3), (0, 1), 3
        else:
            raise ValueError(f"axis must be 'freq' or 'time', got {axis!r}")
        super().__init__(
            ("dw", Conv2d(channels, channels, kernel, rng, padding=pad, groups=channels)),
            ("bn1", BatchNorm(channels)),
            ("relu", ReLU()),
            ("pool", MeanPool(pool_axis, keepdims=True)),
            ("pw", pointwise(channels, channels, rng)),
            ("bn2", BatchNorm(channels)),
        )
        self.axis = axis


def freq_branch(x_f: np.ndarray, branch: AxisBranch, train: bool = False) -> np.ndarray:
    """(B, c, F, T) -> v_f of shape (B, c, 1, T)."""
    return branch.forward(x_f, train)


def time_branch(x_t: np.ndarray, branch: AxisBranch, train: bool = False) -> np.ndarray:
    """(B, c, F, T) -> v_t of shape (B, c, F, 1)."""
    return branch.forward(x_t, train)


class TfConvBlock(Layer):
    """A disabled branch leaves its channel half untouched (identity, no parameters)."""

    def __init__(self, cfg: TfConvConfig, rng: Rng):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        half = cfg.out_channels // 2
        self.transition = self.add("transition", Sequential(
            ("conv", pointwise(cfg.in_channels, cfg.out_channels, rng)),
            ("bn", BatchNorm(cfg.out_channels)),
            ("relu", ReLU()),
        ))
        self.freq = self.add("freq", AxisBranch(half, "freq", rng)) if cfg.enable_freq_branch else None
        self.time = self.add("time", AxisBranch(half, "time", rng)) if cfg.enable_time_branch else None
        self.last_branch_inputs = None

    def forward(self, x, train=False):
        h = self.transition.forward(x, train)
        if self.cfg.enable_shuffle:
            h = channel_shuffle(h, self.cfg.shuffle_groups)
        x_f, x_t = split_channels(h)
        if caching():
            self.last_branch_inputs = (x_f, x_t)
        y_f = x_f if self.freq is None else broadcast_add_freq(x_f, freq_branch(x_f, self.freq, train))
        y_t = x_t if self.time is None else broadcast_add_time(x_t, time_branch(x_t, self.time, train))
        return np.concatenate([y_f, y_t], axis=1)

    def backward(self, grad):
        g_f, g_t = split_channels(grad)
        if self.freq is not None:
            g_f = g_f + self.freq.backward(g_f.sum(axis=2, keepdims=True))
        if self.time is not None:
            g_t = g_t + self.time.backward(g_t.sum(axis=3, keepdims=True))
        g = np.concatenate([g_f, g_t], axis=1)
        if self.cfg.enable_shuffle:
            g = channel_unshuffle(g, self.cfg.shuffle_groups)
        return self.transition.backward(g)

    def describe(self, in_shape, prefix=""):
        rows, shape = self.transition.describe(in_shape, f"{prefix}.transition")
        c, f, t = shape
        for name in ("freq", "time"):
            branch = self._children.get(name)
            if branch is not None:
                sub, _ = branch.describe((c // 2, f, t), f"{prefix}.{name}")
                rows += sub
        return rows, shape
