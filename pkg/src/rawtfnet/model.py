"""RawTFNet assembly: waveform -> sinc frontend -> TF-Conv stack -> two logits."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ConfigError, DimensionError
from .nn.base import Layer, Sequential, no_cache
from .nn.blocks import ResBlock, SERes2Block
from .nn.layers import Abs, Conv1d, MaxPool2d, MeanPool
from .nn.sinc import SincConv
from .tensor import Rng
from .tfconv import TfConvBlock, TfConvConfig

BONAFIDE = 1
SPOOF = 0


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    The TF-Conv stack runs at ``tau * tf_width_mult`` channels. Frontend
    pooling windows act on the time axis only, so all ``sinc_filters``
    frequency bins reach the TF-Conv stack.
    """

    tau: int = 16
    tf_width_mult: int = 3
    n_tf_blocks: int = 9
    sinc_filters: int = 70
    sinc_kernel_len: int = 129
    sinc_pool: int = 18
    frontend_filters: tuple[int, int] = (32, 64)
    n_res2_blocks: int = 3
    frontend_pool: tuple[int, ...] = (2, 2, 2, 2)
    res2_scale: int = 4
    res2_dilation: int = 2
    se_reduction: int = 8
    pool_positions: tuple[int, ...] = (3, 6)
    freq_branch: bool = True
    time_branch: bool = True
    shuffle: bool = True
    shuffle_groups: int = 2
    sample_rate: int = 16000
    segment_len: int = 64000

    def __post_init__(self):
        self.frontend_filters = tuple(self.frontend_filters)
        self.frontend_pool = tuple(self.frontend_pool)
        self.pool_positions = tuple(self.pool_positions)

    @property
    def tf_channels(self) -> int:
        return self.tau * self.tf_width_mult

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"ModelConfig.{name}: {why}")

        for name in ("tau", "tf_width_mult", "n_tf_blocks", "sinc_filters", "sinc_pool",
                     "res2_scale", "res2_dilation", "se_reduction", "shuffle_groups", "sample_rate"):
            if int(getattr(self, name)) < 1:
                bad(name, "must be >= 1")
        if self.n_res2_blocks < 0:
            bad("n_res2_blocks", "must be >= 0")
        if self.sinc_kernel_len < 1 or self.sinc_kernel_len % 2 == 0:
            bad("sinc_kernel_len", "must be odd")
        if len(self.frontend_filters) != 2 or min(self.frontend_filters) < 1:
            bad("frontend_filters", "expected (resnet_filters, res2_filters), both >= 1")
        if self.frontend_filters[1] % self.res2_scale:
            bad("frontend_filters", f"{self.frontend_filters[1]} not divisible by res2_scale")
        if len(self.frontend_pool) != 1 + self.n_res2_blocks:
            bad("frontend_pool", f"needs {1 + self.n_res2_blocks} windows (one per frontend block)")
        if any(int(p) < 1 for p in self.frontend_pool):
            bad("frontend_pool", "windows must be >= 1")
        if not set(self.pool_positions) <= set(range(1, self.n_tf_blocks + 1)):
            bad("pool_positions", f"must lie in 1..{self.n_tf_blocks}")
        if self.tf_channels % 2:
            bad("tau", f"TF width {self.tf_channels} must be even")
        if self.shuffle and self.tf_channels % self.shuffle_groups:
            bad("shuffle_groups", f"does not divide TF width {self.tf_channels}")
        if not (self.freq_branch or self.time_branch):
            bad("freq_branch", "at least one TF branch must be enabled")
        if self.segment_len < self.sinc_kernel_len:
            bad("segment_len", "shorter than the sinc kernel")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown ModelConfig fields: {sorted(unknown)}")
        return cls(**d)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class AddChannel(Layer):
    """(B, F, T) -> (B, 1, F, T)."""

    def forward(self, x, train=False):
        return x[:, None]

    def backward(self, grad):
        return grad[:, 0]

    def output_shape(self, in_shape):
        return (1,) + tuple(in_shape)


class RawTFNet(Sequential):
    def __init__(self, cfg: ModelConfig, rng: Rng):
        cfg.validate()
        self.cfg = cfg
        c_res, c_res2 = cfg.frontend_filters
        frontend = [
            ("sinc", SincConv(cfg.sinc_filters, cfg.sinc_kernel_len, cfg.sample_rate)),
            ("abs", Abs()),
            ("unsqueeze", AddChannel()),
            ("sinc_pool", MaxPool2d((1, cfg.sinc_pool))),
            ("resblock", ResBlock(1, c_res, rng, pool=_time_pool(cfg.frontend_pool[0]))),
        ]
        in_ch = c_res
        for i in range(cfg.n_res2_blocks):
            block = SERes2Block(in_ch, c_res2, rng, scale=cfg.res2_scale, dilation=cfg.res2_dilation,
                                se_reduction=cfg.se_reduction, pool=_time_pool(cfg.frontend_pool[i + 1]))
            frontend.append((f"res2block{i + 1}", block))
            in_ch = c_res2
        stack = []
        width = cfg.tf_channels
        for i in range(1, cfg.n_tf_blocks + 1):
            tf_cfg = TfConvConfig(in_ch, width, cfg.freq_branch, cfg.time_branch, cfg.shuffle,
                                  cfg.shuffle_groups)
            stack.append((f"tf{i}", TfConvBlock(tf_cfg, rng)))
            if i in cfg.pool_positions:
                stack.append((f"pool{i}", MaxPool2d(2, 2)))
            in_ch = width
        head = Conv1d(width, 2, 1, rng, bias=True)
        # zero-initialised head: an untrained model scores every input identically
        head.params["weight"][:] = 0.0
        classifier = [
            ("freq_pool", MeanPool(2, keepdims=False)),
            ("conv1d", head),
            ("time_pool", MeanPool(2, keepdims=False)),
        ]
        super().__init__(
            ("frontend", Sequential(*frontend)),
            ("tfconvs", Sequential(*stack)),
            ("classifier", Sequential(*classifier)),
        )

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None]
        if x.ndim != 2:
            raise DimensionError(f"expected waveform (T,) or batch (B, T), got {x.shape}")
        out = super().forward(x, train)
        return out[0] if squeeze else out

    def backward(self, grad):
        if grad.ndim == 1:
            grad = grad[None]
        return super().backward(grad)


def _time_pool(window):
    return (1, int(window)) if int(window) > 1 else None


def build_rawtfnet(cfg: ModelConfig, rng: Rng | int = 0) -> RawTFNet:
    if not isinstance(rng, Rng):
        rng = Rng(int(rng))
    return RawTFNet(cfg, rng)


def forward_utterance(model: RawTFNet, wave, mode: str = "eval") -> np.ndarray:
    """Logits ``[spoof, bonafide]`` for one ``segment_len``-sample waveform."""
    wave = np.asarray(wave, dtype=np.float64)
    if wave.shape != (model.cfg.segment_len,):
        raise DimensionError(f"expected {model.cfg.segment_len} samples, got shape {wave.shape}")
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    if mode == "eval":
        with no_cache():
            return model.forward(wave, train=False)
    return model.forward(wave, train=True)


def detection_score(logits: np.ndarray) -> np.ndarray:
    """Bonafide logit minus spoof logit (higher means more likely bonafide)."""
    logits = np.asarray(logits)
    return logits[..., BONAFIDE] - logits[..., SPOOF]


def tiny_config(**overrides) -> ModelConfig:
    """A desk-scale configuration for gradient checks and quick tests."""
    base = dict(
        tau=4, tf_width_mult=1, n_tf_blocks=1, sinc_filters=4, sinc_kernel_len=129, sinc_pool=18,
        frontend_filters=(4, 8), n_res2_blocks=0, frontend_pool=(2,), pool_positions=(),
        segment_len=2000,
    )
    base.update(overrides)
    return ModelConfig(**base)
