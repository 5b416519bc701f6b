"""Layer primitives with hand-written forward and backward passes."""

from .base import Layer, Sequential, no_cache
from .blocks import ResBlock, SERes2Block
from .layers import Abs, BatchNorm, Conv1d, Conv2d, Linear, MaxPool2d, MeanPool, ReLU, SEBlock
from .sinc import SincBank, SincConv, sinc_bank_init, sinc_conv_forward, sinc_filters

__all__ = [
    "Abs", "BatchNorm", "Conv1d", "Conv2d", "Layer", "Linear", "MaxPool2d", "MeanPool",
    "ReLU", "ResBlock", "SEBlock", "SERes2Block", "Sequential", "SincBank", "SincConv",
    "no_cache", "sinc_bank_init", "sinc_conv_forward", "sinc_filters",
]
