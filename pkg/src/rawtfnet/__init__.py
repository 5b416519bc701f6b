"""Lightweight raw-waveform spoofing countermeasure in numpy.

Sinc filterbank frontend, depthwise-separable residual blocks, TF-Conv
blocks with broadcast frequency/time branches, detection metrics and a
desk-scale training loop.
"""

from .errors import (ConfigError, DataError, DimensionError, NumericError, ParseError, RawTFNetError,
                     StateError, WavFormatError)
from .model import ModelConfig, RawTFNet, build_rawtfnet, detection_score, forward_utterance, tiny_config
from .complexity import ComplexityReport, complexity_report, count_macs, count_params
from .metrics import TdcfCosts, compute_eer, compute_min_tdcf, duration_bucketed_eer

__version__ = "0.1.0"
