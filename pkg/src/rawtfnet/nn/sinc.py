"""Learnable sinc band-pass filter bank over raw waveforms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from ..errors import ConfigError, DimensionError
from .base import Layer


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass
class SincBank:
    """Band edges in Hz. Filter k passes ``[|f_low|, min(|f_low| + |f_band|, nyquist)]``."""

    f_low: np.ndarray
    f_band: np.ndarray
    kernel_len: int
    sample_rate: float

    @property
    def n_filters(self) -> int:
        return len(self.f_low)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        nyq = self.sample_rate / 2.0
        lo = np.minimum(np.abs(self.f_low), nyq)
        hi = np.minimum(lo + np.abs(self.f_band), nyq)
        return lo, hi


def sinc_bank_init(n_filters: int, kernel_len: int, sample_rate: float = 16000.0,
                   f_min: float = 0.0) -> SincBank:
    """Mel-spaced contiguous bands covering ``[f_min, nyquist]``."""
    if n_filters < 1:
        raise ConfigError("n_filters must be >= 1")
    if kernel_len < 1 or kernel_len % 2 == 0:
        raise ConfigError(f"kernel_len must be odd, got {kernel_len}")
    mels = np.linspace(hz_to_mel(f_min), hz_to_mel(sample_rate / 2.0), n_filters + 1)
    edges = mel_to_hz(mels)
    edges[-1] = sample_rate / 2.0
    return SincBank(edges[:-1].copy(), np.diff(edges), int(kernel_len), float(sample_rate))


def _taps(kernel_len):
    return np.arange(kernel_len, dtype=np.float64) - (kernel_len - 1) / 2.0


def _window(kernel_len):
    if kernel_len == 1:
        return np.ones(1)
    n = np.arange(kernel_len, dtype=np.float64)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (kernel_len - 1))


def _lowpass(f, n):
    """``2 f sinc(2 pi f n)`` with f in cycles/sample; shape (filters, taps)."""
    arg = 2.0 * np.pi * f[:, None] * n[None, :]
    safe = np.where(arg == 0.0, 1.0, arg)
    return 2.0 * f[:, None] * np.where(arg == 0.0, 1.0, np.sin(safe) / safe)


def sinc_filters(bank: SincBank) -> np.ndarray:
    """Hamming-windowed band-pass impulse responses, shape (n_filters, kernel_len)."""
    lo, hi = bank.edges()
    n = _taps(bank.kernel_len)
    h = _lowpass(hi / bank.sample_rate, n) - _lowpass(lo / bank.sample_rate, n)
    return h * _window(bank.kernel_len)[None, :]


def sinc_conv_forward(bank: SincBank, wave: np.ndarray) -> np.ndarray:
    """Valid-mode correlation of a waveform (T,) or batch (B, T) with every filter."""
    squeeze = wave.ndim == 1
    x = wave[None] if squeeze else wave
    if x.shape[-1] < bank.kernel_len:
        raise DimensionError(f"waveform of {x.shape[-1]} samples shorter than kernel {bank.kernel_len}")
    h = sinc_filters(bank)
    # correlation = convolution with the time-reversed kernel; FFT based
    y = fftconvolve(x[:, None, :], h[None, :, ::-1], mode="valid", axes=-1)
    return y[0] if squeeze else y


class SincConv(Layer):
    """(B, T) waveform -> (B, n_filters, T - kernel_len + 1) band-passed signals."""

    def __init__(self, n_filters=70, kernel_len=129, sample_rate=16000.0):
        super().__init__()
        bank = sinc_bank_init(n_filters, kernel_len, sample_rate)
        self.kernel_len, self.sample_rate = kernel_len, float(sample_rate)
        self.params["f_low"] = bank.f_low
        self.params["f_band"] = bank.f_band

    @property
    def bank(self) -> SincBank:
        return SincBank(self.params["f_low"], self.params["f_band"], self.kernel_len, self.sample_rate)

    def forward(self, x, train=False):
        self._save(x)
        return sinc_conv_forward(self.bank, x)

    def backward(self, grad):
        (x,) = self._load()
        if x.ndim == 1:
            x, grad = x[None], grad[None]
        # dL/dh[k, n] = sum_b sum_t grad[b, k, t] * x[b, t + n]
        gh = fftconvolve(x[:, None, :], grad[:, :, ::-1], mode="valid", axes=-1).sum(axis=0)
        self._filter_grads(gh)
        return None

    def _filter_grads(self, gh):
        bank = self.bank
        nyq = self.sample_rate / 2.0
        a, b = self.params["f_low"], self.params["f_band"]
        lo, hi = bank.edges()
        n = _taps(self.kernel_len)
        win = _window(self.kernel_len)
        # d/df [2 f sinc(2 pi f n)] = 2 cos(2 pi f n), f normalized by sample rate
        dh_dhi = 2.0 * np.cos(2.0 * np.pi * (hi / self.sample_rate)[:, None] * n) * win / self.sample_rate
        dh_dlo = -2.0 * np.cos(2.0 * np.pi * (lo / self.sample_rate)[:, None] * n) * win / self.sample_rate
        g_hi = (gh * dh_dhi).sum(axis=1)
        g_lo = (gh * dh_dlo).sum(axis=1)
        lo_free = (np.abs(a) < nyq).astype(float)
        hi_free = (np.abs(a) + np.abs(b) < nyq).astype(float)
        sign_a = np.where(a >= 0, 1.0, -1.0)
        sign_b = np.where(b >= 0, 1.0, -1.0)
        g_lo_total = g_lo + g_hi * hi_free
        self.grads["f_low"] = g_lo_total * lo_free * sign_a
        self.grads["f_band"] = g_hi * hi_free * sign_b

    def output_shape(self, in_shape):
        (t,) = in_shape
        return len(self.params["f_low"]), t - self.kernel_len + 1

    def macs(self, in_shape):
        nf, tout = self.output_shape(in_shape)
        return nf * self.kernel_len * tout
