"""Series waveform augmentation: convolutive, impulsive, then stationary noise.

Behavioural reconstruction of the RawBoost families with every range
exposed in :class:`AugmentConfig`; same seed and input give identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .audio import Waveform
from .errors import ConfigError

ALGORITHMS = ("convolutive", "impulsive", "stationary")


@dataclass
class AugmentConfig:
    algorithms: tuple[str, ...] = ALGORITHMS
    n_bands: int = 5
    notch_width_hz: tuple[float, float] = (20.0, 1000.0)
    fir_taps: int = 101
    impulse_density: tuple[float, float] = (0.0, 10.0)  # impulses per 1000 samples
    impulse_gain: tuple[float, float] = (0.0, 2.0)  # relative to |x| at the impulse
    snr_db: tuple[float, float] = (10.0, 40.0)
    seed: int = 0

    def __post_init__(self):
        self.algorithms = tuple(self.algorithms)
        for name in ("notch_width_hz", "impulse_density", "impulse_gain", "snr_db"):
            setattr(self, name, tuple(float(v) for v in getattr(self, name)))

    def validate(self) -> None:
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ConfigError(f"unknown augmentation algorithms {sorted(unknown)}")
        if self.n_bands < 1:
            raise ConfigError("n_bands must be >= 1")
        if self.fir_taps < 3 or self.fir_taps % 2 == 0:
            raise ConfigError("fir_taps must be odd and >= 3")
        for name in ("notch_width_hz", "impulse_density", "impulse_gain", "snr_db"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name} range is empty: ({lo}, {hi})")


def notch_fir(cfg: AugmentConfig, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    """Linear-phase FIR whose magnitude is zero inside ``n_bands`` random notches."""
    nyq = sample_rate / 2.0
    freqs = np.linspace(0.0, nyq, 257)
    gain = np.ones_like(freqs)
    for _ in range(cfg.n_bands):
        center = rng.uniform(0.0, nyq)
        width = rng.uniform(*cfg.notch_width_hz)
        gain[np.abs(freqs - center) <= width / 2.0] = 0.0
    return signal.firwin2(cfg.fir_taps, freqs, gain, fs=sample_rate)


def convolutive_noise(x, cfg, sample_rate, rng):
    h = notch_fir(cfg, sample_rate, rng)
    return np.convolve(x, h, mode="same")


def impulsive_noise(x, cfg, rng):
    n = len(x)
    count = int(round(rng.uniform(*cfg.impulse_density) * n / 1000.0))
    if count == 0 or n == 0:
        return x.copy()
    pos = rng.choice(n, size=min(count, n), replace=False)
    signs = rng.choice([-1.0, 1.0], size=len(pos))
    gains = rng.uniform(*cfg.impulse_gain, size=len(pos))
    y = x.copy()
    y[pos] += signs * gains * np.abs(x[pos])
    return y


def colored_noise(n, rng):
    white = rng.standard_normal(n)
    pole = rng.uniform(-0.9, 0.9)
    return signal.lfilter([1.0], [1.0, -pole], white)


def stationary_noise(x, cfg, rng, snr_db=None):
    """Add colored noise at ``snr_db`` (drawn from the config range when None)."""
    if snr_db is None:
        snr_db = rng.uniform(*cfg.snr_db)
    noise = colored_noise(len(x), rng)
    p_sig = float(np.mean(x ** 2)) if len(x) else 0.0
    p_noise = float(np.mean(noise ** 2)) if len(x) else 0.0
    if p_sig == 0.0 or p_noise == 0.0:
        return x.copy(), np.zeros_like(x)
    noise *= np.sqrt(p_sig / (p_noise * 10.0 ** (snr_db / 10.0)))
    return x + noise, noise


def rawboost_series(w: Waveform, cfg: AugmentConfig, rng: np.random.Generator | None = None) -> Waveform:
    """Apply the enabled families in series and clip to [-1, 1]; length is preserved."""
    cfg.validate()
    if not cfg.algorithms:
        return Waveform(w.samples.copy(), w.sample_rate)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    x = np.asarray(w.samples, dtype=np.float64)
    if "convolutive" in cfg.algorithms:
        x = convolutive_noise(x, cfg, w.sample_rate, rng)
    if "impulsive" in cfg.algorithms:
        x = impulsive_noise(x, cfg, rng)
    if "stationary" in cfg.algorithms:
        x, _ = stationary_noise(x, cfg, rng)
    return Waveform(np.clip(x, -1.0, 1.0), w.sample_rate)
