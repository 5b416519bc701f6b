"""Two-class synthetic corpus standing in for ASVspoof at desk scale.

Every utterance is band-limited noise plus an amplitude-modulated tone. The
noise band depends on the class (bonafide 300-1200 Hz, spoof 2500-4000 Hz);
the tone is drawn from the same distribution for both classes and is
always weaker than the noise, so the classes stay separable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .audio import SAMPLE_RATE, ProtocolEntry, format_protocol, write_wav
from .augment import AugmentConfig
from .model import ModelConfig

BANDS = {"bonafide": (300.0, 1200.0), "spoof": (2500.0, 4000.0)}


@dataclass
class SplitSpec:
    name: str
    prefix: str
    n: int
    duration_s: tuple[float, float]


DEFAULT_SPLITS = (
    SplitSpec("train", "SYN_T", 200, (1.0, 4.0)),
    SplitSpec("dev", "SYN_D", 60, (1.0, 4.0)),
    SplitSpec("eval", "SYN_E", 100, (0.5, 10.0)),
)


def synthetic_model_config(**overrides) -> ModelConfig:
    """tau=16 with a reduced frontend and 1 s segments, sized for single-CPU training."""
    base = dict(tau=16, tf_width_mult=1, sinc_filters=16, sinc_kernel_len=65, sinc_pool=32,
                frontend_filters=(8, 16), n_res2_blocks=1, frontend_pool=(2, 2), segment_len=16000)
    base.update(overrides)
    return ModelConfig(**base)


def synth_utterance(label: str, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n_samples) / SAMPLE_RATE
    lo, hi = BANDS[label]
    sos = signal.butter(4, [lo, hi], btype="bandpass", fs=SAMPLE_RATE, output="sos")
    noise = signal.sosfilt(sos, rng.standard_normal(n_samples))
    noise /= np.std(noise) + 1e-12
    carrier = rng.uniform(200.0, 3000.0)
    mod = rng.uniform(2.0, 8.0)
    depth = rng.uniform(0.3, 0.9)
    tone = (1.0 + depth * np.sin(2 * np.pi * mod * t)) * np.sin(2 * np.pi * carrier * t + rng.uniform(0, 2 * np.pi))
    x = rng.uniform(0.6, 1.0) * noise + rng.uniform(0.2, 0.6) * tone
    return 0.5 * x / (np.max(np.abs(x)) + 1e-12)


def generate(out_dir, seed: int = 0, splits=DEFAULT_SPLITS, bonafide_fraction: float = 0.25) -> dict[str, Path]:
    """Write ``wav/<utt_id>.wav`` and ``protocol_<split>.txt`` files; returns protocol paths."""
    out = Path(out_dir)
    (out / "wav").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    protocols = {}
    for spec in splits:
        entries = []
        n_bona = int(round(spec.n * bonafide_fraction))
        labels = ["bonafide"] * n_bona + ["spoof"] * (spec.n - n_bona)
        labels = [labels[i] for i in rng.permutation(spec.n)]
        for i, label in enumerate(labels):
            utt = f"{spec.prefix}_{i:05d}"
            n_samples = int(rng.uniform(*spec.duration_s) * SAMPLE_RATE)
            write_wav(out / "wav" / f"{utt}.wav", synth_utterance(label, n_samples, rng))
            system = "-" if label == "bonafide" else "S01"
            entries.append(ProtocolEntry(f"SYN_{i % 20:04d}", utt, label, system, "-"))
        path = out / f"protocol_{spec.name}.txt"
        path.write_text(format_protocol(entries), encoding="utf-8")
        protocols[spec.name] = path
    return protocols


def synthetic_run_config(out_dir, protocols: dict, seed: int = 0):
    """Run config for training on a generated corpus (no augmentation, 20 epochs)."""
    from .config import RunConfig

    out = Path(out_dir)
    return RunConfig(
        model=synthetic_model_config(),
        augment=AugmentConfig(algorithms=()),
        epochs=20,
        audio_root=str(out / "wav"),
        train_protocol=str(protocols["train"]),
        dev_protocol=str(protocols["dev"]),
        eval_protocol=str(protocols["eval"]),
        seed=seed,
        output_dir=str(out / "run"),
    )
