"""WAV ingestion, ASVspoof-style protocols, fixed-length segments and batching."""

from __future__ import annotations

import logging
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, ParseError, WavFormatError
from .tensor import Rng

log = logging.getLogger(__name__)

SAMPLE_RATE = 16000
LABELS = ("bonafide", "spoof")
DEFAULT_PATH_TEMPLATE = "{root}/{utt_id}.wav"


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


def read_wav(path) -> Waveform:
    """Read 16-bit PCM mono 16 kHz audio, scaled by 1/32768."""
    try:
        with wave.open(str(path), "rb") as wf:
            channels, width, rate, n = wf.getnchannels(), wf.getsampwidth(), wf.getframerate(), wf.getnframes()
            if channels != 1:
                raise WavFormatError("channels", 1, channels)
            if width != 2:
                raise WavFormatError("bit depth", 16, 8 * width)
            if rate != SAMPLE_RATE:
                raise WavFormatError("sample rate", SAMPLE_RATE, rate)
            frames = wf.readframes(n)
    except (wave.Error, EOFError) as exc:
        raise ParseError(f"{path}: not a readable RIFF/WAVE file ({exc})") from exc
    if len(frames) != 2 * n:
        raise ParseError(f"{path}: truncated data chunk ({len(frames)} of {2 * n} bytes)")
    samples = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, rate)


def write_wav(path, w: Waveform | np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    """Write 16-bit PCM mono; values are rounded and clipped to the int16 range."""
    if isinstance(w, Waveform):
        samples, sample_rate = w.samples, w.sample_rate
    else:
        samples = np.asarray(w, dtype=np.float64)
    pcm = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())


@dataclass
class ProtocolEntry:
    speaker_id: str
    utt_id: str
    label: str
    system_id: str = "-"
    aux: str = "-"
    path: str | None = None

    def to_line(self) -> str:
        return f"{self.speaker_id} {self.utt_id} {self.aux} {self.system_id} {self.label}"


def parse_protocol(source, audio_root=None, path_template: str = DEFAULT_PATH_TEMPLATE) -> list[ProtocolEntry]:
    """Parse ``speaker utt_id aux system_id key`` lines from a path or text stream."""
    if isinstance(source, (str, Path)):
        name = str(source)
        text = Path(source).read_text(encoding="utf-8")
    else:
        name = getattr(source, "name", "<stream>")
        text = source.read()
    entries, seen = [], set()
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise ParseError(f"{name}:{lineno}: expected 5 columns, found {len(parts)}")
        speaker, utt, aux, system, key = parts
        if key not in LABELS:
            raise ParseError(f"{name}:{lineno}: unknown key {key!r} (expected bonafide/spoof)")
        if utt in seen:
            raise ParseError(f"{name}:{lineno}: duplicate utterance id {utt}")
        seen.add(utt)
        path = path_template.format(root=audio_root, utt_id=utt) if audio_root is not None else None
        entries.append(ProtocolEntry(speaker, utt, key, system, aux, path))
    return entries


def format_protocol(entries: Iterable[ProtocolEntry]) -> str:
    return "".join(e.to_line() + "\n" for e in entries)


def fix_length(w: Waveform, target: int, mode: str = "eval", rng: Rng | None = None) -> Waveform:
    """Crop (random offset in train mode, head in eval mode) or tile to ``target`` samples."""
    n = len(w.samples)
    if n == 0:
        raise DataError("cannot fix the length of an empty waveform")
    if n >= target:
        start = 0
        if mode == "train" and n > target:
            if rng is None:
                raise ValueError("train-mode cropping needs an rng")
            start = int(rng.integers(0, n - target + 1))
        out = w.samples[start:start + target]
    else:
        reps = -(-target // n)
        out = np.tile(w.samples, reps)[:target]
    return Waveform(out.copy(), w.sample_rate)


@dataclass
class Utterance:
    utt_id: str
    label: str
    wave: Waveform

    @property
    def duration_s(self) -> float:
        return self.wave.duration_s

    @property
    def target(self) -> int:
        return 1 if self.label == "bonafide" else 0


def load_utterances(entries: Sequence[ProtocolEntry]) -> tuple[list[Utterance], list[str]]:
    """Read every entry's audio; unreadable files are logged and returned as skipped ids."""
    utts, skipped = [], []
    for e in entries:
        try:
            if e.path is None:
                raise ParseError(f"no audio path for {e.utt_id}")
            utts.append(Utterance(e.utt_id, e.label, read_wav(e.path)))
        except (OSError, ParseError) as exc:
            log.warning("skipping %s: %s", e.utt_id, exc)
            skipped.append(e.utt_id)
    return utts, skipped


def make_batches(items: Sequence, batch_size: int, seed: int, epoch: int) -> list[list]:
    """Seeded per-epoch shuffle split into batches; the last partial batch is kept."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if len(items) == 0:
        raise DataError("no items to batch")
    order = Rng(seed).spawn(epoch).permutation(len(items))
    return [[items[i] for i in order[k:k + batch_size]] for k in range(0, len(order), batch_size)]


def wav_duration(path) -> float:
    """Duration in seconds from the WAV header alone."""
    try:
        with wave.open(str(path), "rb") as wf:
            return wf.getnframes() / wf.getframerate()
    except (wave.Error, EOFError) as exc:
        raise ParseError(f"{path}: not a readable RIFF/WAVE file ({exc})") from exc
