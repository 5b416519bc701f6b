"""Detection metrics: EER, min t-DCF, DET operating points, duration buckets.

All metrics share one threshold sweep: the midpoints between consecutive
distinct scores plus -inf and +inf. A trial is accepted as bonafide when its
score is >= the threshold, so

    FRR(t) = #{bonafide < t} / n_bonafide     (miss rate)
    FAR(t) = #{spoof >= t} / n_spoof          (false-alarm rate)

Along the ascending sweep FAR is non-increasing and FRR non-decreasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError, ParseError

DEFAULT_DURATION_EDGES = (0.0, 2.0, 4.0, 6.0, 8.0, math.inf)


@dataclass
class ScoreSet:
    bonafide_scores: Sequence[float]
    spoof_scores: Sequence[float]

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        bona = np.asarray(self.bonafide_scores, dtype=np.float64).ravel()
        spoof = np.asarray(self.spoof_scores, dtype=np.float64).ravel()
        if bona.size == 0 or spoof.size == 0:
            raise DataError("both bonafide and spoof scores are required")
        if not (np.all(np.isfinite(bona)) and np.all(np.isfinite(spoof))):
            raise DataError("scores must be finite")
        return bona, spoof


@dataclass(frozen=True)
class TdcfCosts:
    """Coefficients of the constrained t-DCF: C0 + C1 * Pmiss + C2 * Pfa."""

    c0: float
    c1: float
    c2: float

    @property
    def normalizer(self) -> float:
        return self.c0 + min(self.c1, self.c2)

    def validate(self) -> None:
        if min(self.c0, self.c1, self.c2) < 0:
            raise ConfigError("t-DCF coefficients must be nonnegative")
        if self.normalizer <= 0:
            raise ConfigError("t-DCF normalizer C0 + min(C1, C2) must be positive")


@dataclass
class ScoreRecord:
    utt_id: str
    score: float
    duration_s: float | None = None


def _as_arrays(s) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(s, ScoreSet):
        return s.arrays()
    bona, spoof = s
    return ScoreSet(bona, spoof).arrays()


def sweep(s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thresholds and the (FAR, FRR) pair at each one."""
    bona, spoof = _as_arrays(s)
    uniq = np.unique(np.concatenate([bona, spoof]))
    mids = (uniq[:-1] + uniq[1:]) / 2.0
    thr = np.concatenate([[-np.inf], mids, [np.inf]])
    frr = np.searchsorted(np.sort(bona), thr, side="left") / bona.size
    far = 1.0 - np.searchsorted(np.sort(spoof), thr, side="left") / spoof.size
    return thr, far, frr


def det_points(s) -> list[tuple[float, float]]:
    """``(FAR, FRR)`` at every threshold of the sweep, ascending threshold."""
    _, far, frr = sweep(s)
    return list(zip(far.tolist(), frr.tolist()))


def compute_eer(s) -> tuple[float, float]:
    """Equal error rate and its threshold.

    The crossing of FAR and FRR is linearly interpolated between the two
    adjacent sweep points where ``FAR - FRR`` changes sign. Infinite sweep
    ends are replaced by the extreme scores when interpolating the threshold.
    """
    thr, far, frr = sweep(s)
    diff = far - frr
    i = int(np.argmax(diff <= 0))
    if diff[i] == 0:
        return float(far[i]), _finite_threshold(thr, i)
    alpha = diff[i - 1] / (diff[i - 1] - diff[i])
    eer = far[i - 1] + alpha * (far[i] - far[i - 1])
    t0, t1 = _finite_threshold(thr, i - 1), _finite_threshold(thr, i)
    return float(eer), float(t0 + alpha * (t1 - t0))


def _finite_threshold(thr, i) -> float:
    t = thr[i]
    if np.isneginf(t):
        return float(thr[1]) if len(thr) > 2 else 0.0
    if np.isposinf(t):
        return float(thr[-2]) if len(thr) > 2 else 0.0
    return float(t)


def tdcf_curve(s, costs: TdcfCosts) -> tuple[np.ndarray, np.ndarray]:
    costs.validate()
    thr, far, frr = sweep(s)
    return thr, (costs.c0 + costs.c1 * frr + costs.c2 * far) / costs.normalizer


def compute_min_tdcf(s, costs: TdcfCosts) -> tuple[float, float]:
    """Minimum normalised t-DCF over the sweep and the threshold reaching it."""
    thr, curve = tdcf_curve(s, costs)
    i = int(np.argmin(curve))
    return float(curve[i]), float(thr[i])


@dataclass
class BucketResult:
    low: float
    high: float
    n: int
    n_bonafide: int
    n_spoof: int
    eer: float | None

    @property
    def label(self) -> str:
        hi = "inf" if math.isinf(self.high) else f"{self.high:g}"
        return f"[{self.low:g},{hi})"


def bucket_index(duration_s: float, edges: Sequence[float] = DEFAULT_DURATION_EDGES) -> int:
    """Index of the right-open interval ``[edges[k], edges[k+1])`` holding the duration."""
    if duration_s < 0 or not math.isfinite(duration_s):
        raise DataError(f"invalid duration {duration_s}")
    for k in range(len(edges) - 1):
        if edges[k] <= duration_s < edges[k + 1]:
            return k
    raise DataError(f"duration {duration_s} outside bucket edges {list(edges)}")


def duration_bucketed_eer(records: Iterable[ScoreRecord], labels: Mapping[str, str],
                          edges: Sequence[float] = DEFAULT_DURATION_EDGES) -> list[BucketResult]:
    """EER per source-utterance duration bucket; ``eer`` is None if a class is absent."""
    groups: list[list[tuple[float, str]]] = [[] for _ in range(len(edges) - 1)]
    for rec in records:
        if rec.duration_s is None:
            raise DataError(f"record {rec.utt_id} has no duration")
        groups[bucket_index(rec.duration_s, edges)].append((rec.score, labels[rec.utt_id]))
    out = []
    for k, grp in enumerate(groups):
        bona = [sc for sc, lab in grp if lab == "bonafide"]
        spoof = [sc for sc, lab in grp if lab == "spoof"]
        eer = compute_eer((bona, spoof))[0] if bona and spoof else None
        out.append(BucketResult(edges[k], edges[k + 1], len(grp), len(bona), len(spoof), eer))
    return out


def split_by_label(records: Iterable[ScoreRecord], labels: Mapping[str, str]) -> ScoreSet:
    bona, spoof = [], []
    for rec in records:
        (bona if labels[rec.utt_id] == "bonafide" else spoof).append(rec.score)
    return ScoreSet(bona, spoof)


def format_score(score: float) -> str:
    return f"{score:.9e}"


def write_scores(path, records: Iterable[ScoreRecord]) -> None:
    """``utt_id score`` per line, in the given order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(f"{rec.utt_id} {format_score(rec.score)}\n")


def read_scores(path) -> list[ScoreRecord]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'utt_id score', got {line!r}")
        try:
            out.append(ScoreRecord(parts[0], float(parts[1])))
        except ValueError:
            raise ParseError(f"{path}:{lineno}: score {parts[1]!r} is not a number") from None
    return out
