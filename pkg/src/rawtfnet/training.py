"""Weighted cross-entropy, Adam, the epoch loop, checkpoints and scoring."""

from __future__ import annotations

import io
import json
import logging
import math
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .audio import Utterance, fix_length, load_utterances, make_batches
from .augment import AugmentConfig, rawboost_series
from .errors import NumericError, StateError
from .metrics import ScoreRecord, compute_eer
from .model import ModelConfig, RawTFNet, detection_score
from .nn.base import Layer, no_cache
from .nn.functional import log_softmax
from .tensor import Rng

log = logging.getLogger(__name__)

DEFAULT_CLASS_WEIGHTS = (0.1, 0.9)  # (spoof, bonafide)


def weighted_cross_entropy(logits, labels, class_weights=DEFAULT_CLASS_WEIGHTS):
    """Weight-normalised mean of per-sample cross-entropy.

    ``loss = sum_i w[y_i] * -log softmax(logits_i)[y_i] / sum_i w[y_i]``.
    Returns ``(loss, dloss/dlogits)``.
    """
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    w = np.asarray(class_weights, dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("class weights must be positive")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= logits.shape[1]:
        raise ValueError("labels out of range")
    lsm = log_softmax(logits, axis=1)
    ws = w[labels]
    total = ws.sum()
    rows = np.arange(len(labels))
    loss = float(-(ws * lsm[rows, labels]).sum() / total)
    grad = np.exp(lsm)
    grad[rows, labels] -= 1.0
    grad *= (ws / total)[:, None]
    return loss, grad


@dataclass
class OptimState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: OptimState) -> OptimState:
    """One Adam update in place, with weight decay added to the gradient (coupled L2)."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}; step aborted")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, theta in params.items():
        g = grads[name] + state.weight_decay * theta
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(theta)
            state.v[name] = np.zeros_like(theta)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        theta -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


class Adam:
    """Binds :func:`adam_step` to a model's named parameters."""

    def __init__(self, model: Layer, lr=1e-4, weight_decay=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.model = model
        self.state = OptimState(lr, beta1, beta2, eps, weight_decay)

    def step(self) -> None:
        params, grads = {}, {}
        for name, layer, key in self.model.named_parameters():
            if key not in layer.grads:
                raise StateError(f"no gradient for {name}; run backward first")
            params[name] = layer.params[key]
            grads[name] = layer.grads[key]
        adam_step(params, grads, self.state)


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    accuracy: float


def prepare_batch(batch: Sequence[Utterance], segment_len: int, seed: int, epoch: int, batch_index: int,
                  augment: AugmentConfig | None = None, mode: str = "train"):
    """Augment then fix the length of every utterance; returns (waves, targets)."""
    waves, targets = [], []
    for j, utt in enumerate(batch):
        rng = Rng(seed).spawn(epoch, batch_index, j)
        w = utt.wave
        if augment is not None and augment.algorithms:
            w = rawboost_series(w, augment, rng.generator)
        waves.append(fix_length(w, segment_len, mode, rng).samples)
        targets.append(utt.target)
    return np.stack(waves), np.asarray(targets)


def train_epoch(model: RawTFNet, batches, optim: Adam, epoch: int = 0, seed: int = 0,
                augment: AugmentConfig | None = None, class_weights=DEFAULT_CLASS_WEIGHTS) -> EpochStats:
    losses, sizes, correct = [], [], 0
    for b, batch in enumerate(batches):
        x, y = prepare_batch(batch, model.cfg.segment_len, seed, epoch, b, augment)
        try:
            logits = model.forward(x, train=True)
            loss, g = weighted_cross_entropy(logits, y, class_weights)
            model.backward(g)
            optim.step()
        except NumericError as exc:
            raise NumericError(f"epoch {epoch} batch {b}: {exc}") from exc
        losses.append(loss)
        sizes.append(len(batch))
        correct += int((logits.argmax(axis=1) == y).sum())
    n = sum(sizes)
    return EpochStats(epoch, float(np.dot(losses, sizes) / n), correct / n)


# checkpoints

@dataclass
class Checkpoint:
    state: dict
    epoch: int = -1
    metric: float = math.nan
    metric_name: str = "val_eer"
    config: dict | None = None

    @property
    def fingerprint(self) -> str | None:
        return ModelConfig.from_dict(self.config).fingerprint() if self.config is not None else None


_ZIP_TIME = (1980, 1, 1, 0, 0, 0)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    """Zip of ``<name>.npy`` tensors plus ``meta.json``; byte-identical for equal inputs."""
    meta = {
        "epoch": ckpt.epoch,
        "metric": None if math.isnan(ckpt.metric) else ckpt.metric,
        "metric_name": ckpt.metric_name,
        "config": ckpt.config,
        "fingerprint": ckpt.fingerprint,
        "tensors": {k: list(v.shape) for k, v in sorted(ckpt.state.items())},
    }
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        zf.writestr(zipfile.ZipInfo("meta.json", _ZIP_TIME), json.dumps(meta, sort_keys=True, indent=1))
        for name in sorted(ckpt.state):
            buf = io.BytesIO()
            np.save(buf, np.ascontiguousarray(ckpt.state[name], dtype=np.float64))
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", _ZIP_TIME), buf.getvalue())


def load_checkpoint(path, expect: ModelConfig | None = None) -> Checkpoint:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        state = {name: np.load(io.BytesIO(zf.read(f"{name}.npy"))) for name in meta["tensors"]}
    ckpt = Checkpoint(state, meta["epoch"], math.nan if meta["metric"] is None else meta["metric"],
                      meta["metric_name"], meta["config"])
    if expect is not None and meta["fingerprint"] != expect.fingerprint():
        raise StateError(
            f"checkpoint config fingerprint {meta['fingerprint']} does not match {expect.fingerprint()}"
        )
    return ckpt


def snapshot(model: RawTFNet, epoch: int, metric: float, metric_name: str = "val_eer") -> Checkpoint:
    return Checkpoint(model.state_dict(), epoch, metric, metric_name, model.cfg.to_dict())


def select_and_average_checkpoints(checkpoints: Sequence[Checkpoint], k: int = 5) -> Checkpoint:
    """Elementwise mean of the k checkpoints with the lowest metric.

    Ties go to the later checkpoint: once a validation metric saturates, the
    most trained snapshots are the ones worth keeping.
    """
    if not checkpoints:
        raise StateError("no checkpoints to average")
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(range(len(checkpoints)), key=lambda i: (checkpoints[i].metric, -i))
    chosen = [checkpoints[i] for i in ranked[:k]]
    names = chosen[0].state.keys()
    state = {n: np.mean([c.state[n] for c in chosen], axis=0) for n in names}
    best = chosen[0]
    metric = float(np.mean([c.metric for c in chosen]))
    return Checkpoint(state, best.epoch, metric, best.metric_name, best.config)


# scoring

def score_utterances(model: RawTFNet, utts: Sequence[Utterance], batch_size: int = 16,
                     threads: int = 1) -> list[ScoreRecord]:
    """Eval-mode scores on each utterance's head segment, in input order.

    Chunks are fixed by ``batch_size`` alone, so the scores do not depend on
    ``threads``.
    """
    seg = model.cfg.segment_len
    chunks = [utts[k:k + batch_size] for k in range(0, len(utts), batch_size)]

    def run(chunk):
        x = np.stack([fix_length(u.wave, seg, "eval").samples for u in chunk])
        scores = detection_score(model.forward(x, train=False))
        return [ScoreRecord(u.utt_id, float(s), u.duration_s) for u, s in zip(chunk, scores)]

    with no_cache():
        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(threads) as pool:
                parts = list(pool.map(run, chunks))
        else:
            parts = [run(c) for c in chunks]
    return [r for part in parts for r in part]


def score_eval_set(model: RawTFNet, entries, batch_size: int = 16, threads: int = 1):
    """Load and score protocol entries; returns ``(records, skipped_ids)``."""
    utts, skipped = load_utterances(entries)
    return score_utterances(model, utts, batch_size, threads), skipped


def validation_metric(model: RawTFNet, utts: Sequence[Utterance], class_weights=DEFAULT_CLASS_WEIGHTS):
    """``("val_eer", eer)`` when both classes are present, else ``("val_loss", loss)``."""
    records = score_utterances(model, utts)
    if not all(math.isfinite(r.score) for r in records):
        raise NumericError("non-finite validation scores")
    bona = [r.score for r, u in zip(records, utts) if u.label == "bonafide"]
    spoof = [r.score for r, u in zip(records, utts) if u.label == "spoof"]
    if bona and spoof:
        return "val_eer", compute_eer((bona, spoof))[0]
    seg = model.cfg.segment_len
    with no_cache():
        x = np.stack([fix_length(u.wave, seg, "eval").samples for u in utts])
        logits = model.forward(x)
    return "val_loss", weighted_cross_entropy(logits, [u.target for u in utts], class_weights)[0]


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-4
    weight_decay: float = 1e-4
    class_weights: tuple[float, float] = DEFAULT_CLASS_WEIGHTS
    top_k: int = 5
    seed: int = 0
    augment: AugmentConfig | None = None


@dataclass
class TrainResult:
    history: list[dict]
    checkpoints: list[Checkpoint]
    averaged: Checkpoint


def fit(model: RawTFNet, train_utts: Sequence[Utterance], dev_utts: Sequence[Utterance], tcfg: TrainConfig,
        on_epoch: Callable[[dict, Checkpoint], None] | None = None) -> TrainResult:
    """Train for ``tcfg.epochs`` epochs, snapshot after each, average the top-k.

    The model is left holding the averaged parameters.
    """
    optim = Adam(model, tcfg.lr, tcfg.weight_decay)
    history, checkpoints = [], []
    for epoch in range(1, tcfg.epochs + 1):
        batches = make_batches(list(train_utts), tcfg.batch_size, tcfg.seed, epoch)
        stats = train_epoch(model, batches, optim, epoch, tcfg.seed, tcfg.augment, tcfg.class_weights)
        try:
            metric_name, metric = validation_metric(model, dev_utts, tcfg.class_weights)
        except NumericError as exc:
            raise NumericError(f"epoch {epoch} validation: {exc}") from exc
        row = {"epoch": epoch, "train_loss": stats.mean_loss, "train_acc": stats.accuracy, metric_name: metric}
        history.append(row)
        ckpt = snapshot(model, epoch, metric, metric_name)
        checkpoints.append(ckpt)
        log.info("epoch %d loss %.6f %s %.6f", epoch, stats.mean_loss, metric_name, metric)
        if on_epoch is not None:
            on_epoch(row, ckpt)
    averaged = select_and_average_checkpoints(checkpoints, tcfg.top_k)
    model.load_state_dict(averaged.state)
    return TrainResult(history, checkpoints, averaged)
