"""Run configuration: one YAML file of flat dotted keys.

Every key (``model.tau``, ``optim.lr``, ``data.train_protocol`` ...) can be
overridden by a command-line flag of the same name. Loading then dumping a
config gives back the same file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .audio import DEFAULT_PATH_TEMPLATE
from .augment import AugmentConfig
from .errors import ConfigError
from .metrics import TdcfCosts
from .model import ModelConfig
from .training import DEFAULT_CLASS_WEIGHTS, TrainConfig

_TRAIN_KEYS = ("epochs", "batch_size", "top_k", "class_weights")
_OPTIM_KEYS = ("lr", "weight_decay")
_DATA_KEYS = ("audio_root", "train_protocol", "dev_protocol", "eval_protocol", "path_template")


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    epochs: int = 100
    batch_size: int = 32
    top_k: int = 5
    class_weights: tuple[float, float] = DEFAULT_CLASS_WEIGHTS
    lr: float = 1e-4
    weight_decay: float = 1e-4
    audio_root: str | None = None
    train_protocol: str | None = None
    dev_protocol: str | None = None
    eval_protocol: str | None = None
    path_template: str = DEFAULT_PATH_TEMPLATE
    tdcf: TdcfCosts | None = None
    seed: int | None = None
    output_dir: str = "run"

    # flat view

    def to_flat(self) -> dict:
        out = {f"model.{k}": v for k, v in self.model.to_dict().items()}
        for f in fields(AugmentConfig):
            v = getattr(self.augment, f.name)
            out[f"augment.{f.name}"] = list(v) if isinstance(v, tuple) else v
        for k in _TRAIN_KEYS:
            v = getattr(self, k)
            out[f"train.{k}"] = list(v) if isinstance(v, tuple) else v
        for k in _OPTIM_KEYS:
            out[f"optim.{k}"] = getattr(self, k)
        for k in _DATA_KEYS:
            out[f"data.{k}"] = getattr(self, k)
        for k in ("c0", "c1", "c2"):
            out[f"tdcf.{k}"] = None if self.tdcf is None else getattr(self.tdcf, k)
        out["seed"] = self.seed
        out["output_dir"] = self.output_dir
        return out

    @classmethod
    def from_flat(cls, flat: dict) -> "RunConfig":
        unknown = set(flat) - set(default_keys())
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        groups: dict[str, dict] = {}
        top = {}
        for key, value in flat.items():
            if "." in key:
                section, name = key.split(".", 1)
                groups.setdefault(section, {})[name] = value
            else:
                top[key] = value
        kw = dict(top)
        try:
            kw["model"] = ModelConfig.from_dict({**ModelConfig().to_dict(), **groups.get("model", {})})
            kw["augment"] = AugmentConfig(**groups.get("augment", {}))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        kw.update(groups.get("train", {}))
        kw.update(groups.get("optim", {}))
        kw.update(groups.get("data", {}))
        costs = groups.get("tdcf", {})
        if any(costs.get(k) is not None for k in ("c0", "c1", "c2")):
            if any(costs.get(k) is None for k in ("c0", "c1", "c2")):
                raise ConfigError("tdcf: give all of c0, c1, c2 or none")
            kw["tdcf"] = TdcfCosts(float(costs["c0"]), float(costs["c1"]), float(costs["c2"]))
        if "class_weights" in kw:
            kw["class_weights"] = tuple(float(w) for w in kw["class_weights"])
        return cls(**kw)

    # checks

    def validate(self, require_paths: tuple[str, ...] = ()) -> None:
        """Raise ConfigError naming the first bad field."""
        if self.seed is None:
            raise ConfigError("seed: required (unseeded runs are not allowed)")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed: expected a nonnegative integer, got {self.seed!r}")
        self.model.validate()
        try:
            self.augment.validate()
        except ConfigError as exc:
            raise ConfigError(f"augment: {exc}") from None
        for name in ("epochs", "batch_size", "top_k"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise ConfigError(f"train.{name}: must be a positive integer")
        if not (math.isfinite(self.lr) and self.lr >= 0):
            raise ConfigError("optim.lr: must be finite and >= 0")
        if not (math.isfinite(self.weight_decay) and self.weight_decay >= 0):
            raise ConfigError("optim.weight_decay: must be finite and >= 0")
        if len(self.class_weights) != 2 or min(self.class_weights) <= 0:
            raise ConfigError("train.class_weights: expected two positive weights [spoof, bonafide]")
        if self.tdcf is not None:
            try:
                self.tdcf.validate()
            except ConfigError as exc:
                raise ConfigError(f"tdcf: {exc}") from None
        for name in require_paths:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"data.{name}: required for this command")
            if not Path(value).exists():
                raise ConfigError(f"data.{name}: path does not exist: {value}")

    def train_config(self) -> TrainConfig:
        augment = self.augment if self.augment.algorithms else None
        return TrainConfig(self.epochs, self.batch_size, self.lr, self.weight_decay, self.class_weights,
                           self.top_k, self.seed, augment)


def default_keys() -> dict:
    return RunConfig().to_flat()


def parse_value(text: str):
    """Command-line override text to a value, using YAML scalars and flow lists."""
    return yaml.safe_load(text)


def load_run_config(path=None, overrides: dict | None = None) -> RunConfig:
    flat = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"config {path}: expected a mapping of dotted keys")
        flat.update(data)
    flat.update(overrides or {})
    return RunConfig.from_flat(flat)


def dump_run_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_flat(), sort_keys=True, default_flow_style=None)


def write_run_config(path, cfg: RunConfig) -> None:
    Path(path).write_text(dump_run_config(cfg), encoding="utf-8")
