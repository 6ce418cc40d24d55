"""Run configuration shared by the fitter and the command line."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .adaquant import QuantizationConfig
from .camgeo import AugmentationSpec
from .errors import ConfigError
from .objective.losses import LossWeights
from .spimo import DEFAULT_GAMMA, DEFAULT_OFFSETS
from .synth import DEFAULT_TAU

OPTIMIZERS = ("adam", "gd")


@dataclass(frozen=True)
class RunConfig:
    quantization: QuantizationConfig = field(default_factory=QuantizationConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    augmentation: AugmentationSpec = field(default_factory=AugmentationSpec)
    gamma: float = DEFAULT_GAMMA
    tau: float = DEFAULT_TAU
    offsets: tuple = DEFAULT_OFFSETS
    eq8_literal: bool = False
    seed: int = 0
    steps: int = 2000
    lr: float = 0.05
    lr_decay: float = 0.1
    optimizer: str = "adam"

    def __post_init__(self):
        if not 0 < self.gamma:
            raise ConfigError("gamma must be positive")
        if not 0 <= self.tau <= 1:
            raise ConfigError("tau must lie in [0, 1]")
        if len(self.offsets) < 2:
            raise ConfigError("need at least two positional offsets")
        if self.steps < 0 or self.lr <= 0 or not 0 < self.lr_decay <= 1:
            raise ConfigError("steps >= 0, lr > 0 and 0 < lr_decay <= 1 required")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")

    def to_json(self):
        return {
            "quantization": self.quantization.to_json(),
            "weights": self.weights.to_json(),
            "augmentation": self.augmentation.to_json(),
            "gamma": self.gamma,
            "tau": self.tau,
            "offsets": {"u": [o[0] for o in self.offsets], "v": [o[1] for o in self.offsets]},
            "eq8_literal": self.eq8_literal,
            "seed": self.seed,
            "steps": self.steps,
            "lr": self.lr,
            "lr_decay": self.lr_decay,
            "optimizer": self.optimizer,
        }

    @classmethod
    def from_json(cls, obj):
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        try:
            if "quantization" in obj:
                kw["quantization"] = QuantizationConfig.from_json(obj["quantization"])
            if "weights" in obj:
                kw["weights"] = LossWeights.from_json(obj["weights"])
            if "augmentation" in obj:
                kw["augmentation"] = AugmentationSpec.from_json(obj["augmentation"])
            if "offsets" in obj:
                u, v = obj["offsets"]["u"], obj["offsets"]["v"]
                if len(u) != len(v):
                    raise ConfigError("offset lists differ in length")
                kw["offsets"] = tuple((float(a), float(b)) for a, b in zip(u, v))
            for name, conv in (("gamma", float), ("tau", float), ("eq8_literal", bool), ("seed", int),
                               ("steps", int), ("lr", float), ("lr_decay", float), ("optimizer", str)):
                if name in obj:
                    kw[name] = conv(obj[name])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad run config: {exc}") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path):
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_json(obj)

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"
