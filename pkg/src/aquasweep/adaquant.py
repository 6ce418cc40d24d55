"""Per-pixel adaptive inverse-depth quantization and disparity aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gradcore as gc
from .errors import ConfigError

BETA_EPS = 1e-3


@dataclass(frozen=True)
class QuantizationConfig:
    levels: int = 33
    d_min: float = 0.01
    d_max: float = 0.3

    def __post_init__(self):
        if self.levels < 2:
            raise ConfigError("need at least two quantization levels")
        if not 0 < self.d_min < self.d_max:
            raise ConfigError("require 0 < d_min < d_max")

    @property
    def log_ratio(self):
        return float(np.log(self.d_max / self.d_min))

    def fractions(self):
        return np.arange(self.levels, dtype=np.float64) / (self.levels - 1)

    def fixed_levels(self):
        """Exponential levels shared by every pixel (the beta = 1 curve)."""
        out = self.d_max * np.exp((self.fractions() - 1.0) * self.log_ratio)
        out[0], out[-1] = self.d_min, self.d_max
        return out

    def to_json(self):
        return {"levels": self.levels, "d_min": self.d_min, "d_max": self.d_max}

    @classmethod
    def from_json(cls, obj):
        return cls(int(obj.get("levels", 33)), float(obj.get("d_min", 0.01)), float(obj.get("d_max", 0.3)))


def beta_from_raw(raw):
    """Positive curve parameter ``softplus(raw) + eps``."""
    return gc.softplus(raw) + BETA_EPS


def raw_for_beta(beta):
    """Inverse of :func:`beta_from_raw`."""
    y = np.asarray(beta, dtype=np.float64) - BETA_EPS
    return y + np.log(-np.expm1(-y))


def quantization_levels(cfg: QuantizationConfig, beta):
    """N x H x W inverse-depth levels ``d_max * exp(L * ((n/(N-1))**beta - 1))``.

    Both endpoints are pinned exactly to d_min and d_max; their derivative
    with respect to beta is zero anyway (0**beta and 1**beta are constant).
    """
    beta = gc.as_value(beta)
    bv = beta.value
    if np.any(bv <= 0):
        raise ValueError("beta must be positive")
    frac = cfg.fractions().reshape((-1,) + (1,) * bv.ndim)
    L = cfg.log_ratio
    with np.errstate(divide="ignore"):
        shaped = np.power(frac, bv)  # 0**beta = 0 for beta > 0
        log_frac = np.where(frac > 0, np.log(np.where(frac > 0, frac, 1.0)), 0.0)
    levels = cfg.d_max * np.exp(L * (shaped - 1.0))
    levels[0] = cfg.d_min
    levels[-1] = cfg.d_max
    # d/dbeta = levels * L * frac**beta * ln(frac)
    local = levels * L * shaped * log_frac
    local[0] = 0.0
    local[-1] = 0.0
    return gc.custom_op(levels, [(beta, lambda g: np.sum(g * local, axis=0))], name="quantization_levels")


def aggregate_disparity(logits, levels):
    """Per-pixel expected inverse depth ``sum_n d_n * softmax(logits)_n``."""
    logits, levels = gc.as_value(logits), gc.as_value(levels)
    if logits.shape != levels.shape and levels.ndim != 1:
        raise ValueError(f"shape mismatch {logits.shape} vs {levels.shape}")
    if levels.ndim == 1:
        levels = gc.reshape(levels, (-1,) + (1,) * (logits.ndim - 1))
    probs = gc.channel_softmax(logits, axis=0)
    return gc.sum(probs * levels, axis=0)
