"""Masked synthesis, smoothness and boosting losses."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .. import gradcore as gc
from ..errors import ConfigError, NumericalError
from .features import FeatureExtractor


class EmptyMaskWarning(RuntimeWarning):
    """The synthesis mask selects no pixel, so the L1 term is zero."""


@dataclass(frozen=True)
class LossWeights:
    smoothness: float = 0.1
    boosting: float = 0.1
    perceptual: float = 0.01

    def __post_init__(self):
        if min(self.smoothness, self.boosting, self.perceptual) < 0:
            raise ConfigError("loss weights must be non-negative")

    def to_json(self):
        return {"alpha_ds": self.smoothness, "alpha_b": self.boosting, "alpha_p": self.perceptual}

    @classmethod
    def from_json(cls, obj):
        return cls(float(obj.get("alpha_ds", 0.1)), float(obj.get("alpha_b", 0.1)), float(obj.get("alpha_p", 0.01)))


def combined_mask(occlusion, static_ref=None, static_projected=None):
    w = np.asarray(occlusion, dtype=np.float64)
    for m in (static_ref, static_projected):
        if m is not None:
            w = w * np.asarray(m, dtype=np.float64)
    return w


def synthesis_loss(synthesized, reference, occlusion, static_ref=None, static_projected=None,
                   alpha_p=0.01, features: FeatureExtractor | None = None):
    """Masked L1 plus perceptual term between a synthesized and a real view.

    The mask is ``occlusion * static_ref * static_projected`` (missing masks
    count as all ones). The L1 term is averaged over active pixels and
    channels. The perceptual term compares features of the synthesized view
    with those of the real view whose masked-out pixels are replaced by the
    synthesized ones; each level contributes its mean squared difference.
    """
    synthesized = gc.as_value(synthesized)
    reference = np.asarray(reference, dtype=np.float64)
    w = combined_mask(occlusion, static_ref, static_projected)
    if synthesized.shape != reference.shape or w.shape != reference.shape[:2]:
        raise ValueError("synthesized, reference and mask sizes differ")
    channels = reference.shape[2] if reference.ndim == 3 else 1
    w3 = w[..., None] if reference.ndim == 3 else w
    active = float(w.sum())
    if active > 0:
        l1 = gc.sum(gc.absolute((synthesized - reference) * w3)) * (1.0 / (active * channels))
    else:
        warnings.warn("synthesis mask is empty", EmptyMaskWarning, stacklevel=2)
        l1 = gc.DiffValue(0.0)
    if alpha_p == 0:
        return l1
    features = features or FeatureExtractor()
    blended = synthesized * (1.0 - w3) + reference * w3
    perceptual = None
    for fa, fb in zip(features(synthesized), features(blended)):
        diff = fa - fb
        term = gc.mean(diff * diff)
        perceptual = term if perceptual is None else perceptual + term
    return l1 + perceptual * alpha_p


def _image_grad_weight(image, axis):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[..., None]
    grad = np.abs(np.diff(image, axis=axis)).mean(axis=-1)
    return np.exp(-grad)


def smoothness_loss(disparity, image):
    """Edge-aware first-order smoothness of mean-normalized disparity."""
    disparity = gc.as_value(disparity)
    norm = disparity / gc.mean(disparity)
    total = gc.DiffValue(0.0)
    h, w = disparity.shape
    if w > 1:
        dx = norm[:, 1:] - norm[:, :-1]
        total = total + gc.mean(gc.absolute(dx) * _image_grad_weight(image, 1))
    if h > 1:
        dy = norm[1:, :] - norm[:-1, :]
        total = total + gc.mean(gc.absolute(dy) * _image_grad_weight(image, 0))
    return total


def boosting_loss(disparity, boosted, static_mask):
    """L1 pull toward the boosted disparity on likely-moving pixels only."""
    disparity = gc.as_value(disparity)
    boosted = np.asarray(boosted, dtype=np.float64)
    peak = float(boosted.max())
    if peak < 1e-12:
        raise NumericalError("degenerate boosted disparity")
    moving = 1.0 - np.asarray(static_mask, dtype=np.float64)
    return gc.mean(gc.absolute((disparity - boosted) * moving)) * (1.0 / peak)


def stage_losses(stage, synthesis, smoothness, boosting=None, weights: LossWeights = LossWeights()):
    """Stage 1: synthesis + a_ds * smoothness. Stage 2 adds a_b * boosting."""
    total = gc.as_value(synthesis) + gc.as_value(smoothness) * weights.smoothness
    if stage == 1:
        return total
    if stage != 2:
        raise ValueError(f"stage must be 1 or 2, got {stage}")
    if boosting is not None:
        total = total + gc.as_value(boosting) * weights.boosting
    return total
