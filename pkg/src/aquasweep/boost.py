"""Three-scale boosted disparity used to pseudo-supervise masked regions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .errors import NumericalError
from .spimo import positional_grid

DOWN = 3.0 / 4.0
UP = 5.0 / 4.0

Estimator = Callable[[np.ndarray, np.ndarray], np.ndarray]


def scaled_size(height, width, factor):
    return int(round(height * factor)), int(round(width * factor))


def resize(image, size):
    """Bilinear resize (pixel-center aligned, edge-replicated) to ``size = (h, w)``."""
    image = np.asarray(image, dtype=np.float64)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[..., None]
    h, w = image.shape[:2]
    ho, wo = size
    xs = np.clip((np.arange(wo) + 0.5) * (w / wo) - 0.5, 0.0, w - 1)
    ys = np.clip((np.arange(ho) + 0.5) * (h / ho) - 0.5, 0.0, h - 1)
    xx, yy = np.meshgrid(xs, ys)
    coords = np.stack([xx, yy], axis=-1)[None]
    out, _ = _kernels.sample_forward(image[None], coords)
    out = out[0]
    return out[..., 0] if squeeze else out


@dataclass
class BoostTriple:
    full: np.ndarray
    reduced: np.ndarray
    augmented: np.ndarray

    def __post_init__(self):
        shapes = {np.shape(self.full), np.shape(self.reduced), np.shape(self.augmented)}
        if len(shapes) != 1:
            raise ValueError(f"triple maps differ in shape: {shapes}")

    def stack(self):
        return np.stack([self.full, self.reduced, self.augmented])


def make_triple(estimator: Estimator, image, positions=None) -> BoostTriple:
    """Run the estimator at full, 3/4 and 5/4 resolution and bring the results back.

    Disparities from a resized pass are resampled to full size and multiplied
    by the inverse resize factor, since disparity grows with resolution.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[:2]
    if positions is None:
        positions = positional_grid(h, w)
    full = np.asarray(estimator(image, positions), dtype=np.float64)
    passes = []
    for factor in (DOWN, UP):
        size = scaled_size(h, w, factor)
        est = estimator(resize(image, size), resize(positions, size))
        passes.append(resize(est, (h, w)) / factor)
    return BoostTriple(full, passes[0], passes[1])


def blend(triple: BoostTriple, eq8_literal=False):
    """Disparity-weighted combination of the three passes.

    Near pixels (normalized mean close to 1) lean on the reduced pass and far
    pixels on the augmented one. By default the result is normalized by the
    sum of its weights; ``eq8_literal`` uses ``1 + m + (1 + m**2)`` instead,
    which does not preserve identical inputs.
    """
    f, r, a = (np.asarray(x, dtype=np.float64) for x in (triple.full, triple.reduced, triple.augmented))
    total = f + r + a
    peak = total.max()
    if not peak > 1e-12:
        raise NumericalError("degenerate disparity")
    m = total / peak
    w_up = 1.0 - m * m
    if eq8_literal:
        return (f + m * r + w_up * a) / (1.0 + m + (1.0 + m * m))
    # written as an offset from the full pass so identical inputs come back bit-exact
    return f + (m * (r - f) + w_up * (a - f)) / (1.0 + m + w_up)
