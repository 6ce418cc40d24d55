"""Moving-object masks from depth estimates under shifted positional inputs.

The estimator is queried once per positional offset; pixels whose depth
estimates disagree (relative dispersion at or above ``gamma``) are flagged as
likely moving (mask 0).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import synth
from .errors import NumericalError

DEFAULT_GAMMA = 0.03
DEFAULT_OFFSETS = ((0.0, 0.0), (0.5, 0.0), (-0.5, 0.0), (0.0, -0.25))

DepthEstimator = Callable[[np.ndarray, tuple], np.ndarray]


def positional_grid(height, width, offset=(0.0, 0.0)):
    """(H, W, 2) normalized (u, v): image center at 0, top-left pixel at (-1, -1)."""
    u = np.linspace(-1.0, 1.0, width) + offset[0]
    v = np.linspace(-1.0, 1.0, height) + offset[1]
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu, vv], axis=-1)


def build_depth_volume(estimator: DepthEstimator, image, offsets: Sequence = DEFAULT_OFFSETS):
    """Stack one depth map per positional offset into an N x H x W volume."""
    maps = []
    for off in offsets:
        depth = np.asarray(estimator(image, tuple(off)), dtype=np.float64)
        if depth.ndim != 2:
            raise ValueError(f"estimator must return an H x W map, got {depth.shape}")
        if not np.all(depth > 0):
            raise NumericalError("estimator returned non-positive depth")
        maps.append(depth)
    return np.stack(maps, axis=0)


def dispersion(volume):
    """Per-pixel sample variance normalized by the squared mean."""
    volume = np.asarray(volume, dtype=np.float64)
    n = volume.shape[0]
    if n < 2:
        raise ValueError("need at least two depth estimates")
    m = volume.mean(axis=0)
    if np.any(m < 1e-12):
        raise NumericalError("degenerate depth")
    return np.sum((volume - m) ** 2, axis=0) / (m * m * (n - 1))


def compute_mask(volume, gamma=DEFAULT_GAMMA):
    """Binary mask: 1 = static (dispersion below gamma), 0 = likely moving."""
    return (dispersion(volume) < gamma).astype(np.float64)


def project_mask(mask, logits, levels, pose=None, K0=None, Kc=None, field=None, result=None):
    """Carry the target-frame mask into camera c via the synthesis warp.

    Pixels receiving less than half a unit of projected mask (including
    disocclusions) come out as 0.
    """
    if result is None:
        result = synth.synthesize_view(np.zeros(np.shape(mask)), logits, levels, pose, K0, Kc, field=field)
    projected = synth.project_map(mask, result.coords, result.probs)
    return (projected >= 0.5).astype(np.float64)
