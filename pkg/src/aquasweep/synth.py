"""Plane-sweep free-view synthesis from a logit volume."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import gradcore as gc
from .camgeo import WarpField, warp_field

INVALID_LOGIT = -30.0
DEFAULT_TAU = 0.5


@dataclass
class SynthesisResult:
    image: gc.DiffValue  # H x W x 3
    probs: gc.DiffValue  # N x H x W, projected into camera c
    mass: np.ndarray  # H x W
    valid: np.ndarray  # N x H x W, per-plane sample validity
    coords: gc.DiffValue  # N x H x W x 2

    def occlusion(self, tau=DEFAULT_TAU):
        return occlusion_mask(self, tau)


def _levels_volume(levels, logits):
    # a 1-D array means one fixed level per plane, shared by all pixels
    if not isinstance(levels, gc.DiffValue) and np.ndim(levels) == 1:
        return gc.DiffValue(np.broadcast_to(np.asarray(levels, float)[:, None, None], logits.shape))
    return gc.as_value(levels)


def plane_coords(field: WarpField, levels):
    """N x H x W x 2 source coordinates (differentiable in the levels) and validity."""
    levels = gc.as_value(levels)
    return field.coords(levels), field.valid(levels.value)


def project_probability_volume(logits, levels, pose=None, K0=None, Kc=None, field=None, coords=None):
    """Warp each logit plane with its own inverse-depth field, then softmax at camera c.

    Out-of-frame samples become a logit of -30. Returns ``(probs, valid)``.
    """
    logits = gc.as_value(logits)
    levels = _levels_volume(levels, logits)
    if coords is None:
        field = field or warp_field(pose, K0, Kc, *logits.shape[1:])
        coords, _ = plane_coords(field, levels)
    n, h, w = logits.shape
    # coords behind camera c are parked off-frame, so ``inside`` covers them too
    warped, inside = gc.sample4(gc.reshape(logits, (n, h, w, 1)), coords)
    warped = gc.reshape(warped, (n, h, w))
    valid = inside.astype(bool)
    warped = gc.where(valid, warped, INVALID_LOGIT)
    return gc.channel_softmax(warped, axis=0), valid


def project_map(values, coords, probs):
    """Probability-weighted plane warp of a constant H x W map (no gradient)."""
    vals = np.asarray(values, dtype=np.float64)
    cv = coords.value if isinstance(coords, gc.DiffValue) else coords
    pv = probs.value if isinstance(probs, gc.DiffValue) else probs
    sampled, _ = _kernels.sample_forward(vals[None, :, :, None], cv)
    return np.sum(sampled[..., 0] * pv, axis=0)


def synthesize_view(image0, logits, levels, pose=None, K0=None, Kc=None, field=None):
    """Synthesize the view from camera c given the target image and its logit volume.

    ``I'_c = sum_n warp(I0, d_n) * P_n`` with P the projected probabilities;
    ``mass`` is the same sum applied to an all-ones image.
    """
    image0 = gc.as_value(image0)
    logits = gc.as_value(logits)
    levels = _levels_volume(levels, logits)
    n, h, w = logits.shape
    field = field or warp_field(pose, K0, Kc, h, w)
    coords, _ = plane_coords(field, levels)
    probs, valid = project_probability_volume(logits, levels, coords=coords)
    src = image0 if image0.ndim == 3 else gc.reshape(image0, image0.shape + (1,))
    planes, _ = gc.sample4(gc.reshape(src, (1,) + src.shape), coords)
    weighted = planes * gc.reshape(probs, (n, h, w, 1))
    out = gc.sum(weighted, axis=0)
    if image0.ndim == 2:
        out = gc.reshape(out, (h, w))
    mass = project_map(np.ones(image0.shape[:2]), coords, probs)
    return SynthesisResult(out, probs, mass, valid, coords)


def occlusion_mask(result: SynthesisResult, tau=DEFAULT_TAU):
    """1 where the projected probability mass reaches ``tau``."""
    return (result.mass >= tau).astype(np.float64)
