"""Direct per-pixel depth fitting by gradient descent on the staged losses."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import adaquant, synth
from .. import gradcore as gc
from ..camgeo import CameraIntrinsics, RigidPose, warp_field
from ..errors import DivergenceError, NumericalError
from .features import FeatureExtractor
from .losses import EmptyMaskWarning, boosting_loss, smoothness_loss, stage_losses, synthesis_loss

log = logging.getLogger(__name__)


@dataclass
class FitResult:
    logits: np.ndarray  # N x H x W
    beta: np.ndarray  # H x W
    disparity: np.ndarray  # H x W
    trace: list = field(default_factory=list)

    @property
    def depth(self):
        return 1.0 / self.disparity


@dataclass
class StageMasks:
    """Static-pixel masks (1 = static) for the target and each reference frame."""

    target: np.ndarray
    references: list


class _Adam:
    def __init__(self, shapes, b1=0.9, b2=0.999, eps=1e-8):
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.b1, self.b2, self.eps = b1, b2, eps
        self.t = 0

    def steps(self, grads, lr):
        self.t += 1
        out = []
        for i, g in enumerate(grads):
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            mh = self.m[i] / (1 - self.b1 ** self.t)
            vh = self.v[i] / (1 - self.b2 ** self.t)
            out.append(lr * mh / (np.sqrt(vh) + self.eps))
        return out


def build_loss(logits, raw_beta, target, references, fields, cfg, stage=1,
               masks: StageMasks | None = None, boost_target=None, features=None):
    """Assemble the staged loss for one forward pass.

    Returns ``(loss, disparity)`` as DiffValues. ``references`` pairs with
    ``fields`` (one inverse-warp field per reference camera).
    """
    beta = adaquant.beta_from_raw(raw_beta)
    levels = adaquant.quantization_levels(cfg.quantization, beta)
    disparity = adaquant.aggregate_disparity(logits, levels)
    synth_terms = []
    for c, (ref, fld) in enumerate(zip(references, fields)):
        res = synth.synthesize_view(target, logits, levels, field=fld)
        occ = synth.occlusion_mask(res, cfg.tau)
        static_ref = static_proj = None
        if stage == 2 and masks is not None:
            static_ref = masks.references[c]
            static_proj = (synth.project_map(masks.target, res.coords, res.probs) >= 0.5).astype(float)
        synth_terms.append(synthesis_loss(res.image, ref, occ, static_ref, static_proj,
                                          alpha_p=cfg.weights.perceptual, features=features))
    synthesis = synth_terms[0]
    for term in synth_terms[1:]:
        synthesis = synthesis + term
    synthesis = synthesis * (1.0 / len(synth_terms))
    smooth = smoothness_loss(disparity, target)
    boost = None
    if stage == 2 and boost_target is not None and masks is not None:
        boost = boosting_loss(disparity, boost_target, masks.target)
    return stage_losses(stage, synthesis, smooth, boost, cfg.weights), disparity


def fit_depth(frames, poses, K: CameraIntrinsics, cfg=None, stage=1,
              masks: StageMasks | None = None, boost_target=None, steps=None, lr=None,
              target=0, callback=None) -> FitResult:
    """Fit a logit volume and beta map for ``frames[target]``.

    ``poses[i]`` maps target-camera coordinates into camera i (the target's
    own pose is ignored). Every other frame acts as a reference view.
    Logits start at 0 and beta at 1.
    """
    if cfg is None:
        from ..config import RunConfig

        cfg = RunConfig()
    if len(frames) < 2 or len(frames) != len(poses):
        raise ValueError("need at least two frames and one pose per frame")
    steps = cfg.steps if steps is None else steps
    lr = cfg.lr if lr is None else lr
    image0 = np.asarray(frames[target], dtype=np.float64)
    h, w = image0.shape[:2]
    refs = [np.asarray(f, dtype=np.float64) for i, f in enumerate(frames) if i != target]
    fields = [warp_field(p, K, K, h, w) for i, p in enumerate(poses) if i != target]
    if masks is not None and len(masks.references) != len(refs):
        raise ValueError("need one static mask per reference frame")

    n = cfg.quantization.levels
    params = [np.zeros((n, h, w)), np.full((h, w), float(adaquant.raw_for_beta(1.0)))]
    features = FeatureExtractor(seed=cfg.seed)
    adam = _Adam([p.shape for p in params]) if cfg.optimizer == "adam" else None
    trace = []
    disparity = None
    for step in range(steps + 1):
        tape = gc.Tape()
        logits = tape.variable(params[0], name="logits")
        raw = tape.variable(params[1], name="raw_beta")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EmptyMaskWarning)
                loss, disparity = build_loss(logits, raw, image0, refs, fields, cfg, stage, masks,
                                             boost_target, features)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericalError("non-finite loss")
        except NumericalError as exc:
            raise DivergenceError(step, getattr(exc, "loss", float("nan"))) from exc
        trace.append(value)
        if callback is not None:
            callback(step, value)
        if step == steps:
            tape.release()
            break
        tape.backward(loss)
        grads = [logits.adjoint, raw.adjoint]
        tape.release()
        rate = lr * cfg.lr_decay ** (step / max(steps, 1))
        updates = adam.steps(grads, rate) if adam is not None else [rate * g for g in grads]
        params = [p - u for p, u in zip(params, updates)]
        if step % 100 == 0:
            log.debug("step %d loss %.6g", step, value)
    beta = adaquant.beta_from_raw(params[1]).value
    return FitResult(params[0], beta, disparity.value.copy(), trace)
