"""Finite-difference checks over every differentiable piece of the pipeline."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import adaquant, synth
from . import gradcore as gc
from .camgeo import CameraIntrinsics, RigidPose, warp_field
from .objective import losses
from .objective.features import FeatureExtractor
from .objective.fit import StageMasks, build_loss

TOLERANCE = 1e-4


@dataclass
class CheckResult:
    name: str
    error: float
    seconds: float

    @property
    def ok(self):
        return self.error < TOLERANCE


def _fixture(height, width, levels, seed):
    rng = np.random.default_rng(seed)
    cam = CameraIntrinsics(width * 0.85, width * 0.9, (width - 1) / 2 + 0.1, (height - 1) / 2 - 0.2, width, height)
    pose = RigidPose.from_axis_angle([0.01, -0.02, 0.005], [0.31, -0.07, 0.05])
    back = RigidPose.from_axis_angle([-0.01, 0.015, 0.0], [-0.29, 0.05, -0.03])
    return rng, cam, [pose, back]


def _cases(height, width, levels, seed):
    from .config import RunConfig

    rng, cam, poses = _fixture(height, width, levels, seed)
    shape = (height, width)
    qcfg = adaquant.QuantizationConfig(levels, 0.01, 0.3)
    cfg = RunConfig(quantization=qcfg, seed=seed)
    features = FeatureExtractor(seed=seed)
    fields = [warp_field(p, cam, cam, height, width) for p in poses]
    target = rng.uniform(0.1, 0.9, shape + (3,))
    refs = [rng.uniform(0.1, 0.9, shape + (3,)) for _ in poses]
    logits = rng.normal(size=(levels,) + shape)
    raw = rng.normal(size=shape) * 0.5
    pos = rng.uniform(0.5, 2.0, shape)
    w = rng.normal(size=shape)
    coords = np.stack([rng.uniform(-0.5, width - 0.5, shape), rng.uniform(-0.5, height - 0.5, shape)], -1)
    occ = (rng.uniform(size=shape) > 0.2).astype(float)
    masks = StageMasks((rng.uniform(size=shape) > 0.3).astype(float),
                       [(rng.uniform(size=shape) > 0.2).astype(float) for _ in poses])
    boost_target = rng.uniform(0.02, 0.25, shape)

    def levels_of(r):
        return adaquant.quantization_levels(qcfg, adaquant.beta_from_raw(r))

    binary = {
        "add": lambda a, b: a + b,
        "sub": lambda a, b: a - b,
        "mul": lambda a, b: a * b,
        "div": lambda a, b: a / b,
        "pow": lambda a, b: gc.power(a, b),
    }
    unary = {
        "exp": gc.exp,
        "log": gc.log,
        "abs": gc.absolute,
        "clamp": lambda a: gc.clamp(a, 0.8, 1.6),
        "tanh": gc.tanh,
        "softplus": gc.softplus,
    }
    for name, fn in binary.items():
        yield name, (lambda a, b, fn=fn: gc.sum(fn(a, b) * w)), [pos, rng.uniform(0.5, 2.0, shape)]
    for name, fn in unary.items():
        yield name, (lambda a, fn=fn: gc.sum(fn(a) * w)), [pos]
    yield "softmax", lambda x: gc.sum(gc.channel_softmax(x) * logits[::-1]), [logits]
    yield "bilinear", lambda s, c: gc.sum(gc.bilinear_sample(s, c)[0] * target), [target, coords]
    weight = rng.normal(size=(4, 3, 3, 3))
    proj = rng.normal(size=gc.conv2d(target.transpose(2, 0, 1), weight, stride=2).shape)
    yield "conv2d", lambda x: gc.sum(gc.conv2d(x, weight, stride=2) * proj), [target.transpose(2, 0, 1)]
    yield "quantization_levels", lambda r: gc.sum(levels_of(r) * logits), [raw]
    yield "aggregate_disparity", lambda x, r: gc.sum(adaquant.aggregate_disparity(x, levels_of(r)) * w), [logits, raw]
    yield "project_probability_volume", (
        lambda x, r: gc.sum(synth.project_probability_volume(x, levels_of(r), field=fields[0])[0] * logits)
    ), [logits, raw]
    yield "synthesize_view", (
        lambda x, r: gc.sum(synth.synthesize_view(target, x, levels_of(r), field=fields[0]).image * refs[0])
    ), [logits, raw]
    yield "synthesis_loss", (
        lambda s: losses.synthesis_loss(s, refs[0], occ, masks.target, masks.references[0], 0.01, features)
    ), [rng.uniform(0.1, 0.9, shape + (3,))]
    yield "smoothness_loss", lambda d: losses.smoothness_loss(d, target), [rng.uniform(0.02, 0.3, shape)]
    yield "boosting_loss", (
        lambda d: losses.boosting_loss(d, boost_target, masks.target)
    ), [rng.uniform(0.02, 0.3, shape)]
    yield "stage1_loss", (
        lambda x, r: build_loss(x, r, target, refs, fields, cfg, 1, features=features)[0]
    ), [logits, raw]
    yield "stage2_loss", (
        lambda x, r: build_loss(x, r, target, refs, fields, cfg, 2, masks, boost_target, features)[0]
    ), [logits, raw]


def run(height=8, width=12, levels=5, seed=0):
    """Run every check; returns a list of :class:`CheckResult`."""
    results = []
    for name, builder, params in _cases(height, width, levels, seed):
        start = time.perf_counter()
        err = gc.check_gradients(builder, params)
        results.append(CheckResult(name, err, time.perf_counter() - start))
    return results
