"""Procedural ground-truth scenes: textured fronto-parallel layers and moving boxes.

Textures are sums of seeded sinusoids defined in the target camera's pixel
frame of each plane, so any frame can be rendered exactly by ray casting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camgeo import CameraIntrinsics, RigidPose, pixel_grid, plane_project
from .errors import ConfigError

EDGE_EPS = 1e-9
EXAMPLE_SCENE = Path(__file__).parent / "data" / "example_scene.json"
EXAMPLE_CONFIG = Path(__file__).parent / "data" / "example_config.json"


@dataclass(frozen=True)
class TextureSpec:
    min_freq: float = 0.03  # cycles per pixel
    max_freq: float = 0.12
    components: int = 6
    contrast: float = 0.8  # slope of the tone curve at mid-grey

    def to_json(self):
        return {"min_freq": self.min_freq, "max_freq": self.max_freq,
                "components": self.components, "contrast": self.contrast}


@dataclass(frozen=True)
class Layer:
    depth: float
    extent: tuple  # u0, v0, u1, v1 in target-frame pixels
    seed: int = 0

    def to_json(self):
        return {"depth": self.depth, "extent": list(self.extent), "seed": self.seed}


@dataclass(frozen=True)
class Mover(Layer):
    velocity: tuple = (0.0, 0.0, 0.0)  # camera-0 world units per frame

    def to_json(self):
        return {**super().to_json(), "velocity": list(self.velocity)}


@dataclass
class SceneSpec:
    camera: CameraIntrinsics
    poses: list
    layers: list = field(default_factory=list)
    background_depth: float = 20.0
    background_seed: int = 0
    movers: list = field(default_factory=list)
    texture: TextureSpec = field(default_factory=TextureSpec)
    target: int = 0

    def __post_init__(self):
        depths = [l.depth for l in self.layers]
        if any(d <= 0 for d in depths + [m.depth for m in self.movers]) or self.background_depth <= 0:
            raise ConfigError("scene depths must be positive")
        if depths != sorted(depths):
            raise ConfigError("layers must be ordered near to far")
        for i, a in enumerate(self.movers):
            for b in self.movers[i + 1:]:
                if _overlap(a.extent, b.extent):
                    raise ConfigError("movers must not overlap")
        if not 0 <= self.target < len(self.poses):
            raise ConfigError("target index out of range")

    def to_json(self):
        return {
            "camera": self.camera.to_json(),
            "poses": [p.to_json() for p in self.poses],
            "target": self.target,
            "background": {"depth": self.background_depth, "seed": self.background_seed},
            "layers": [l.to_json() for l in self.layers],
            "movers": [m.to_json() for m in self.movers],
            "texture": self.texture.to_json(),
        }

    @classmethod
    def from_json(cls, obj):
        try:
            bg = obj.get("background", {})
            return cls(
                camera=CameraIntrinsics.from_json(obj["camera"]),
                poses=[RigidPose.from_json(p) for p in obj["poses"]],
                layers=[Layer(float(l["depth"]), tuple(l["extent"]), int(l.get("seed", 0)))
                        for l in obj.get("layers", [])],
                background_depth=float(bg.get("depth", 20.0)),
                background_seed=int(bg.get("seed", 0)),
                movers=[Mover(float(m["depth"]), tuple(m["extent"]), int(m.get("seed", 0)),
                              tuple(float(v) for v in m.get("velocity", (0, 0, 0))))
                        for m in obj.get("movers", [])],
                texture=TextureSpec(**obj.get("texture", {})),
                target=int(obj.get("target", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad scene description: {exc}") from exc

    @classmethod
    def load(cls, path):
        try:
            return cls.from_json(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _overlap(a, b):
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def texture(u, v, seed, spec: TextureSpec = TextureSpec()):
    """RGB band-limited texture at continuous pixel positions (u, v), values in (0, 1).

    A sum of seeded sinusoids passed through a tanh tone curve, so strong
    contrast saturates smoothly instead of leaving the unit range.
    """
    rng = np.random.default_rng(seed)
    k = spec.components
    raw = np.zeros(np.shape(u) + (3,))
    amp = spec.contrast / k
    for c in range(3):
        freqs = rng.uniform(spec.min_freq, spec.max_freq, k)
        angles = rng.uniform(0.0, np.pi, k)
        phases = rng.uniform(0.0, 2 * np.pi, k)
        for f, a, p in zip(freqs, angles, phases):
            raw[..., c] += amp * np.sin(2 * np.pi * f * (np.cos(a) * u + np.sin(a) * v) + p)
    return 0.5 + 0.5 * np.tanh(2.0 * raw)


def _cast(spec: SceneSpec, pose: RigidPose, z, shift):
    """Intersect camera rays with the target-frame plane Z = z displaced by ``shift``."""
    K = spec.camera
    q = np.concatenate([pixel_grid(K.height, K.width), np.ones((K.height, K.width, 1))], axis=-1)
    rays = q @ K.inverse.T  # camera-c directions with unit z
    a = rays @ pose.R  # R^T ray
    b = pose.R.T @ pose.t
    plane_z = z + shift[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (plane_z + b[2]) / a[..., 2]
    ok = np.isfinite(lam) & (lam > 1e-9)
    X = lam[..., None] * a - b - shift
    u = K.fx * X[..., 0] / z + K.cx
    v = K.fy * X[..., 1] / z + K.cy
    return ok, lam, u, v


def _trace(spec: SceneSpec, index):
    K = spec.camera
    pose = spec.poses[index]
    time = index - spec.target
    shape = (K.height, K.width)
    depth = np.full(shape, np.inf)
    image = np.zeros(shape + (3,))
    moving = np.ones(shape)
    uv = np.zeros(shape + (2,))
    surfaces = [(l, np.zeros(3), False) for l in spec.layers]
    surfaces += [(m, time * np.asarray(m.velocity, dtype=np.float64), True) for m in spec.movers]
    surfaces.append((Layer(spec.background_depth, (-np.inf, -np.inf, np.inf, np.inf), spec.background_seed),
                     np.zeros(3), False))
    for surf, shift, is_mover in surfaces:
        ok, lam, u, v = _cast(spec, pose, surf.depth, shift)
        u0, v0, u1, v1 = surf.extent
        # half-open extents, snapped so integer edges survive ray-casting round-off
        hit = ok & (u >= u0 - EDGE_EPS) & (u < u1 - EDGE_EPS) & (v >= v0 - EDGE_EPS) & (v < v1 - EDGE_EPS)
        hit &= lam < depth
        if not hit.any():
            continue
        depth = np.where(hit, lam, depth)
        image = np.where(hit[..., None], texture(u, v, surf.seed, spec.texture), image)
        moving = np.where(hit, 0.0 if is_mover else 1.0, moving)
        uv = np.where(hit[..., None], np.stack([u, v], axis=-1), uv)
    if not np.all(np.isfinite(depth)):
        raise ConfigError("some pixels see no surface; check the poses")
    return image, depth, moving, uv


def render(spec: SceneSpec, index):
    """Render frame ``index``: image, depth, inverse depth and moving mask (0 on movers)."""
    image, depth, moving, _ = _trace(spec, index)
    return image, depth, 1.0 / depth, moving


def correspondence(spec: SceneSpec, index):
    """Target-frame pixel position of the surface point seen at each pixel of frame ``index``.

    For movers the position is taken in the mover's own (displaced) texture frame.
    """
    return _trace(spec, index)[3]


def evaluation_mask(spec: SceneSpec, index=None):
    """Static pixels of frame ``index`` (default: the target) seen by every other frame.

    Visibility uses the ground-truth depth, so occluded parallax strips at the
    frame border drop out while depth discontinuities inside the frame stay.
    """
    index = spec.target if index is None else index
    _, depth, moving, _ = _trace(spec, index)
    K = spec.camera
    base = spec.poses[index]
    grid = pixel_grid(K.height, K.width).reshape(-1, 2)
    keep = moving.ravel() > 0
    for i, pose in enumerate(spec.poses):
        if i == index:
            continue
        # pose taking frame ``index`` coordinates into frame i
        R = pose.R @ base.R.T
        rel = RigidPose(R, pose.t - R @ base.t)
        pc, front = plane_project(grid, 1.0 / depth.ravel(), rel, K, K)
        keep &= front & (pc[:, 0] >= 0) & (pc[:, 0] <= K.width - 1) & (pc[:, 1] >= 0) & (pc[:, 1] <= K.height - 1)
    return keep.reshape(K.height, K.width)


def naive_disparity(width, height):
    """Vertical ramp from 0 on the top row to 1 on the bottom row."""
    if height < 2:
        raise ValueError("height must be at least 2")
    col = np.arange(height, dtype=np.float64) / (height - 1)
    return np.repeat(col[:, None], width, axis=1)


def two_layer_scene(height=96, width=128, baseline=0.3, near=5.0, far=20.0, frames=3, seed=0,
                    texture_spec: TextureSpec = TextureSpec()):
    """Near textured rectangle over a textured far background, camera sliding along x.

    With ``frames=3`` the middle frame is the target and the outer frames sit
    at -baseline and +baseline.
    """
    focal = width * 100.0 / 128.0
    K = CameraIntrinsics(focal, focal, (width - 1) / 2.0, (height - 1) / 2.0, width, height)
    target = frames // 2
    poses = [RigidPose.translation((i - target) * baseline) for i in range(frames)]
    layer = Layer(near, (width * 0.25, height * 0.25, width * 0.75, height * 0.75), seed + 1)
    return SceneSpec(K, poses, [layer], far, seed + 2, texture=texture_spec, target=target)
