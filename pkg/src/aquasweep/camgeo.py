"""Pinhole cameras, plane-induced warps and resize/crop augmentation."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import gradcore as gc
from .errors import ConfigError

PROJ_EPS = 1e-6
# invalid samples are parked here; the kernels read zeros and report validity 0
_OFFFRAME = -1.0e3

TRANSLATION_MODES = ("invariant", "inverse", "direct")


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError("focal lengths must be positive")
        if self.width < 2 or self.height < 2:
            raise ConfigError("image size must be at least 2 x 2")

    @property
    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def inverse(self):
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def to_json(self):
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @classmethod
    def from_json(cls, obj):
        try:
            return cls(float(obj["fx"]), float(obj["fy"]), float(obj["cx"]), float(obj["cy"]),
                       int(obj["width"]), int(obj["height"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad camera intrinsics: {exc}") from exc


@dataclass(frozen=True, eq=False)
class RigidPose:
    """Maps camera-0 coordinates into camera c: ``X_c = R @ X_0 + t``."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9, rtol=0):
            raise ConfigError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ConfigError("rotation determinant is not 1")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def translation(cls, tx=0.0, ty=0.0, tz=0.0):
        return cls(np.eye(3), np.array([tx, ty, tz], dtype=np.float64))

    @classmethod
    def from_axis_angle(cls, axis_angle, t):
        rv = np.asarray(axis_angle, dtype=np.float64)
        theta = np.linalg.norm(rv)
        if theta < 1e-15:
            return cls(np.eye(3), t)
        k = rv / theta
        kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
        R = np.eye(3) + np.sin(theta) * kx + (1 - np.cos(theta)) * (kx @ kx)
        return cls(R, t)

    def inverse(self):
        return RigidPose(self.R.T, -self.R.T @ self.t)

    def to_json(self):
        return {"R": [float(v) for v in self.R.ravel()], "t": [float(v) for v in self.t]}

    @classmethod
    def from_json(cls, obj):
        try:
            R = np.asarray(obj["R"], dtype=np.float64)
            t = np.asarray(obj["t"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad pose: {exc}") from exc
        if R.size != 9 or t.size != 3:
            raise ConfigError("pose needs 9 rotation and 3 translation entries")
        return cls(R.reshape(3, 3), t)


@dataclass(frozen=True)
class AugmentationSpec:
    scale: float = 1.0
    crop: tuple[int, int, int, int] | None = None  # u0, v0, w, h in the scaled image
    mode: str = "direct"

    def __post_init__(self):
        if not 0.5 <= self.scale <= 1.5:
            raise ConfigError("augmentation scale must lie in [0.5, 1.5]")
        if self.mode not in TRANSLATION_MODES:
            raise ConfigError(f"translation mode must be one of {TRANSLATION_MODES}")

    def to_json(self):
        return {"scale": self.scale, "crop": list(self.crop) if self.crop else None, "mode": self.mode}

    @classmethod
    def from_json(cls, obj):
        crop = obj.get("crop")
        return cls(float(obj.get("scale", 1.0)), tuple(int(v) for v in crop) if crop else None,
                   obj.get("mode", "direct"))


def _homogeneous(pixels):
    pixels = np.asarray(pixels, dtype=np.float64)
    return np.concatenate([pixels, np.ones(pixels.shape[:-1] + (1,))], axis=-1)


def plane_project(p0, d, pose: RigidPose, K0: CameraIntrinsics, Kc: CameraIntrinsics):
    """Pixel in camera c of the point seen at ``p0`` on the plane of inverse depth ``d``.

    ``p0`` is (..., 2); ``d`` broadcasts against ``p0[..., 0]``. Returns the
    (..., 2) pixels and a boolean "in front of camera c" flag.
    """
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < 0):
        raise ValueError("inverse depth must be non-negative")
    rays = _homogeneous(p0) @ K0.inverse.T
    cam = rays @ pose.R.T + d[..., None] * pose.t
    depth = cam[..., 2]
    front = depth > PROJ_EPS
    safe = np.where(front, depth, 1.0)
    pix = cam @ Kc.matrix.T
    out = pix[..., :2] / safe[..., None]
    return out, front


def disparity_from_correspondence(p0, pc, pose, K0, Kc):
    """Inverse depth that makes ``plane_project(p0, d)`` land on ``pc``.

    Solves the x or y equation, whichever is better conditioned.
    """
    r = _homogeneous(p0) @ K0.inverse.T @ pose.R.T
    u = r @ Kc.matrix.T
    w = Kc.matrix @ pose.t
    pc = np.asarray(pc, dtype=np.float64)
    den_x = pc[..., 0] * w[2] - w[0]
    den_y = pc[..., 1] * w[2] - w[1]
    num_x = u[..., 0] - pc[..., 0] * u[..., 2]
    num_y = u[..., 1] - pc[..., 1] * u[..., 2]
    use_x = np.abs(den_x) >= np.abs(den_y)
    den = np.where(use_x, den_x, den_y)
    if np.any(np.abs(den) < 1e-15):
        raise ValueError("pose has no parallax for this correspondence")
    return np.where(use_x, num_x, num_y) / den


def pixel_grid(height, width):
    """(H, W, 2) grid of (x, y) pixel coordinates."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    return np.stack([xs, ys], axis=-1)


@dataclass(frozen=True)
class WarpField:
    """Inverse-warp geometry for one camera pair.

    For a target pixel q and plane inverse depth d the source pixel is
    ``base + d * slope`` (exact for fronto-parallel planes, linear in d), and
    the projective depth is ``(1 + d * bz) / az``.
    """

    base: np.ndarray  # H x W x 2
    slope: np.ndarray  # H x W x 2
    az: np.ndarray  # H x W
    bz: float

    def valid(self, d):
        d = np.asarray(d, dtype=np.float64)
        depth = (1.0 + d * self.bz) / np.where(self.az > PROJ_EPS, self.az, 1.0)
        return (self.az > PROJ_EPS) & (depth > PROJ_EPS)

    def coords(self, d):
        """Differentiable source coordinates for an (..., H, W) inverse-depth field."""
        d = gc.as_value(d)
        dv = d.value
        front = self.valid(dv)
        raw = self.base + dv[..., None] * self.slope
        coords = np.where(front[..., None], raw, _OFFFRAME)
        slope = self.slope
        return gc.custom_op(
            coords,
            [(d, lambda g: np.where(front, np.sum(g * slope, axis=-1), 0.0))],
            name="plane_coords",
        )


def warp_field(pose: RigidPose, K0: CameraIntrinsics, Kc: CameraIntrinsics, height=None, width=None):
    height = Kc.height if height is None else height
    width = Kc.width if width is None else width
    q = _homogeneous(pixel_grid(height, width))
    a = q @ Kc.inverse.T @ pose.R  # rows of R^T Kc^-1 q
    b = pose.R.T @ pose.t
    az = a[..., 2]
    safe = np.where(np.abs(az) > PROJ_EPS, az, 1.0)
    ratio = a / safe[..., None]  # (a_x/a_z, a_y/a_z, 1)
    fx, fy, cx, cy = K0.fx, K0.fy, K0.cx, K0.cy
    base = np.stack([fx * ratio[..., 0] + cx, fy * ratio[..., 1] + cy], axis=-1)
    slope = np.stack([fx * (b[2] * ratio[..., 0] - b[0]), fy * (b[2] * ratio[..., 1] - b[1])], axis=-1)
    return WarpField(base, slope, az, float(b[2]))


def warp_plane(src, d_map, pose, K0, Kc):
    """Backward-warp ``src`` (camera 0) into camera c through planes of inverse depth ``d_map``.

    ``d_map`` is read at target (camera c) pixels, which is exact for constant
    maps and an approximation otherwise. Returns ``(image, validity)``.
    """
    src = gc.as_value(src)
    field = warp_field(pose, K0, Kc)
    coords = field.coords(d_map)
    out, valid = gc.bilinear_sample(src, coords)
    return out, valid.astype(bool) & field.valid(gc.as_value(d_map).value)


def translation_factor(mode, scale):
    if mode == "invariant":
        return 1.0
    if mode == "inverse":
        return scale
    if mode == "direct":
        return 1.0 / scale
    raise ConfigError(f"unknown translation mode {mode!r}")


def apply_augmentation(spec: AugmentationSpec, K: CameraIntrinsics, pose: RigidPose):
    """Intrinsics and pose after resizing by ``spec.scale`` and then cropping."""
    s = spec.scale
    width = int(round(K.width * s))
    height = int(round(K.height * s))
    fx, fy, cx, cy = K.fx * s, K.fy * s, K.cx * s, K.cy * s
    if spec.crop is not None:
        u0, v0, w, h = spec.crop
        if u0 < 0 or v0 < 0 or u0 + w > width or v0 + h > height:
            raise ConfigError("crop window exceeds the scaled image")
        cx -= u0
        cy -= v0
        width, height = w, h
    K_new = replace(K, fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height)
    if spec.mode == "invariant":
        t_new = pose.t
    else:
        t_new = pose.t * translation_factor(spec.mode, s)
    return K_new, RigidPose(pose.R, t_new)
