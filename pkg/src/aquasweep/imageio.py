"""PFM / PPM / PGM readers and writers with atomic file replacement."""

from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


# -- PFM ---------------------------------------------------------------------


def encode_pfm(data) -> bytes:
    """Little-endian PFM; rows are stored bottom-to-top as the format requires."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 3 and data.shape[2] == 3:
        header = b"PF"
    elif data.ndim == 2 or (data.ndim == 3 and data.shape[2] == 1):
        header = b"Pf"
        data = data.reshape(data.shape[:2])
    else:
        raise ValueError(f"PFM holds 1 or 3 channels, got shape {data.shape}")
    h, w = data.shape[:2]
    body = np.flipud(data).astype("<f4").tobytes()
    return header + b"\n" + f"{w} {h}\n".encode() + b"-1.0\n" + body


def write_pfm(path, data):
    atomic_write_bytes(path, encode_pfm(data))


def _read_token_lines(f, count):
    lines = []
    while len(lines) < count:
        line = f.readline()
        if not line:
            raise ConfigError("truncated header")
        line = line.strip()
        if line and not line.startswith(b"#"):
            lines.append(line.decode("ascii"))
    return lines


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        kind, dims, scale_line = _read_token_lines(f, 3)
        if kind not in ("PF", "Pf"):
            raise ConfigError(f"{path}: not a PFM file")
        m = re.match(r"^(\d+)\s+(\d+)$", dims)
        if not m:
            raise ConfigError(f"{path}: malformed PFM dimensions")
        w, h = int(m.group(1)), int(m.group(2))
        try:
            scale = float(scale_line)
        except ValueError as exc:
            raise ConfigError(f"{path}: malformed PFM scale") from exc
        endian = "<" if scale < 0 else ">"
        channels = 3 if kind == "PF" else 1
        raw = f.read()
    count = w * h * channels
    if len(raw) < 4 * count:
        raise ConfigError(f"{path}: truncated PFM data")
    data = np.frombuffer(raw[: 4 * count], dtype=endian + "f4").reshape(h, w, channels)
    data = np.flipud(data).astype(np.float64)
    return data[..., 0] if channels == 1 else data


# -- PPM / PGM ---------------------------------------------------------------


def _to_bytes(img):
    img = np.asarray(img, dtype=np.float64)
    return np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)


def encode_ppm(image) -> bytes:
    image = _to_bytes(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("PPM needs an H x W x 3 image")
    h, w = image.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode() + image.tobytes()


def encode_pgm(image) -> bytes:
    image = _to_bytes(image)
    if image.ndim != 2:
        raise ValueError("PGM needs an H x W image")
    h, w = image.shape
    return f"P5\n{w} {h}\n255\n".encode() + image.tobytes()


def write_ppm(path, image):
    atomic_write_bytes(path, encode_ppm(image))


def write_pgm(path, image):
    """Values in [0, 1]; binary masks come out as 0 / 255."""
    atomic_write_bytes(path, encode_pgm(image))


def _read_netpbm(path, magic, channels):
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ConfigError(f"{path}: truncated header")
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != magic:
        raise ConfigError(f"{path}: expected {magic.decode()} file")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed header") from exc
    if maxval != 255:
        raise ConfigError(f"{path}: only maxval 255 is supported")
    body = np.frombuffer(data[pos:pos + w * h * channels], dtype=np.uint8)
    if body.size != w * h * channels:
        raise ConfigError(f"{path}: truncated image data")
    img = body.reshape(h, w, channels).astype(np.float64) / 255.0
    return img if channels == 3 else img[..., 0]


def read_ppm(path):
    return _read_netpbm(path, b"P6", 3)


def read_pgm(path):
    return _read_netpbm(path, b"P5", 1)
