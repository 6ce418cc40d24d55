"""Pure numpy implementation of the bilinear sampling kernels.

Same contract as the compiled module: src is (Bs, Hs, Ws, C) with Bs in
{1, B}, coords is (B, Ho, Wo, 2). Corners outside src read as zero.
"""

import numpy as np

_FAR = 1.0e6

_CORNERS = ((0, 0), (1, 0), (0, 1), (1, 1))


def _prepare(src, coords):
    x = coords[..., 0]
    y = coords[..., 1]
    usable = np.isfinite(x) & np.isfinite(y) & (np.abs(x) <= _FAR) & (np.abs(y) <= _FAR)
    x = np.where(usable, x, -2.0)
    y = np.where(usable, y, -2.0)
    x0 = np.floor(x)
    y0 = np.floor(y)
    wx = x - x0
    wy = y - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    hs, ws = src.shape[1], src.shape[2]
    b = np.arange(coords.shape[0]).reshape(-1, 1, 1)
    bs = b if src.shape[0] > 1 else np.zeros_like(b)
    corners = []
    for dx, dy in _CORNERS:
        xi = x0 + dx
        yi = y0 + dy
        inside = usable & (xi >= 0) & (xi < ws) & (yi >= 0) & (yi < hs)
        wgt = (wx if dx else 1.0 - wx) * (wy if dy else 1.0 - wy)
        wgt = np.where(inside, wgt, 0.0)
        xi = np.clip(xi, 0, ws - 1)
        yi = np.clip(yi, 0, hs - 1)
        corners.append((bs, yi, xi, inside, wgt))
    return usable, x, y, wx, wy, corners


def sample_forward(src, coords, num_threads=1):
    usable, x, y, _, _, corners = _prepare(src, coords)
    hs, ws = src.shape[1], src.shape[2]
    out = np.zeros(coords.shape[:3] + (src.shape[3],))
    for bs, yi, xi, inside, wgt in corners:
        out += wgt[..., None] * np.where(inside[..., None], src[bs, yi, xi], 0.0)
    valid = usable & (x >= 0) & (x <= ws - 1) & (y >= 0) & (y <= hs - 1)
    return out, valid.astype(np.uint8)


def sample_backward(src, coords, gout, need_src=True, need_coords=True, num_threads=1):
    _, _, _, wx, wy, corners = _prepare(src, coords)
    bsz, hs, ws, nc = src.shape
    gsrc = None
    if need_src:
        size = bsz * hs * ws
        gsrc = np.zeros((size, nc))
        for bs, yi, xi, _, wgt in corners:
            flat = ((bs * hs + yi) * ws + xi).ravel()
            for c in range(nc):
                gsrc[:, c] += np.bincount(flat, weights=(wgt * gout[..., c]).ravel(), minlength=size)
        gsrc = gsrc.reshape(bsz, hs, ws, nc)
    gcoords = None
    if need_coords:
        vals = [np.where(inside[..., None], src[bs, yi, xi], 0.0) for bs, yi, xi, inside, _ in corners]
        v00, v01, v10, v11 = vals
        gx = (1.0 - wy)[..., None] * (v01 - v00) + wy[..., None] * (v11 - v10)
        gy = (1.0 - wx)[..., None] * (v10 - v00) + wx[..., None] * (v11 - v01)
        gcoords = np.stack([(gx * gout).sum(-1), (gy * gout).sum(-1)], axis=-1)
    return gsrc, gcoords
