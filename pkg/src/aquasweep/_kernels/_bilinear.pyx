# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled bilinear sampling kernels.

Layout: src is (Bs, Hs, Ws, C) with Bs in {1, B}; coords is (B, Ho, Wo, 2)
holding (x, y) in continuous pixel units. Corners outside src read as zero.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport floor, isfinite

cnp.import_array()

cdef double _FAR = 1.0e6


cdef inline bint _corner(long xi, long yi, long ws, long hs) noexcept nogil:
    return xi >= 0 and xi < ws and yi >= 0 and yi < hs


def sample_forward(const double[:, :, :, ::1] src, const double[:, :, :, ::1] coords,
                   int num_threads=1):
    cdef Py_ssize_t B = coords.shape[0], Ho = coords.shape[1], Wo = coords.shape[2]
    cdef Py_ssize_t Bs = src.shape[0], Hs = src.shape[1], Ws = src.shape[2], C = src.shape[3]
    out_arr = np.zeros((B, Ho, Wo, C), dtype=np.float64)
    valid_arr = np.zeros((B, Ho, Wo), dtype=np.uint8)
    cdef double[:, :, :, ::1] out = out_arr
    cdef unsigned char[:, :, ::1] valid = valid_arr
    cdef Py_ssize_t row, b, i, j, c, bs
    cdef double x, y, wx, wy, w00, w01, w10, w11, acc
    cdef long x0, y0
    cdef bint c00, c01, c10, c11
    for row in prange(B * Ho, nogil=True, schedule="static", num_threads=num_threads):
        b = row // Ho
        i = row % Ho
        bs = b if Bs > 1 else 0
        for j in range(Wo):
            x = coords[b, i, j, 0]
            y = coords[b, i, j, 1]
            if not (isfinite(x) and isfinite(y)) or x < -_FAR or x > _FAR or y < -_FAR or y > _FAR:
                continue
            if x >= 0 and x <= Ws - 1 and y >= 0 and y <= Hs - 1:
                valid[b, i, j] = 1
            x0 = <long>floor(x)
            y0 = <long>floor(y)
            wx = x - x0
            wy = y - y0
            w00 = (1.0 - wx) * (1.0 - wy)
            w01 = wx * (1.0 - wy)
            w10 = (1.0 - wx) * wy
            w11 = wx * wy
            c00 = _corner(x0, y0, Ws, Hs)
            c01 = _corner(x0 + 1, y0, Ws, Hs)
            c10 = _corner(x0, y0 + 1, Ws, Hs)
            c11 = _corner(x0 + 1, y0 + 1, Ws, Hs)
            for c in range(C):
                acc = 0.0
                if c00:
                    acc = acc + w00 * src[bs, y0, x0, c]
                if c01:
                    acc = acc + w01 * src[bs, y0, x0 + 1, c]
                if c10:
                    acc = acc + w10 * src[bs, y0 + 1, x0, c]
                if c11:
                    acc = acc + w11 * src[bs, y0 + 1, x0 + 1, c]
                out[b, i, j, c] = acc
    return out_arr, valid_arr


def sample_backward(const double[:, :, :, ::1] src, const double[:, :, :, ::1] coords,
                    const double[:, :, :, ::1] gout, bint need_src=True,
                    bint need_coords=True, int num_threads=1):
    """Adjoints of sample_forward.

    Source adjoints are accumulated into one private buffer per batch item and
    reduced in batch order afterwards, so the result does not depend on the
    thread count.
    """
    cdef Py_ssize_t B = coords.shape[0], Ho = coords.shape[1], Wo = coords.shape[2]
    cdef Py_ssize_t Bs = src.shape[0], Hs = src.shape[1], Ws = src.shape[2], C = src.shape[3]
    gpriv_arr = np.zeros((B if need_src else 1, Hs, Ws, C), dtype=np.float64)
    gcoords_arr = np.zeros((B, Ho, Wo, 2), dtype=np.float64)
    cdef double[:, :, :, ::1] gpriv = gpriv_arr
    cdef double[:, :, :, ::1] gcoords = gcoords_arr
    cdef Py_ssize_t b, i, j, c, bs
    cdef double x, y, wx, wy, g, v00, v01, v10, v11, gx, gy
    cdef long x0, y0
    cdef bint c00, c01, c10, c11
    for b in prange(B, nogil=True, schedule="static", num_threads=num_threads):
        bs = b if Bs > 1 else 0
        for i in range(Ho):
            for j in range(Wo):
                x = coords[b, i, j, 0]
                y = coords[b, i, j, 1]
                if not (isfinite(x) and isfinite(y)) or x < -_FAR or x > _FAR or y < -_FAR or y > _FAR:
                    continue
                x0 = <long>floor(x)
                y0 = <long>floor(y)
                wx = x - x0
                wy = y - y0
                c00 = _corner(x0, y0, Ws, Hs)
                c01 = _corner(x0 + 1, y0, Ws, Hs)
                c10 = _corner(x0, y0 + 1, Ws, Hs)
                c11 = _corner(x0 + 1, y0 + 1, Ws, Hs)
                gx = 0.0
                gy = 0.0
                for c in range(C):
                    g = gout[b, i, j, c]
                    if need_src:
                        if c00:
                            gpriv[b, y0, x0, c] += (1.0 - wx) * (1.0 - wy) * g
                        if c01:
                            gpriv[b, y0, x0 + 1, c] += wx * (1.0 - wy) * g
                        if c10:
                            gpriv[b, y0 + 1, x0, c] += (1.0 - wx) * wy * g
                        if c11:
                            gpriv[b, y0 + 1, x0 + 1, c] += wx * wy * g
                    if need_coords:
                        v00 = src[bs, y0, x0, c] if c00 else 0.0
                        v01 = src[bs, y0, x0 + 1, c] if c01 else 0.0
                        v10 = src[bs, y0 + 1, x0, c] if c10 else 0.0
                        v11 = src[bs, y0 + 1, x0 + 1, c] if c11 else 0.0
                        gx = gx + g * ((1.0 - wy) * (v01 - v00) + wy * (v11 - v10))
                        gy = gy + g * ((1.0 - wx) * (v10 - v00) + wx * (v11 - v01))
                gcoords[b, i, j, 0] = gx
                gcoords[b, i, j, 1] = gy
    gsrc = None
    if need_src:
        if Bs > 1:
            gsrc = gpriv_arr
        else:
            gsrc = gpriv_arr[0:1].copy()
            for b in range(1, B):
                gsrc[0] += gpriv_arr[b]
    return gsrc, (gcoords_arr if need_coords else None)
