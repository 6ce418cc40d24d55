"""Hot-loop kernels with a compiled core and a numpy fallback.

The compiled module is used when it imports; set ``AQUA_PURE_PYTHON=1`` to
force the fallback. ``AQUA_THREADS`` caps the OpenMP thread count of the
compiled kernels (0 or unset means one thread per available core).
"""

import os

import numpy as np

from . import _fallback

try:
    if os.environ.get("AQUA_PURE_PYTHON", "0") not in ("", "0"):
        raise ImportError("pure python backend forced")
    from . import _bilinear as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"


def num_threads():
    raw = os.environ.get("AQUA_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def _get(backend):
    return BACKENDS[backend or BACKEND]


def sample_forward(src, coords, backend=None):
    src = np.ascontiguousarray(src, dtype=np.float64)
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    return _get(backend).sample_forward(src, coords, num_threads=num_threads())


def sample_backward(src, coords, gout, need_src=True, need_coords=True, backend=None):
    src = np.ascontiguousarray(src, dtype=np.float64)
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    gout = np.ascontiguousarray(gout, dtype=np.float64)
    return _get(backend).sample_backward(
        src, coords, gout, need_src=need_src, need_coords=need_coords, num_threads=num_threads()
    )
