"""Reverse-mode differentiation over dense numpy grids.

A :class:`Tape` records every :class:`DiffValue` that depends on a variable,
in creation order. :meth:`Tape.backward` walks that list in reverse and pushes
adjoints to parents through the local vector-Jacobian closures attached at
creation time. Values that do not depend on any variable are constants and are
never recorded.

Example::

    tape = Tape()
    x = tape.variable(np.array([1.0, 2.0]))
    loss = gc.sum(x * x)
    tape.backward(loss)
    x.adjoint  # array([2., 4.])
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .errors import NumericalError

DIVISOR_EPS = 1e-12

Vjp = Callable[[np.ndarray], np.ndarray]


class DiffValue:
    __slots__ = ("value", "tape", "parents", "_adjoint", "name", "__weakref__")

    __array_priority__ = 1000

    def __init__(self, value, tape=None, parents=(), name=None):
        value = np.array(value, dtype=np.float64)
        if not np.all(np.isfinite(value)):
            raise NumericalError(f"non-finite value in {name or 'DiffValue'}")
        value.flags.writeable = False
        self.value = value
        self.tape = tape
        self.parents = tuple(parents)
        self._adjoint = None
        self.name = name
        if tape is not None:
            tape._record(self)

    @property
    def requires_grad(self):
        return self.tape is not None

    @property
    def adjoint(self):
        if self._adjoint is None:
            return np.zeros_like(self.value)
        return self._adjoint

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def item(self):
        return float(self.value)

    def __repr__(self):
        kind = "variable" if self.requires_grad else "constant"
        return f"DiffValue({kind}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, other):
        return power(self, other)

    def __rpow__(self, other):
        return power(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __abs__(self):
        return absolute(self)

    def __getitem__(self, idx):
        return getitem(self, idx)


class Tape:
    """Ordered record of the operations of one forward pass.

    A tape is single-writer: do not share one between concurrent fits.
    """

    def __init__(self):
        self.nodes: list[DiffValue] = []

    def __len__(self):
        return len(self.nodes)

    def _record(self, node):
        self.nodes.append(node)

    def variable(self, value, name=None) -> DiffValue:
        return DiffValue(value, tape=self, name=name)

    def backward(self, loss: DiffValue):
        if loss.tape is not self:
            raise ValueError("loss was not recorded on this tape")
        if loss.value.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        for node in self.nodes:
            node._adjoint = None
        loss._adjoint = np.ones_like(loss.value)
        for node in reversed(self.nodes):
            g = node._adjoint
            if g is None:
                continue
            for parent, vjp in node.parents:
                contrib = _unbroadcast(vjp(g), parent.value.shape)
                if not np.all(np.isfinite(contrib)):
                    raise NumericalError(f"non-finite adjoint flowing into {parent.name or 'node'}")
                if parent._adjoint is None:
                    parent._adjoint = np.array(contrib, dtype=np.float64)
                else:
                    parent._adjoint = parent._adjoint + contrib

    def release(self):
        """Drop recorded nodes and their closures so the graph can be freed at once."""
        for node in self.nodes:
            node.parents = ()
            node.tape = None
        self.nodes = []


def as_value(x) -> DiffValue:
    if isinstance(x, DiffValue):
        return x
    return DiffValue(x)


def _tape_of(*values):
    tape = None
    for v in values:
        if v.tape is not None:
            if tape is not None and v.tape is not tape:
                raise ValueError("operands belong to different tapes")
            tape = v.tape
    return tape


def _make(value, links, name=None) -> DiffValue:
    """Create an op result; ``links`` pairs each input with its VJP closure."""
    live = [(p, f) for p, f in links if p.requires_grad]
    tape = _tape_of(*(p for p, _ in live))
    return DiffValue(value, tape=tape, parents=live, name=name)


def custom_op(value, links: Sequence[tuple[DiffValue, Vjp]], name=None) -> DiffValue:
    """Public hook for ops whose local derivatives are written by hand elsewhere."""
    return _make(value, [(as_value(p), f) for p, f in links], name=name)


def _unbroadcast(g, shape):
    g = np.asarray(g, dtype=np.float64)
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# -- elementwise -------------------------------------------------------------


def add(a, b):
    a, b = as_value(a), as_value(b)
    return _make(a.value + b.value, [(a, lambda g: g), (b, lambda g: g)], "add")


def sub(a, b):
    a, b = as_value(a), as_value(b)
    return _make(a.value - b.value, [(a, lambda g: g), (b, lambda g: -g)], "sub")


def mul(a, b):
    a, b = as_value(a), as_value(b)
    av, bv = a.value, b.value
    return _make(av * bv, [(a, lambda g: g * bv), (b, lambda g: g * av)], "mul")


def div(a, b):
    a, b = as_value(a), as_value(b)
    av, bv = a.value, b.value
    if np.any(np.abs(bv) < DIVISOR_EPS):
        raise NumericalError("degenerate divisor")
    out = av / bv
    return _make(out, [(a, lambda g: g / bv), (b, lambda g: -g * out / bv)], "div")


def exp(a):
    a = as_value(a)
    with np.errstate(over="raise"):
        try:
            out = np.exp(a.value)
        except FloatingPointError as exc:
            raise NumericalError("exp overflow") from exc
    return _make(out, [(a, lambda g: g * out)], "exp")


def log(a):
    a = as_value(a)
    av = a.value
    if np.any(av <= 0):
        raise NumericalError("ln of non-positive value")
    return _make(np.log(av), [(a, lambda g: g / av)], "ln")


def power(a, b):
    """``a ** b`` with both operands differentiable."""
    a, b = as_value(a), as_value(b)
    av, bv = np.broadcast_arrays(a.value, b.value)
    neg = av < 0
    if np.any(neg & (bv != np.round(bv))):
        raise NumericalError("negative base with non-integer exponent")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.power(av, bv)

    def vjp_a(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            local = np.where(bv == 0, 0.0, bv * np.power(av, bv - 1.0))
        return g * local

    def vjp_b(g):
        if np.any(neg):
            raise NumericalError("exponent derivative undefined for negative base")
        with np.errstate(divide="ignore", invalid="ignore"):
            local = np.where(av > 0, out * np.log(np.where(av > 0, av, 1.0)), 0.0)
        return g * local

    return _make(out, [(a, vjp_a), (b, vjp_b)], "pow")


def absolute(a):
    a = as_value(a)
    sign = np.sign(a.value)
    return _make(np.abs(a.value), [(a, lambda g: g * sign)], "abs")


def clamp(a, lo=None, hi=None):
    a = as_value(a)
    lo_v = -np.inf if lo is None else lo
    hi_v = np.inf if hi is None else hi
    inside = (a.value > lo_v) & (a.value < hi_v)
    out = np.clip(a.value, lo_v, hi_v)
    return _make(out, [(a, lambda g: g * inside)], "clamp")


def tanh(a):
    a = as_value(a)
    out = np.tanh(a.value)
    return _make(out, [(a, lambda g: g * (1.0 - out * out))], "tanh")


def softplus(a):
    a = as_value(a)
    av = a.value
    out = np.logaddexp(0.0, av)
    sig = 0.5 * (1.0 + np.tanh(0.5 * av))
    return _make(out, [(a, lambda g: g * sig)], "softplus")


def where(mask, a, b):
    """Select ``a`` where the constant boolean ``mask`` holds, else ``b``."""
    mask = np.asarray(mask, dtype=bool)
    a, b = as_value(a), as_value(b)
    out = np.where(mask, a.value, b.value)
    return _make(
        out,
        [(a, lambda g: np.where(mask, g, 0.0)), (b, lambda g: np.where(mask, 0.0, g))],
        "where",
    )


_UNARY = {"exp": exp, "ln": log, "abs": absolute}
_BINARY = {"add": add, "sub": sub, "mul": mul, "div": div, "pow": power}


def elementwise(kind, a, b=None, **kw):
    """Dispatch by op name: add, sub, mul, div, exp, ln, pow, abs, clamp."""
    if kind in _BINARY:
        return _BINARY[kind](a, b)
    if kind in _UNARY:
        return _UNARY[kind](a)
    if kind == "clamp":
        return clamp(a, **kw)
    raise ValueError(f"unknown op kind {kind!r}")


# -- reductions and shape ----------------------------------------------------


def sum(a, axis=None, keepdims=False):  # noqa: A001
    a = as_value(a)
    shape = a.value.shape
    out = np.sum(a.value, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape)

    return _make(out, [(a, vjp)], "sum")


def mean(a, axis=None, keepdims=False):
    a = as_value(a)
    n = a.value.size if axis is None else np.prod([a.value.shape[ax] for ax in np.atleast_1d(axis)])
    return sum(a, axis=axis, keepdims=keepdims) * (1.0 / n)


def getitem(a, idx):
    a = as_value(a)
    shape = a.value.shape

    def vjp(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return full

    return _make(a.value[idx], [(a, vjp)], "getitem")


def reshape(a, shape):
    a = as_value(a)
    old = a.value.shape
    return _make(a.value.reshape(shape), [(a, lambda g: g.reshape(old))], "reshape")


def transpose(a, axes):
    a = as_value(a)
    inv = np.argsort(axes)
    return _make(np.transpose(a.value, axes), [(a, lambda g: np.transpose(g, inv))], "transpose")


def stack(values, axis=0):
    values = [as_value(v) for v in values]
    out = np.stack([v.value for v in values], axis=axis)
    links = [(v, (lambda i: lambda g: np.take(g, i, axis=axis))(i)) for i, v in enumerate(values)]
    return _make(out, links, "stack")


def concatenate(values, axis=0):
    values = [as_value(v) for v in values]
    out = np.concatenate([v.value for v in values], axis=axis)
    bounds = np.cumsum([0] + [v.value.shape[axis] for v in values])
    links = []
    for i, v in enumerate(values):
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(bounds[i], bounds[i + 1])
        links.append((v, (lambda s: lambda g: g[s])(tuple(sl))))
    return _make(out, links, "concatenate")


# -- structured ops ----------------------------------------------------------


def channel_softmax(logits, axis=0):
    """Softmax over ``axis`` (the plane axis of an N x H x W volume)."""
    logits = as_value(logits)
    if logits.value.shape[axis] < 2:
        raise ValueError("softmax needs at least two channels")
    z = logits.value - logits.value.max(axis=axis, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return p * (g - np.sum(g * p, axis=axis, keepdims=True))

    return _make(p, [(logits, vjp)], "softmax")


def sample4(src, coords, backend=None):
    """Batched bilinear sampling on 4-D layouts.

    ``src`` is (Bs, Hs, Ws, C) with Bs in {1, B}; ``coords`` is (B, Ho, Wo, 2)
    holding (x, y). Returns the (B, Ho, Wo, C) samples and a (B, Ho, Wo) uint8
    validity map that is 1 where the coordinate lies inside the source frame.
    """
    src, coords = as_value(src), as_value(coords)
    sv, cv = src.value, coords.value
    out, valid = _kernels.sample_forward(sv, cv, backend=backend)
    cache = [None, None]

    # both parents receive the same adjoint object; run the kernel once
    def grads(g):
        if cache[0] is not g:
            cache[0] = g
            cache[1] = _kernels.sample_backward(
                sv, cv, g, need_src=src.requires_grad, need_coords=coords.requires_grad, backend=backend
            )
        return cache[1]

    node = _make(
        out,
        [(src, lambda g: grads(g)[0]), (coords, lambda g: grads(g)[1])],
        "bilinear_sample",
    )
    return node, valid


def bilinear_sample(src, coords, backend=None):
    """Sample an H x W or H x W x C image at H' x W' x 2 pixel coordinates.

    Out-of-frame samples read zeros and carry validity 0.
    """
    src, coords = as_value(src), as_value(coords)
    if coords.ndim != 3 or coords.shape[-1] != 2:
        raise ValueError("coords must be H x W x 2")
    squeeze = src.ndim == 2
    s4 = reshape(src, (1,) + src.shape + ((1,) if squeeze else ()))
    c4 = reshape(coords, (1,) + coords.shape)
    out, valid = sample4(s4, c4, backend=backend)
    out_shape = coords.shape[:2] + (() if squeeze else (src.shape[-1],))
    return reshape(out, out_shape), valid[0]


def conv2d(x, weight, stride=1):
    """Zero-padded 'same' style convolution of a C x H x W grid by constant weights."""
    x = as_value(x)
    w = np.asarray(weight, dtype=np.float64)
    co, ci, k, _ = w.shape
    pad = k // 2
    c, h, wd = x.shape
    if c != ci:
        raise ValueError(f"conv2d expects {ci} input channels, got {c}")
    xp = np.pad(x.value, ((0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    patches = np.empty((ci, k, k, ho, wo))
    for ky in range(k):
        for kx in range(k):
            patches[:, ky, kx] = xp[:, ky:ky + stride * ho:stride, kx:kx + stride * wo:stride]
    out = np.einsum("oikl,iklhw->ohw", w, patches)

    def vjp(g):
        gp = np.einsum("oikl,ohw->iklhw", w, g)
        gxp = np.zeros_like(xp)
        for ky in range(k):
            for kx in range(k):
                gxp[:, ky:ky + stride * ho:stride, kx:kx + stride * wo:stride] += gp[:, ky, kx]
        return gxp[:, pad:pad + h, pad:pad + wd]

    return _make(out, [(x, vjp)], "conv2d")


# -- verification ------------------------------------------------------------


def _scalar(out):
    out = as_value(out)
    if out.value.size != 1:
        raise ValueError(f"loss builder must return a scalar, got shape {out.shape}")
    val = float(out.value.reshape(()))
    if not np.isfinite(val):
        raise NumericalError("non-finite loss")
    return out, val


def analytic_gradients(loss_builder, params):
    tape = Tape()
    variables = [tape.variable(p) for p in params]
    loss, _ = _scalar(loss_builder(*variables))
    if loss.tape is None:
        return [np.zeros_like(p) for p in params]
    tape.backward(loss)
    return [v.adjoint for v in variables]


def check_gradients(loss_builder, params, h=1e-6, return_grads=False):
    """Compare tape adjoints with central differences, entry by entry.

    ``loss_builder`` receives one DiffValue per entry of ``params`` and must
    return a scalar DiffValue. Returns the maximum over entries of
    ``|g_a - g_fd| / max(1, |g_a|, |g_fd|)``.
    """
    if isinstance(params, np.ndarray):
        params = [params]
    params = [np.array(p, dtype=np.float64) for p in params]
    analytic = analytic_gradients(loss_builder, params)

    def evaluate(values):
        return _scalar(loss_builder(*[DiffValue(v) for v in values]))[1]

    worst = 0.0
    numeric = []
    for k, p in enumerate(params):
        fd = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            shifted = [q.copy() for q in params]
            shifted[k][idx] = p[idx] + h
            f_plus = evaluate(shifted)
            shifted[k][idx] = p[idx] - h
            f_minus = evaluate(shifted)
            fd[idx] = (f_plus - f_minus) / (2.0 * h)
        ga = analytic[k]
        rel = np.abs(ga - fd) / np.maximum(1.0, np.maximum(np.abs(ga), np.abs(fd)))
        if rel.size:
            worst = max(worst, float(rel.max()))
        numeric.append(fd)
    if return_grads:
        return worst, analytic, numeric
    return worst
