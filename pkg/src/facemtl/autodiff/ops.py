"""Differentiable operations over ``Tensor``.

Every op computes its forward value with numpy and, when a tape is
active and any operand is tracked, registers a closure implementing the
vector-Jacobian product. Binary ops broadcast with trailing-dimension
alignment; gradients are summed back over broadcast axes.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

from .tensor import (
    DomainError,
    ShapeError,
    Tensor,
    active_tape,
    as_tensor,
    current_mode,
)

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _record(out: Tensor, inputs, backward_fn, op: str) -> Tensor:
    tape = active_tape()
    if tape is not None and any(tape.tracks(t) or t.requires_grad for t in inputs):
        tape.record(out, inputs, backward_fn, op)
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == tuple(shape):
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_axis(axis: int, ndim: int, op: str) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"{op}: axis {axis} invalid for a {ndim}-d tensor")
    return axis % ndim


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    try:
        out = Tensor(a.data + b.data)
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} are not broadcastable")
    return _record(
        out, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    try:
        out = Tensor(a.data - b.data)
    except ValueError:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} are not broadcastable")
    return _record(
        out, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    try:
        out = Tensor(a.data * b.data)
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} are not broadcastable")
    ad, bd = a.data, b.data
    return _record(
        out, (a, b),
        lambda g: (_unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)),
        "mul",
    )


def div(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    try:
        out = Tensor(a.data / b.data)
    except ValueError:
        raise ShapeError(f"div: shapes {a.shape} and {b.shape} are not broadcastable")
    ad, bd = a.data, b.data
    return _record(
        out, (a, b),
        lambda g: (
            _unbroadcast(g / bd, a.shape),
            _unbroadcast(-g * ad / (bd * bd), b.shape),
        ),
        "div",
    )


def neg(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(-x.data)
    return _record(out, (x,), lambda g: (-g,), "neg")


def power(x, p: float) -> Tensor:
    x = as_tensor(x)
    p = float(p)
    out = Tensor(x.data ** p)
    xd = x.data
    return _record(out, (x,), lambda g: (g * p * xd ** (p - 1.0),), "power")


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.exp(x.data))
    od = out.data
    return _record(out, (x,), lambda g: (g * od,), "exp")


def log(x) -> Tensor:
    x = as_tensor(x)
    if current_mode() == "f64" and np.any(x.data <= 0):
        raise DomainError("log: non-positive input in 64-bit (test) mode")
    with np.errstate(divide="ignore", invalid="ignore"):  # run mode tolerates -inf/nan
        out = Tensor(np.log(x.data))
    xd = x.data
    return _record(out, (x,), lambda g: (g / xd,), "log")


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    if current_mode() == "f64" and np.any(x.data < 0):
        raise DomainError("sqrt: negative input in 64-bit (test) mode")
    out = Tensor(np.sqrt(x.data))
    od = out.data
    return _record(out, (x,), lambda g: (g * 0.5 / od,), "sqrt")


def relu(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.maximum(x.data, 0))
    mask = x.data > 0
    return _record(out, (x,), lambda g: (g * mask,), "relu")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    # split by sign to avoid overflow in exp
    pos = xd >= 0
    s = np.empty_like(xd)
    s[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ex = np.exp(xd[~pos])
    s[~pos] = ex / (1.0 + ex)
    out = Tensor(s)
    return _record(out, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def gelu(x) -> Tensor:
    """Exact (erf-based) GELU: 0.5 * x * (1 + erf(x / sqrt(2)))."""
    x = as_tensor(x)
    xd = x.data
    cdf = 0.5 * (1.0 + _erf(xd * _INV_SQRT2))
    out = Tensor(xd * cdf)
    pdf = np.exp(-0.5 * xd * xd) * _INV_SQRT2PI
    return _record(out, (x,), lambda g: (g * (cdf + xd * pdf),), "gelu")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.tanh(x.data))
    od = out.data
    return _record(out, (x,), lambda g: (g * (1.0 - od * od),), "tanh")


def absolute(x) -> Tensor:
    """|x|; subgradient 0 at x == 0."""
    x = as_tensor(x)
    out = Tensor(np.abs(x.data))
    sign = np.sign(x.data)
    return _record(out, (x,), lambda g: (g * sign,), "abs")


def arccos(x) -> Tensor:
    """arccos; callers must keep |x| < 1 (see ``clip``)."""
    x = as_tensor(x)
    if current_mode() == "f64" and np.any(np.abs(x.data) >= 1.0):
        raise DomainError("arccos: |input| >= 1 in 64-bit (test) mode")
    out = Tensor(np.arccos(x.data))
    xd = x.data
    return _record(out, (x,), lambda g: (-g / np.sqrt(1.0 - xd * xd),), "arccos")


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes only where not clamped."""
    x = as_tensor(x)
    out = Tensor(np.clip(x.data, lo, hi))
    mask = (x.data > lo) & (x.data < hi)
    return _record(out, (x,), lambda g: (g * mask,), "clip")


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "gelu": gelu,
    "relu": relu,
    "sigmoid": sigmoid,
    "exp": exp,
    "log": log,
}


def elementwise(op: str, *operands) -> Tensor:
    """Dispatch table for the named elementwise ops."""
    if op not in _ELEMENTWISE:
        raise ValueError(f"unknown elementwise op {op!r}; expected one of {sorted(_ELEMENTWISE)}")
    return _ELEMENTWISE[op](*operands)


# ---------------------------------------------------------------------------
# matmul / softmax / normalization
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be at least 2-d, got {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions disagree for shapes {a.shape} x {b.shape}")
    try:
        out = Tensor(np.matmul(a.data, b.data))
    except ValueError:
        raise ShapeError(f"matmul: batch dimensions not broadcastable for {a.shape} x {b.shape}")
    ad, bd = a.data, b.data

    def bwd(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(bd, -1, -2)), a.shape)
        gb = _unbroadcast(np.matmul(np.swapaxes(ad, -1, -2), g), b.shape)
        return ga, gb

    return _record(out, (a, b), bwd, "matmul")


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    axis = _check_axis(axis, x.ndim, "softmax")
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y)

    def bwd(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return _record(out, (x,), bwd, "softmax")


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    axis = _check_axis(axis, x.ndim, "log_softmax")
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse
    out = Tensor(y)
    p = np.exp(y)

    def bwd(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return _record(out, (x,), bwd, "log_softmax")


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale-shift."""
    x = as_tensor(x)
    gain = as_tensor(gain, like=x)
    bias = as_tensor(bias, like=x)
    if eps <= 0:
        raise ValueError("layer_norm: eps must be positive")
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(
            f"layer_norm: gain/bias shapes {gain.shape}/{bias.shape} do not match last axis {d}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor(xhat * gain.data + bias.data)
    gd = gain.data

    def bwd(g):
        axes = tuple(range(g.ndim - 1))
        dgain = (g * xhat).sum(axis=axes) if g.ndim > 1 else g * xhat
        dbias = g.sum(axis=axes) if g.ndim > 1 else g
        dxhat = g * gd
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (dxhat - m1 - xhat * m2)
        return dx, dgain, dbias

    return _record(out, (x, gain, bias), bwd, "layer_norm")


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def sum(x, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    if axis is not None:
        axis = _check_axis(axis, x.ndim, "sum")
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims))
    shape = x.shape

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _record(out, (x,), bwd, "sum")


def mean(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    if axis is not None:
        axis = _check_axis(axis, x.ndim, "mean")
    out = Tensor(x.data.mean(axis=axis, keepdims=keepdims))
    shape = x.shape
    n = x.data.size if axis is None else shape[axis]

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, shape).copy(),)

    return _record(out, (x,), bwd, "mean")


def max(x, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    """Max reduction; backward routes to the first argmax (tie-break)."""
    x = as_tensor(x)
    if axis is not None:
        axis = _check_axis(axis, x.ndim, "max")
    out = Tensor(x.data.max(axis=axis, keepdims=keepdims))
    xd = x.data

    def bwd(g):
        mask = np.zeros_like(xd)
        if axis is None:
            flat_idx = int(np.argmax(xd))
            mask.reshape(-1)[flat_idx] = 1.0
            return (mask * g,)
        idx = np.argmax(xd, axis=axis)
        np.put_along_axis(mask, np.expand_dims(idx, axis), 1.0, axis=axis)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (mask * g,)

    return _record(out, (x,), bwd, "max")


def reduce(op: str, x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    """Dispatch table for the named reductions."""
    table = {"sum": sum, "mean": mean, "max": max}
    if op not in table:
        raise ValueError(f"unknown reduction {op!r}; expected one of {sorted(table)}")
    return table[op](x, axis=axis, keepdims=keepdims)


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------

def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.reshape(shape))
    orig = x.shape
    return _record(out, (x,), lambda g: (g.reshape(orig),), "reshape")


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    out = Tensor(x.data.transpose(axes))
    inverse = tuple(np.argsort(axes))
    return _record(out, (x,), lambda g: (g.transpose(inverse),), "transpose")


def swapaxes(x, a: int, b: int) -> Tensor:
    x = as_tensor(x)
    axes = list(range(x.ndim))
    axes[a], axes[b] = axes[b], axes[a]
    return transpose(x, axes)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    axis = _check_axis(axis, tensors[0].ndim, "concat")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(out, tuple(tensors), bwd, "concat")


def slice_axis(x, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice along one axis; backward zero-pads."""
    x = as_tensor(x)
    axis = _check_axis(axis, x.ndim, "slice_axis")
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = Tensor(x.data[index])
    shape = x.shape

    def bwd(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[index] = g
        return (full,)

    return _record(out, (x,), bwd, "slice_axis")


def gather_rows(x, indices) -> Tensor:
    """Select rows along axis 0; backward scatter-adds (repeats allowed)."""
    x = as_tensor(x)
    idx = np.asarray(indices, dtype=np.int64)
    out = Tensor(x.data[idx])
    shape = x.shape

    def bwd(g):
        full = np.zeros(shape, dtype=g.dtype)
        np.add.at(full, idx, g)
        return (full,)

    return _record(out, (x,), bwd, "gather_rows")


def broadcast_to(x, shape) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    out = Tensor(np.broadcast_to(x.data, shape).copy())
    orig = x.shape
    return _record(out, (x,), lambda g: (_unbroadcast(g, orig),), "broadcast_to")


# ---------------------------------------------------------------------------
# convolution / resizing
# ---------------------------------------------------------------------------

def conv2d(x, w, stride: int = 1, padding: int = 0) -> Tensor:
    """2-d cross-correlation of [B,Cin,H,W] with [Cout,Cin,kh,kw]."""
    x = as_tensor(x)
    w = as_tensor(w, like=x)
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d: expected 4-d input and kernel, got {x.shape} and {w.shape}")
    if stride < 1:
        raise ValueError("conv2d: stride must be >= 1")
    batch, cin, h, wd = x.shape
    cout, cin2, kh, kw = w.shape
    if cin != cin2:
        raise ShapeError(f"conv2d: input channels {cin} != kernel channels {cin2}")
    hp, wp = h + 2 * padding, wd + 2 * padding
    if kh > hp or kw > wp:
        raise ShapeError(
            f"conv2d: kernel ({kh}x{kw}) larger than padded input ({hp}x{wp})"
        )
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))

    cols = np.empty((batch, cin, kh, kw, ho, wo), dtype=x.data.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + (ho - 1) * stride + 1 : stride,
                                  j : j + (wo - 1) * stride + 1 : stride]
    cols2 = cols.reshape(batch, cin * kh * kw, ho * wo)
    w2 = w.data.reshape(cout, cin * kh * kw)
    out = Tensor(np.matmul(w2, cols2).reshape(batch, cout, ho, wo))

    def bwd(g):
        g2 = g.reshape(batch, cout, ho * wo)
        dw = np.matmul(g2, cols2.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
        dcols = np.matmul(w2.T, g2).reshape(batch, cin, kh, kw, ho, wo)
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i : i + (ho - 1) * stride + 1 : stride,
                    j : j + (wo - 1) * stride + 1 : stride] += dcols[:, :, i, j]
        if padding:
            dxp = dxp[:, :, padding:-padding, padding:-padding]
        return dxp, dw

    return _record(out, (x, w), bwd, "conv2d")


def bilinear_resize(x, out_h: int, out_w: int) -> Tensor:
    """Bilinear resize of [B,C,H,W] (align_corners=False, edges clamped)."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"bilinear_resize: expected 4-d input, got {x.shape}")
    if out_h < 1 or out_w < 1:
        raise ValueError("bilinear_resize: output dims must be >= 1")
    batch, ch, h, w = x.shape
    if (out_h, out_w) == (h, w):
        out = Tensor(x.data.copy())
        return _record(out, (x,), lambda g: (g,), "bilinear_resize")

    def axis_weights(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        i0f = np.floor(src)
        t = src - i0f
        i0 = np.clip(i0f, 0, n_in - 1).astype(np.int64)
        i1 = np.clip(i0f + 1, 0, n_in - 1).astype(np.int64)
        return i0, i1, t

    h0, h1, th = axis_weights(h, out_h)
    w0, w1, tw = axis_weights(w, out_w)
    th_c = th.reshape(1, 1, out_h, 1)
    tw_c = tw.reshape(1, 1, 1, out_w)

    rows = x.data[:, :, h0, :] * (1.0 - th_c) + x.data[:, :, h1, :] * th_c
    out_data = rows[:, :, :, w0] * (1.0 - tw_c) + rows[:, :, :, w1] * tw_c
    out = Tensor(out_data.astype(x.data.dtype))

    def bwd(g):
        drows = np.zeros((batch, ch, out_h, w), dtype=g.dtype)
        np.add.at(drows, (slice(None), slice(None), slice(None), w0), g * (1.0 - tw_c))
        np.add.at(drows, (slice(None), slice(None), slice(None), w1), g * tw_c)
        dx = np.zeros((batch, ch, h, w), dtype=g.dtype)
        np.add.at(dx, (slice(None), slice(None), h0, slice(None)), drows * (1.0 - th_c))
        np.add.at(dx, (slice(None), slice(None), h1, slice(None)), drows * th_c)
        return (dx,)

    return _record(out, (x,), bwd, "bilinear_resize")


# ---------------------------------------------------------------------------
# composites used across the model
# ---------------------------------------------------------------------------

def linear(x, weight, bias=None) -> Tensor:
    """x @ weight.T + bias, with weight stored [out, in]."""
    x = as_tensor(x)
    weight = as_tensor(weight, like=x)
    if x.shape[-1] != weight.shape[-1]:
        raise ShapeError(
            f"linear: input feature dim {x.shape[-1]} != weight in-dim {weight.shape[-1]}"
        )
    out = matmul(x, transpose(weight))
    if bias is not None:
        out = add(out, bias)
    return out


def l2_normalize(x, axis: int = -1, eps: float = 1e-12) -> Tensor:
    """Rows scaled to unit Euclidean norm (epsilon-guarded near zero)."""
    sq = sum(mul(x, x), axis=axis, keepdims=True)
    return div(x, sqrt(add(sq, as_tensor(eps, like=as_tensor(x)))))
