"""Differentiable operations.

Each op computes its forward value with numpy and registers a closure that
maps the output gradient to one gradient per input. Broadcast reduction of
gradients is handled by the tape, so closures may return broadcast-shaped
arrays.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, DataError, ShapeError
from .tensor import Tensor, as_tensor, make_result

ACTIVATIONS = ("sigmoid", "tanh", "relu", "softmax")


def _pair(a, b) -> tuple[Tensor, Tensor]:
    """Promote python scalars/arrays to tensors matching the other operand's dtype."""
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = as_tensor(b, dtype=a.dtype)
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = as_tensor(a, dtype=b.dtype)
    else:
        a, b = as_tensor(a), as_tensor(b)
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"shapes {a.shape} and {b.shape} are not broadcast-compatible") from None
    return a, b


# -- elementwise arithmetic ----------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    ad, bd = a.data, b.data
    return make_result(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def div(a, b) -> Tensor:
    a, b = _pair(a, b)
    ad, bd = a.data, b.data
    out = ad / bd

    def backward(g):
        ga = g / bd
        return ga, -ga * out

    return make_result(out, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    a = as_tensor(a)
    return make_result(-a.data, (a,), lambda g: (-g,))


def power(a: Tensor, exponent: float) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    p = float(exponent)
    out = ad ** p
    return make_result(out, (a,), lambda g: (g * p * ad ** (p - 1.0),))


def square(a: Tensor) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return make_result(ad * ad, (a,), lambda g: (2.0 * g * ad,))


def sqrt(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return make_result(out, (a,), lambda g: (g / (2.0 * out),))


def exp(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_result(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return make_result(np.log(ad), (a,), lambda g: (g / ad,))


# -- reductions and reshaping --------------------------------------------------

def _axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    axes = _axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)
    shape = a.shape

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, shape),)

    return make_result(np.asarray(out), (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _axes(axis, a.ndim)
    count = math.prod(a.shape[ax] for ax in axes)
    out = a.data.mean(axis=axes, keepdims=keepdims)
    shape = a.shape

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, shape),)

    return make_result(np.asarray(out), (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"cannot reshape {old} into {tuple(shape)}") from None
    return make_result(out, (a,), lambda g: (g.reshape(old),))


def transpose(a: Tensor, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return make_result(np.ascontiguousarray(a.data.transpose(axes)), (a,),
                       lambda g: (g.transpose(inverse),))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul needs [n,k] @ [k,m], got {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        g = np.ascontiguousarray(g)
        return g @ bd.T, ad.T @ g

    return make_result(ad @ bd, (a, b), backward)


# -- activations ---------------------------------------------------------------

def sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    x = a.data
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return make_result(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return make_result(out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return make_result(np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result(out, (a,), backward)


def activation(x: Tensor, kind: str) -> Tensor:
    """Apply a gate nonlinearity; ``softmax`` competes over the channel axis of [B, C]."""
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return tanh(x)
    if kind == "relu":
        return relu(x)
    if kind == "softmax":
        if x.ndim != 2:
            raise ShapeError(f"softmax over channels expects [B, C], got {x.shape}")
        return softmax(x, axis=1)
    raise ConfigError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


# -- layers ----------------------------------------------------------------------

def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map ``x @ weight.T + bias`` for x: [B, N], weight: [M, N]."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    parents: tuple[Tensor, ...] = (x, weight)
    if bias is not None:
        if bias.shape != (weight.shape[0],):
            raise ShapeError(f"linear: bias {bias.shape} does not match weight {weight.shape}")
        out = out + bias.data
        parents = (x, weight, bias)

    def backward(g):
        g = np.ascontiguousarray(g)
        grads = [g @ wd, g.T @ xd]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    return make_result(out, parents, backward)


def avgpool_channel(x: Tensor) -> Tensor:
    """Mean over the spatial extent of each (instance, channel): [B,C,H,W] -> [B,C]."""
    if x.ndim != 4:
        raise ShapeError(f"avgpool_channel expects [B,C,H,W], got {x.shape}")
    if x.shape[2] < 1 or x.shape[3] < 1:
        raise ShapeError(f"avgpool_channel needs H, W >= 1, got {x.shape}")
    return mean(x, axis=(2, 3))


def _check_conv(x: Tensor, weight: Tensor, stride: int, padding: int) -> None:
    if not isinstance(stride, (int, np.integer)) or stride < 1:
        raise ConfigError(f"conv2d stride must be a positive integer, got {stride!r}")
    if not isinstance(padding, (int, np.integer)) or padding < 0:
        raise ConfigError(f"conv2d padding must be a non-negative integer, got {padding!r}")
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and weight, got {x.shape}, {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv2d: input has {x.shape[1]} channels, weight expects {weight.shape[1]}")
    kh, kw = weight.shape[2:]
    if kh > x.shape[2] + 2 * padding or kw > x.shape[3] + 2 * padding:
        raise ConfigError(f"kernel {kh}x{kw} larger than padded input {x.shape[2:]} (pad {padding})")


def conv2d(x: Tensor, weight: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation via im2col and a single matrix product."""
    _check_conv(x, weight, stride, padding)
    B, C, H, W = x.shape
    K, _, kh, kw = weight.shape
    s, p = int(stride), int(padding)
    Ho = (H + 2 * p - kh) // s + 1
    Wo = (W + 2 * p - kw) // s + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.data
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, : s * (Ho - 1) + 1 : s, : s * (Wo - 1) + 1 : s]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * Ho * Wo, C * kh * kw)
    wmat = weight.data.reshape(K, C * kh * kw)
    out = (cols @ wmat.T).reshape(B, Ho, Wo, K).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)
    padded_shape = xp.shape

    def backward(g):
        # channel-major gradient: [K, B*Ho*Wo]
        gk = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(K, B * Ho * Wo)
        gw = (gk @ cols).reshape(weight.shape)
        gx = None
        if x.requires_grad:
            dcols = (wmat.T @ gk).reshape(C, kh, kw, B, Ho, Wo)
            gxp = np.zeros((C, B) + padded_shape[2:], dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i : i + s * (Ho - 1) + 1 : s, j : j + s * (Wo - 1) + 1 : s] += dcols[:, i, j]
            gx = gxp.transpose(1, 0, 2, 3)
            if p:
                gx = gx[:, :, p : p + H, p : p + W]
            gx = np.ascontiguousarray(gx)
        return gx, gw

    return make_result(out, (x, weight), backward)


def normalize(x: Tensor, axes: tuple[int, ...], eps: float):
    """Standardize ``x`` over ``axes`` with biased variance.

    Returns ``(xhat, mean, var)`` where ``mean`` and ``var`` are plain arrays
    with kept dimensions. The gradient accounts for the dependence of the
    statistics on ``x``.
    """
    xd = x.data
    mu = xd.mean(axis=axes, keepdims=True)
    centered = xd - mu
    var = (centered * centered).mean(axis=axes, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std

    def backward(g):
        g_mean = g.mean(axis=axes, keepdims=True)
        gx_mean = (g * xhat).mean(axis=axes, keepdims=True)
        return (inv_std * (g - g_mean - xhat * gx_mean),)

    return make_result(xhat, (x,), backward), mu, var


def cross_entropy(logits: Tensor, labels, mask=None) -> Tensor:
    """Mean softmax cross-entropy over the samples selected by ``mask``.

    ``labels`` are integer class ids; entries where ``mask`` is false are
    ignored and may hold any sentinel value.
    """
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects [B, K] logits, got {logits.shape}")
    labels = np.asarray(labels)
    B, K = logits.shape
    if labels.shape != (B,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch {B}")
    active = np.ones(B, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    n_active = int(active.sum())
    if n_active == 0:
        raise DataError("cross_entropy: no sample is active in the loss mask")
    used = labels[active]
    if not np.issubdtype(used.dtype, np.integer) or used.min() < 0 or used.max() >= K:
        raise DataError(f"labels must be integers in [0, {K}), got range "
                        f"[{used.min()}, {used.max()}]")
    z = logits.data
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsum
    safe = np.where(active, labels, 0)
    picked = logp[np.arange(B), safe]
    loss = -(picked * active).sum() / n_active
    weight = active.astype(z.dtype) / n_active

    def backward(g):
        grad = np.exp(logp)
        grad[np.arange(B), safe] -= 1.0
        return (grad * weight[:, None] * g,)

    return make_result(np.asarray(loss, dtype=z.dtype), (logits,), backward)
