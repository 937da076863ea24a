"""Stateless layer kernels with hand-written backward passes.

Every ``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
takes the upstream gradient and the cache. Arrays are plain ``numpy``
ndarrays; dtype follows the inputs.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


# --- linear / elementwise -----------------------------------------------------

def linear_forward(x, w, b):
    if x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(f"linear: input {x.shape} incompatible with weight {w.shape}, bias {b.shape}")
    return x @ w + b, (x, w)


def linear_backward(dy, cache):
    x, w = cache
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dy @ w.T, x2.T @ dy2, dy2.sum(axis=0)


def relu_forward(x):
    return np.maximum(x, 0), x > 0


def relu_backward(dy, cache):
    return dy * cache


def dropout_forward(x, rate: float, rng: np.random.Generator | None, train: bool):
    """Inverted dropout; identity when ``rate == 0`` or outside training."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not train or rate == 0:
        return x, None
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1 - rate)
    return x * keep, keep


def dropout_backward(dy, cache):
    return dy if cache is None else dy * cache


def _check_axis(x, axis):
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"axis {axis} out of range for {x.ndim}-d input")


def softmax_forward(x, axis=-1, mask=None):
    """Softmax along ``axis``; entries where ``mask`` is False get weight 0."""
    _check_axis(x, axis)
    if mask is not None:
        x = np.where(mask, x, -np.inf)
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / np.sum(e, axis=axis, keepdims=True)
    return y, (y, axis)


def softmax_backward(dy, cache):
    y, axis = cache
    return y * (dy - np.sum(dy * y, axis=axis, keepdims=True))


def log_softmax_forward(x, axis=-1):
    _check_axis(x, axis)
    z = x - np.max(x, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=axis, keepdims=True))
    y = z - lse
    return y, (y, axis)


def log_softmax_backward(dy, cache):
    y, axis = cache
    return dy - np.exp(y) * np.sum(dy, axis=axis, keepdims=True)


def concat_forward(parts, axis=-1):
    _check_axis(parts[0], axis)
    return np.concatenate(parts, axis=axis), ([p.shape[axis] for p in parts], axis)


def concat_backward(dy, cache):
    sizes, axis = cache
    return np.split(dy, np.cumsum(sizes)[:-1], axis=axis)


def embedding_forward(ids, table):
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError("embedding: id out of range")
    return table[ids], (ids, table.shape)


def embedding_backward(dy, cache):
    ids, shape = cache
    dtable = np.zeros(shape, dtype=dy.dtype)
    np.add.at(dtable, ids.reshape(-1), dy.reshape(-1, shape[1]))
    return dtable


# --- batch normalisation -----------------------------------------------------------

def batchnorm_forward(x, gamma, beta, state, train: bool, mask=None, momentum=0.1, eps=1e-5):
    """Normalise the last axis over all leading axes.

    ``mask`` (broadcastable to ``x.shape[:-1]``) selects the positions that
    belong to the population; masked-out outputs are zero. ``state`` holds
    ``mean``/``var`` running statistics and is updated in place in training.
    """
    C = x.shape[-1]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(f"batchnorm: {C} channels but gamma {gamma.shape}, beta {beta.shape}")
    x2 = x.reshape(-1, C)
    w = (np.ones(x2.shape[0], dtype=x.dtype) if mask is None
         else np.broadcast_to(mask, x.shape[:-1]).reshape(-1).astype(x.dtype))
    if train:
        n = w.sum()
        if n < 2:
            raise ValueError("batchnorm needs at least two elements per channel in training mode")
        mean = (w @ x2) / n
        xc = x2 - mean
        var = (w @ (xc * xc)) / n
        state["mean"] = (1 - momentum) * state["mean"] + momentum * mean
        state["var"] = (1 - momentum) * state["var"] + momentum * var * (n / (n - 1))
    else:
        mean, var = state["mean"], state["var"]
        xc = x2 - mean
        n = None
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = (xhat * gamma + beta) * w[:, None]
    return y.reshape(x.shape), (xhat, inv, gamma, w, n, x.shape, train)


def batchnorm_backward(dy, cache):
    xhat, inv, gamma, w, n, shape, train = cache
    C = shape[-1]
    dy2 = dy.reshape(-1, C) * w[:, None]
    dgamma = np.sum(dy2 * xhat, axis=0)
    dbeta = dy2.sum(axis=0)
    dxhat = dy2 * gamma
    if train:
        dx = (inv / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0))
        dx *= w[:, None]
    else:
        dx = dxhat * inv
    return dx.reshape(shape), dgamma, dbeta


# --- 2-D convolution ------------------------------------------------------------------

def conv_out_size(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def conv2d_forward(x, w, b, stride=(1, 1), pad=(0, 0)):
    """Cross-correlation of ``x (B, Cin, H, W)`` with ``w (Cout, Cin, kh, kw)``."""
    B, Cin, H, W = x.shape
    Cout, Cin2, kh, kw = w.shape
    if Cin != Cin2 or b.shape != (Cout,):
        raise ShapeError(f"conv2d: input {x.shape} incompatible with kernel {w.shape}, bias {b.shape}")
    sh, sw = stride
    ph, pw = pad
    if H + 2 * ph < kh or W + 2 * pw < kw:
        raise ShapeError(f"conv2d: input {x.shape[2:]} smaller than kernel under padding")
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    # cols: (B, Cin, Ho, Wo, kh, kw)
    y = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))  # (B, Ho, Wo, Cout)
    y = y.transpose(0, 3, 1, 2) + b[None, :, None, None]
    return np.ascontiguousarray(y), (cols, w, xp.shape, stride, pad)


def conv2d_backward(dy, cache):
    cols, w, xp_shape, (sh, sw), (ph, pw) = cache
    _, _, kh, kw = w.shape
    Ho, Wo = dy.shape[2], dy.shape[3]
    db = dy.sum(axis=(0, 2, 3))
    dw = np.tensordot(dy, cols, axes=([0, 2, 3], [0, 2, 3]))  # (Cout, Cin, kh, kw)
    dcols = np.tensordot(dy, w, axes=([1], [0]))  # (B, Ho, Wo, Cin, kh, kw)
    dxp = np.zeros(xp_shape, dtype=dy.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + sh * Ho:sh, j:j + sw * Wo:sw] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    H, W = xp_shape[2] - 2 * ph, xp_shape[3] - 2 * pw
    return dxp[:, :, ph:ph + H, pw:pw + W], dw, db
