"""Uni- and bi-directional LSTM over right-padded batches.

Gate order in the stacked weights is input, forget, cell candidate, output.
Initial hidden and cell states are zero. Outputs past each sequence's length
are zero, and the reverse direction starts at each sequence's own last frame.
"""
from __future__ import annotations

import numpy as np

from .layers import ShapeError


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def length_mask(lengths, T, dtype=np.float64):
    return (np.arange(T)[None, :] < np.asarray(lengths)[:, None]).astype(dtype)


def reverse_index(lengths, T):
    """Per-row permutation reversing the first ``length`` frames in place."""
    t = np.arange(T)[None, :]
    L = np.asarray(lengths)[:, None]
    return np.where(t < L, L - 1 - t, t)


def _gather_time(x, idx):
    return np.take_along_axis(x, idx[:, :, None], axis=1)


def lstm_forward(x, wx, wh, b, lengths=None):
    B, T, D = x.shape
    H = wh.shape[0]
    if wx.shape != (D, 4 * H) or wh.shape != (H, 4 * H) or b.shape != (4 * H,):
        raise ShapeError(f"lstm: input dim {D} / hidden {H} incompatible with "
                         f"wx {wx.shape}, wh {wh.shape}, b {b.shape}")
    if T < 1:
        raise ShapeError("lstm: empty sequence")
    xw = x @ wx + b
    h = np.zeros((B, H), dtype=x.dtype)
    c = np.zeros((B, H), dtype=x.dtype)
    hs = np.empty((B, T, H), dtype=x.dtype)
    gates = np.empty((B, T, 4 * H), dtype=x.dtype)
    cs = np.empty((B, T, H), dtype=x.dtype)
    for t in range(T):
        z = xw[:, t] + h @ wh
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = sigmoid(z[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[:, t, :H], gates[:, t, H:2 * H], gates[:, t, 2 * H:3 * H], gates[:, t, 3 * H:] = i, f, g, o
        cs[:, t] = c
        hs[:, t] = h
    mask = length_mask(lengths if lengths is not None else [T] * B, T, x.dtype)
    return hs * mask[:, :, None], (x, wx, wh, hs, cs, gates, mask)


def lstm_backward(dy, cache):
    x, wx, wh, hs, cs, gates, mask = cache
    B, T, _ = x.shape
    H = wh.shape[0]
    dh_out = dy * mask[:, :, None]
    dz = np.empty_like(gates)
    dh = np.zeros((B, H), dtype=dy.dtype)
    dc = np.zeros((B, H), dtype=dy.dtype)
    for t in reversed(range(T)):
        i, f, g, o = (gates[:, t, k * H:(k + 1) * H] for k in range(4))
        tc = np.tanh(cs[:, t])
        dh = dh + dh_out[:, t]
        do = dh * tc
        dc = dc + dh * o * (1 - tc * tc)
        c_prev = cs[:, t - 1] if t > 0 else np.zeros_like(dc)
        df = dc * c_prev
        di = dc * g
        dg = dc * i
        dz[:, t, :H] = di * i * (1 - i)
        dz[:, t, H:2 * H] = df * f * (1 - f)
        dz[:, t, 2 * H:3 * H] = dg * (1 - g * g)
        dz[:, t, 3 * H:] = do * o * (1 - o)
        dc = dc * f
        dh = dz[:, t] @ wh.T
    h_prev = np.concatenate([np.zeros((B, 1, H), dtype=hs.dtype), hs[:, :-1]], axis=1)
    dz2 = dz.reshape(-1, 4 * H)
    dwx = x.reshape(-1, x.shape[-1]).T @ dz2
    dwh = h_prev.reshape(-1, H).T @ dz2
    db = dz2.sum(axis=0)
    dx = dz @ wx.T
    return dx, dwx, dwh, db


def bilstm_forward(x, fwd, bwd, lengths=None):
    """``fwd``/``bwd`` are ``(wx, wh, b)`` triples; returns ``(B, T, 2H)``."""
    B, T, _ = x.shape
    lengths = np.full(B, T) if lengths is None else np.asarray(lengths)
    if np.any(lengths < 1) or np.any(lengths > T):
        raise ShapeError("bilstm: lengths must lie in [1, T]")
    idx = reverse_index(lengths, T)
    yf, cf = lstm_forward(x, *fwd, lengths=lengths)
    yr, cr = lstm_forward(_gather_time(x, idx), *bwd, lengths=lengths)
    yb = _gather_time(yr, idx)
    return np.concatenate([yf, yb], axis=-1), (cf, cr, idx, yf.shape[-1])


def bilstm_backward(dy, cache):
    cf, cr, idx, H = cache
    dxf, *gf = lstm_backward(dy[..., :H], cf)
    dxr, *gr = lstm_backward(_gather_time(dy[..., H:], idx), cr)
    dx = dxf + _gather_time(dxr, idx)
    return dx, tuple(gf), tuple(gr)
