"""Connectionist temporal classification: loss, oracle and decoders."""
from __future__ import annotations

import functools
import itertools
import math
from collections import defaultdict
from typing import Sequence

import numpy as np

NEG_INF = -np.inf


class CTCError(ValueError):
    pass


def logsumexp(a, axis=None):
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else float(out.reshape(()))


def _lse2(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    m = max(a, b)
    return m + math.log(math.exp(a - m) + math.exp(b - m))


def required_frames(labels: Sequence[int]) -> int:
    """Minimum input length for a label sequence: one frame per label plus a
    blank between each pair of equal neighbours."""
    labels = list(labels)
    return len(labels) + sum(1 for a, b in zip(labels, labels[1:]) if a == b)


def _extend(labels, blank):
    ext = np.full(2 * len(labels) + 1, blank, dtype=np.int64)
    ext[1::2] = labels
    return ext


def _check(log_probs, labels, blank):
    lp = np.asarray(log_probs, dtype=np.float64)
    if lp.ndim != 2 or lp.shape[1] < 2:
        raise CTCError(f"log_probs must be T x C with C >= 2, got {lp.shape}")
    labels = [int(x) for x in labels]
    C = lp.shape[1]
    if not 0 <= blank < C:
        raise CTCError(f"blank id {blank} out of range")
    for x in labels:
        if x == blank or not 0 <= x < C:
            raise CTCError(f"invalid label id {x}")
    need = required_frames(labels)
    if lp.shape[0] < need:
        raise CTCError(f"target longer than input: {need} frames needed, {lp.shape[0]} given")
    return lp, labels


def forward_backward(log_probs, labels, blank):
    """Log-domain alpha and beta lattices over the blank-extended labels.

    Both include the emission at their own frame, so
    ``alpha[t, s] + beta[t, s] - log_probs[t, ext[s]]`` is the log mass of
    paths through state ``s`` at frame ``t``.
    """
    lp, labels = _check(log_probs, labels, blank)
    T = lp.shape[0]
    ext = _extend(labels, blank)
    S = len(ext)
    emit = lp[:, ext]
    # a state may skip its predecessor when it is a label different from s-2
    skip = np.zeros(S, dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        step = np.full(S, NEG_INF)
        step[1:] = prev[:-1]
        jump = np.full(S, NEG_INF)
        jump[2:] = prev[:-2]
        jump[~skip] = NEG_INF
        alpha[t] = np.logaddexp(np.logaddexp(prev, step), jump) + emit[t]

    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = emit[T - 1, S - 1]
    if S > 1:
        beta[T - 1, S - 2] = emit[T - 1, S - 2]
    skip_from = np.zeros(S, dtype=bool)
    skip_from[:-2] = skip[2:]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        step = np.full(S, NEG_INF)
        step[:-1] = nxt[1:]
        jump = np.full(S, NEG_INF)
        jump[:-2] = nxt[2:]
        jump[~skip_from] = NEG_INF
        beta[t] = np.logaddexp(np.logaddexp(nxt, step), jump) + emit[t]
    return alpha, beta, ext


def log_likelihoods(log_probs, labels, blank):
    """``log P(labels)`` computed from the forward and from the backward pass."""
    alpha, beta, ext = forward_backward(log_probs, labels, blank)
    S = len(ext)
    fwd = logsumexp(alpha[-1, max(S - 2, 0):])
    bwd = logsumexp(beta[0, :min(2, S)])
    return fwd, bwd


def ctc_loss(log_probs, labels, blank: int):
    """Negative log-likelihood and its gradient w.r.t. ``log_probs``.

    The gradient treats every entry of ``log_probs`` as a free variable:
    ``d loss / d log_probs[t, k] = -occupancy[t, k]``. Chaining through a
    log-softmax yields the familiar ``softmax - occupancy`` on logits.
    """
    alpha, beta, ext = forward_backward(log_probs, labels, blank)
    lp = np.asarray(log_probs, dtype=np.float64)
    S = len(ext)
    log_p = logsumexp(alpha[-1, max(S - 2, 0):])
    if not np.isfinite(log_p):
        raise CTCError("label sequence has zero probability under the posteriors")
    T, C = lp.shape
    post = alpha + beta - lp[:, ext] - log_p
    occ = np.zeros((T, C))
    for s in range(S):
        occ[:, ext[s]] += np.exp(post[:, s])
    return -log_p, -occ


@functools.lru_cache(maxsize=32)
def _path_table(T: int, C: int, blank: int):
    """Every length-``T`` path over ``C`` symbols and its collapsed sequence."""
    paths = np.array(list(itertools.product(range(C), repeat=T)), dtype=np.int64).reshape(-1, T)
    return paths, [tuple(collapse(p, blank)) for p in paths]


def _path_probs(log_probs, guard):
    lp = np.asarray(log_probs, dtype=np.float64)
    T, C = lp.shape
    if C ** T > guard:
        raise CTCError(f"{C}^{T} paths exceed the enumeration guard {guard}")
    return lp, T, C


def ctc_brute_force(log_probs, labels, blank: int, guard: int = 10 ** 6) -> float:
    """Sum the probability of every path collapsing to ``labels``."""
    return sequence_probabilities(log_probs, blank, guard).get(tuple(int(x) for x in labels), 0.0)


def sequence_probabilities(log_probs, blank: int, guard: int = 10 ** 6) -> dict:
    """Exact probability of every label sequence, by path enumeration."""
    lp, T, C = _path_probs(log_probs, guard)
    paths, collapsed = _path_table(T, C, blank)
    probs = np.exp(lp[np.arange(T), paths].sum(axis=1))
    out: dict = defaultdict(float)
    for seq, p in zip(collapsed, probs):
        out[seq] += float(p)
    return dict(out)


def collapse(path, blank: int) -> list[int]:
    out = []
    prev = None
    for p in path:
        p = int(p)
        if p != prev and p != blank:
            out.append(p)
        prev = p
    return out


def greedy_decode(log_probs, blank: int) -> list[int]:
    return collapse(np.argmax(np.asarray(log_probs), axis=1), blank)


def beam_search(log_probs, blank: int, beam_width: int = 10) -> list[int]:
    """CTC prefix beam search without a language model.

    Each prefix carries the log mass of paths ending in blank and in its last
    label. The ``beam_width`` best prefixes survive each frame; ties rank the
    lexicographically smaller prefix first.
    """
    if beam_width < 1:
        raise CTCError("beam_width must be >= 1")
    lp = np.asarray(log_probs, dtype=np.float64)
    T, C = lp.shape
    beams: dict[tuple, list] = {(): [0.0, NEG_INF]}
    for t in range(T):
        nxt: dict[tuple, list] = defaultdict(lambda: [NEG_INF, NEG_INF])
        row = lp[t]
        for prefix, (pb, pnb) in beams.items():
            total = _lse2(pb, pnb)
            entry = nxt[prefix]
            entry[0] = _lse2(entry[0], total + row[blank])
            last = prefix[-1] if prefix else None
            if last is not None:
                entry[1] = _lse2(entry[1], pnb + row[last])
            for k in range(C):
                if k == blank:
                    continue
                ext = prefix + (k,)
                e = nxt[ext]
                # repeating the last label only extends after a blank
                src = pb if k == last else total
                e[1] = _lse2(e[1], src + row[k])
        ranked = sorted(nxt.items(), key=lambda kv: (-_lse2(*kv[1]), kv[0]))
        beams = dict(ranked[:beam_width])
    best = min(beams.items(), key=lambda kv: (-_lse2(*kv[1]), kv[0]))
    return list(best[0])
