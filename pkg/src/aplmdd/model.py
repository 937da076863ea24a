"""Acoustic, phonetic and linguistic encoders with an attention decoder.

Utterances are processed as right-padded batches. Every layer that mixes
frames (convolution, batch norm, LSTM, attention) is masked so padded frames
never influence valid ones; results therefore do not depend on how utterances
are grouped, except through the batch statistics of batch norm.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import numcore as nc
from .numcore.lstm import length_mask

VARIANTS = ("baseline1", "AL", "PL", "APL")
USES_ACOUSTIC = {"baseline1": True, "AL": True, "PL": False, "APL": True}
USES_PHONETIC = {"baseline1": False, "AL": False, "PL": True, "APL": True}
USES_LINGUISTIC = {"baseline1": False, "AL": True, "PL": True, "APL": True}


class ModelError(ValueError):
    pass


_BOOL_WORDS = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}


@dataclass
class AplConfig:
    variant: str = "APL"
    acoustic_dim: int = 81
    phonetic_dim: int = 41
    n_classes: int = 69
    n_conv: int = 2
    conv_channels: int = 32
    conv_kernel: int = 3
    conv_stride: int = 2
    conv_pad: int = 1
    rnn_hidden: int = 128
    n_rnn_acoustic: int = 4
    n_rnn_phonetic: int = 1
    embed_dim: int = 64
    ling_hidden: int = 128
    dropout: float = 0.2
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 0
    lr: float = 1e-3
    optimizer: str = "adaptive-moments"
    clip_norm: float = 5.0
    beam_width: int = 10
    cmvn: bool = True
    dtype: str = "float32"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ModelError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.dtype not in ("float32", "float64"):
            raise ModelError("dtype must be float32 or float64")

    @property
    def query_dim(self) -> int:
        width = 2 * self.rnn_hidden
        return 2 * width if self.variant == "APL" else width

    @property
    def key_dim(self) -> int:
        return self.query_dim

    def out_frames(self, T: int) -> int:
        for _ in range(self.n_conv):
            T = nc.conv_out_size(T, self.conv_kernel, self.conv_stride, self.conv_pad)
        return T

    def out_bins(self, F: int) -> int:
        return self.out_frames(F)

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in dataclasses.fields(self))

    @classmethod
    def from_mapping(cls, values: dict) -> "AplConfig":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - set(types))
        if unknown:
            raise ModelError(f"unknown config keys: {', '.join(unknown)}")
        kw = {}
        for key, raw in values.items():
            kind = types[key]
            if kind in ("bool", bool):
                word = str(raw).lower()
                if not isinstance(raw, bool) and word not in _BOOL_WORDS:
                    raise ModelError(f"{key}: expected a boolean, got {raw!r}")
                kw[key] = raw if isinstance(raw, bool) else _BOOL_WORDS[word]
            elif kind in ("int", int):
                kw[key] = int(raw)
            elif kind in ("float", float):
                kw[key] = float(raw)
            else:
                kw[key] = str(raw)
        return cls(**kw)


def read_kv(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ModelError(f"config line {lineno}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# --- batches --------------------------------------------------------------------------

@dataclass
class Batch:
    ids: list
    lengths: np.ndarray
    feats: np.ndarray | None
    emb: np.ndarray | None
    canon: np.ndarray | None
    canon_lengths: np.ndarray | None
    targets: list = field(default_factory=list)


def _cmvn_valid(x):
    mu = x.mean(axis=0)
    var = x.var(axis=0)
    return (x - mu) / np.sqrt(np.maximum(var, 1e-8))


def make_batch(cfg: AplConfig, feats: Sequence, embs: Sequence, canon: Sequence[Sequence[int]],
               targets: Sequence[Sequence[int]] | None = None, ids: Sequence[str] | None = None) -> Batch:
    """Pad per-utterance inputs; unused streams for the variant are dropped."""
    dtype = np.dtype(cfg.dtype)
    B = len(canon)
    need_a, need_p = USES_ACOUSTIC[cfg.variant], USES_PHONETIC[cfg.variant]
    lengths = []
    for b in range(B):
        fa = feats[b] if feats is not None else None
        fp = embs[b] if embs is not None else None
        if need_a and fa is None:
            raise ModelError(f"variant {cfg.variant} requires acoustic features")
        if need_p and fp is None:
            raise ModelError(f"variant {cfg.variant} requires phonetic embeddings")
        if need_a and need_p and len(fa) != len(fp):
            raise ModelError(f"utterance {b}: {len(fa)} acoustic frames but {len(fp)} embedding frames")
        T = len(fa) if need_a else len(fp)
        if T < 4:
            raise ModelError(f"utterance {b}: {T} frames is too short (need >= 4)")
        lengths.append(T)
    Tmax = max(lengths) if lengths else 0

    def pad(stream, dim, normalize):
        out = np.zeros((B, Tmax, dim), dtype=dtype)
        for b, m in enumerate(stream):
            m = np.asarray(m, dtype=np.float64)
            if m.shape[1] != dim:
                raise ModelError(f"utterance {b}: expected {dim} columns, got {m.shape[1]}")
            out[b, :len(m)] = _cmvn_valid(m) if normalize else m
        return out

    fa = pad(feats, cfg.acoustic_dim, cfg.cmvn) if need_a else None
    fp = pad(embs, cfg.phonetic_dim, False) if need_p else None
    cids = clen = None
    if USES_LINGUISTIC[cfg.variant]:
        clen = np.array([len(s) for s in canon])
        if np.any(clen < 1):
            raise ModelError("canonical sequences must be non-empty")
        cids = np.zeros((B, clen.max()), dtype=np.int64)
        for b, s in enumerate(canon):
            cids[b, :len(s)] = s
    return Batch(list(ids) if ids is not None else [str(i) for i in range(B)], np.array(lengths),
                 fa, fp, cids, clen, [list(t) for t in targets] if targets is not None else [])


# --- model ----------------------------------------------------------------------------------

class AplModel:
    def __init__(self, cfg: AplConfig, init: bool = True):
        self.cfg = cfg
        self.dtype = np.dtype(cfg.dtype)
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, dict] = {}
        self.calls = 0
        if init:
            self._init(np.random.default_rng(cfg.seed))

    # parameter layout ---------------------------------------------------------------

    def _add(self, name, arr):
        self.params[name] = np.asarray(arr, dtype=self.dtype)

    def _add_bn(self, name, C):
        self._add(f"{name}/gamma", np.ones(C))
        self._add(f"{name}/beta", np.zeros(C))
        self.buffers[name] = {"mean": np.zeros(C, dtype=self.dtype), "var": np.ones(C, dtype=self.dtype)}

    def _add_lstm(self, name, D, H, rng):
        k = 1 / math.sqrt(H)
        for d in ("fwd", "bwd"):
            self._add(f"{name}/{d}/wx", rng.uniform(-k, k, (D, 4 * H)))
            self._add(f"{name}/{d}/wh", rng.uniform(-k, k, (H, 4 * H)))
            b = np.zeros(4 * H)
            b[H:2 * H] = 1.0  # forget gate
            self._add(f"{name}/{d}/b", b)

    def _add_linear(self, name, din, dout, rng):
        k = math.sqrt(6 / (din + dout))
        self._add(f"{name}/w", rng.uniform(-k, k, (din, dout)))
        self._add(f"{name}/b", np.zeros(dout))

    def _add_encoder(self, prefix, in_dim, n_rnn, rng):
        c = self.cfg
        ch_in, F = 1, in_dim
        for k in range(c.n_conv):
            fan = ch_in * c.conv_kernel ** 2
            self._add(f"{prefix}/conv{k}/w", rng.normal(0, math.sqrt(2 / fan),
                                                        (c.conv_channels, ch_in, c.conv_kernel, c.conv_kernel)))
            self._add(f"{prefix}/conv{k}/b", np.zeros(c.conv_channels))
            self._add_bn(f"{prefix}/conv{k}/bn", c.conv_channels)
            ch_in = c.conv_channels
            F = nc.conv_out_size(F, c.conv_kernel, c.conv_stride, c.conv_pad)
        D = ch_in * F
        for r in range(n_rnn):
            self._add_lstm(f"{prefix}/rnn{r}/lstm", D, c.rnn_hidden, rng)
            self._add_bn(f"{prefix}/rnn{r}/bn", 2 * c.rnn_hidden)
            D = 2 * c.rnn_hidden

    def _init(self, rng):
        c = self.cfg
        if USES_ACOUSTIC[c.variant]:
            self._add_encoder("ea", c.acoustic_dim, c.n_rnn_acoustic, rng)
        if USES_PHONETIC[c.variant]:
            self._add_encoder("ep", c.phonetic_dim, c.n_rnn_phonetic, rng)
        if USES_LINGUISTIC[c.variant]:
            self._add("el/embed", rng.normal(0, 1, (c.n_classes, c.embed_dim)))
            self._add_lstm("el/lstm", c.embed_dim, c.ling_hidden, rng)
            self._add_linear("el/key", 2 * c.ling_hidden, c.key_dim, rng)
            self._add_linear("el/value", 2 * c.ling_hidden, c.key_dim, rng)
            self._add_linear("out", c.key_dim + c.query_dim, c.n_classes, rng)
        else:
            self._add_linear("out", c.query_dim, c.n_classes, rng)

    # pieces ----------------------------------------------------------------------------------

    def _lstm(self, name):
        p = self.params
        return ((p[f"{name}/fwd/wx"], p[f"{name}/fwd/wh"], p[f"{name}/fwd/b"]),
                (p[f"{name}/bwd/wx"], p[f"{name}/bwd/wh"], p[f"{name}/bwd/b"]))

    def _dropout(self, x, train, rng):
        return nc.dropout_forward(x, self.cfg.dropout, rng, train)

    def encode(self, prefix, x, lengths, n_rnn, train, rng):
        """Conv stacks then BiLSTM stacks. ``x`` is ``(B, T, F)``; returns
        ``(H, out_lengths, cache)`` with ``H`` of shape ``(B, T', 2*hidden)``."""
        c, p = self.cfg, self.params
        tape = []
        h = x.transpose(0, 2, 1)[:, None]  # (B, 1, F, T)
        L = np.asarray(lengths)
        for k in range(c.n_conv):
            name = f"{prefix}/conv{k}"
            h, cc = nc.conv2d_forward(h, p[f"{name}/w"], p[f"{name}/b"],
                                      (c.conv_stride, c.conv_stride), (c.conv_pad, c.conv_pad))
            L = np.array([nc.conv_out_size(int(n), c.conv_kernel, c.conv_stride, c.conv_pad) for n in L])
            mask = length_mask(L, h.shape[3], self.dtype)[:, None, :]  # (B, 1, T')
            hl = h.transpose(0, 2, 3, 1)  # channel last
            hl, cb = nc.batchnorm_forward(hl, p[f"{name}/bn/gamma"], p[f"{name}/bn/beta"],
                                          self.buffers[f"{name}/bn"], train, mask, c.bn_momentum, c.bn_eps)
            hl, cr = nc.relu_forward(hl)
            hl, cd = self._dropout(hl, train, rng)
            h = hl.transpose(0, 3, 1, 2)
            tape.append((cc, cb, cr, cd))
        B, Ch, F, T = h.shape
        h = h.transpose(0, 3, 1, 2).reshape(B, T, Ch * F)
        mask = length_mask(L, T, self.dtype)
        rtape = []
        for r in range(n_rnn):
            name = f"{prefix}/rnn{r}"
            h, cl = nc.bilstm_forward(h, *self._lstm(f"{name}/lstm"), lengths=L)
            h, cb = nc.batchnorm_forward(h, p[f"{name}/bn/gamma"], p[f"{name}/bn/beta"],
                                         self.buffers[f"{name}/bn"], train, mask, c.bn_momentum, c.bn_eps)
            h, cd = self._dropout(h, train, rng)
            rtape.append((cl, cb, cd))
        return h, L, (tape, rtape, (B, Ch, F, T))

    def encode_backward(self, prefix, dh, cache, grads):
        tape, rtape, (B, Ch, F, T) = cache
        for r in reversed(range(len(rtape))):
            name = f"{prefix}/rnn{r}"
            cl, cb, cd = rtape[r]
            dh = nc.dropout_backward(dh, cd)
            dh, dg, dbt = nc.batchnorm_backward(dh, cb)
            _acc(grads, f"{name}/bn/gamma", dg)
            _acc(grads, f"{name}/bn/beta", dbt)
            dh, gf, gb = nc.bilstm_backward(dh, cl)
            for d, g in (("fwd", gf), ("bwd", gb)):
                for part, v in zip(("wx", "wh", "b"), g):
                    _acc(grads, f"{name}/lstm/{d}/{part}", v)
        dh = dh.reshape(B, T, Ch, F).transpose(0, 2, 3, 1)
        for k in reversed(range(len(tape))):
            name = f"{prefix}/conv{k}"
            cc, cb, cr, cd = tape[k]
            dl = dh.transpose(0, 2, 3, 1)
            dl = nc.dropout_backward(dl, cd)
            dl = nc.relu_backward(dl, cr)
            dl, dg, dbt = nc.batchnorm_backward(dl, cb)
            _acc(grads, f"{name}/bn/gamma", dg)
            _acc(grads, f"{name}/bn/beta", dbt)
            dh, dw, db = nc.conv2d_backward(dl.transpose(0, 3, 1, 2), cc)
            _acc(grads, f"{name}/w", dw)
            _acc(grads, f"{name}/b", db)
        return dh[:, 0].transpose(0, 2, 1)

    def encode_acoustic(self, X, lengths, train=False, rng=None):
        return self.encode("ea", X, lengths, self.cfg.n_rnn_acoustic, train, rng)

    def encode_phonetic(self, P, lengths, train=False, rng=None):
        return self.encode("ep", P, lengths, self.cfg.n_rnn_phonetic, train, rng)

    def encode_linguistic(self, ids, lengths):
        """Embedding -> BiLSTM -> separate key and value heads."""
        p = self.params
        e, ce = nc.embedding_forward(ids, p["el/embed"])
        h, cl = nc.bilstm_forward(e, *self._lstm("el/lstm"), lengths=lengths)
        hk, ck = nc.linear_forward(h, p["el/key/w"], p["el/key/b"])
        hv, cv = nc.linear_forward(h, p["el/value/w"], p["el/value/b"])
        return hk, hv, (ce, cl, ck, cv)

    def encode_linguistic_backward(self, dk, dv, cache, grads):
        ce, cl, ck, cv = cache
        dh1, dw, db = nc.linear_backward(dk, ck)
        _acc(grads, "el/key/w", dw)
        _acc(grads, "el/key/b", db)
        dh2, dw, db = nc.linear_backward(dv, cv)
        _acc(grads, "el/value/w", dw)
        _acc(grads, "el/value/b", db)
        de, gf, gb = nc.bilstm_backward(dh1 + dh2, cl)
        for d, g in (("fwd", gf), ("bwd", gb)):
            for part, v in zip(("wx", "wh", "b"), g):
                _acc(grads, f"el/lstm/{d}/{part}", v)
        _acc(grads, "el/embed", nc.embedding_backward(de, ce))

    def decode(self, Ha, Hp, HK, HV, key_lengths=None):
        """Attention over linguistic keys, then the output layer.

        Returns ``(log_probs, alpha, cache)``; ``alpha`` is ``None`` for the
        attention-free baseline.
        """
        c, p = self.cfg, self.params
        if c.variant == "APL":
            q, cq = nc.concat_forward([Ha, Hp])
        else:
            q, cq = (Hp if c.variant == "PL" else Ha), None
        if q.shape[-1] != c.query_dim:
            raise ModelError(f"query width {q.shape[-1]} != {c.query_dim}")
        if c.variant == "baseline1":
            z, cz = nc.linear_forward(q, p["out/w"], p["out/b"])
            y, cy = nc.log_softmax_forward(z)
            return y, None, (cq, None, cz, cy, q)
        if HK.shape[-1] != q.shape[-1]:
            raise ModelError(f"key width {HK.shape[-1]} != query width {q.shape[-1]}")
        scores = q @ HK.transpose(0, 2, 1)  # (B, T', N), unscaled
        kmask = None
        if key_lengths is not None:
            kmask = length_mask(key_lengths, HK.shape[1], bool)[:, None, :]
        alpha, ca = nc.softmax_forward(scores, axis=-1, mask=kmask)
        ctx = alpha @ HV
        u, cu = nc.concat_forward([ctx, q])
        z, cz = nc.linear_forward(u, p["out/w"], p["out/b"])
        y, cy = nc.log_softmax_forward(z)
        return y, alpha, (cq, (q, HK, HV, alpha, ca, cu), cz, cy, q)

    def decode_backward(self, dy, cache, grads):
        cq, att, cz, cy, q = cache
        dz = nc.log_softmax_backward(dy, cy)
        du, dw, db = nc.linear_backward(dz, cz)
        _acc(grads, "out/w", dw)
        _acc(grads, "out/b", db)
        dK = dV = None
        if att is None:
            dq = du
        else:
            q, HK, HV, alpha, ca, cu = att
            dctx, dq = nc.concat_backward(du, cu)
            dalpha = dctx @ HV.transpose(0, 2, 1)
            dV = alpha.transpose(0, 2, 1) @ dctx
            dscores = nc.softmax_backward(dalpha, ca)
            dq = dq + dscores @ HK
            dK = dscores.transpose(0, 2, 1) @ q
        if cq is not None:
            dHa, dHp = nc.concat_backward(dq, cq)
        elif self.cfg.variant == "PL":
            dHa, dHp = None, dq
        else:
            dHa, dHp = dq, None
        return dHa, dHp, dK, dV

    # whole model -------------------------------------------------------------------------------

    def forward(self, batch: Batch, train: bool = False):
        """Returns ``(log_probs (B, T', C), out_lengths, alpha, cache)``."""
        c = self.cfg
        rng = None
        if train:
            rng = np.random.default_rng([c.seed, self.calls])
            self.calls += 1
        Ha = Hp = HK = HV = None
        ca = cp = cl = None
        L = None
        if USES_ACOUSTIC[c.variant]:
            Ha, L, ca = self.encode_acoustic(batch.feats, batch.lengths, train, rng)
        if USES_PHONETIC[c.variant]:
            Hp, Lp, cp = self.encode_phonetic(batch.emb, batch.lengths, train, rng)
            if L is not None and not np.array_equal(L, Lp):
                raise ModelError("acoustic and phonetic encoders disagree on output length")
            L = Lp
        if USES_LINGUISTIC[c.variant]:
            HK, HV, cl = self.encode_linguistic(batch.canon, batch.canon_lengths)
        y, alpha, cd = self.decode(Ha, Hp, HK, HV, batch.canon_lengths)
        return y, L, alpha, (ca, cp, cl, cd)

    def backward(self, dy, cache) -> dict:
        ca, cp, cl, cd = cache
        grads: dict = {}
        dHa, dHp, dK, dV = self.decode_backward(dy, cd, grads)
        if cl is not None:
            self.encode_linguistic_backward(dK, dV, cl, grads)
        if cp is not None:
            self.encode_backward("ep", dHp, cp, grads)
        if ca is not None:
            self.encode_backward("ea", dHa, ca, grads)
        return grads

    # persistence -------------------------------------------------------------------------------

    def state_arrays(self) -> dict:
        out = {f"param/{k}": v for k, v in self.params.items()}
        for name, st in self.buffers.items():
            out[f"buf/{name}/mean"] = st["mean"]
            out[f"buf/{name}/var"] = st["var"]
        return out

    def load_state_arrays(self, arrays: dict) -> None:
        for k in list(self.params):
            key = f"param/{k}"
            if key not in arrays:
                raise ModelError(f"checkpoint lacks parameter {k}")
            if arrays[key].shape != self.params[k].shape:
                raise ModelError(f"{k}: checkpoint shape {arrays[key].shape} != model {self.params[k].shape}")
            self.params[k] = arrays[key].astype(self.dtype)
        for name in self.buffers:
            missing = [k for k in (f"buf/{name}/mean", f"buf/{name}/var") if k not in arrays]
            if missing:
                raise ModelError(f"checkpoint lacks batch-norm statistics {missing}")
            self.buffers[name] = {s: arrays[f"buf/{name}/{s}"].astype(self.dtype) for s in ("mean", "var")}

    def copy_state(self):
        return ({k: v.copy() for k, v in self.params.items()},
                {k: {s: a.copy() for s, a in v.items()} for k, v in self.buffers.items()})

    def restore_state(self, state) -> None:
        params, buffers = state
        self.params = {k: v.copy() for k, v in params.items()}
        self.buffers = {k: {s: a.copy() for s, a in v.items()} for k, v in buffers.items()}


def _acc(grads, name, g):
    if name in grads:
        grads[name] = grads[name] + g
    else:
        grads[name] = g
