"""Annotation parsers, speaker splits, manifests and the synthetic toy corpus."""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import phoneset
from .matio import read_matrix, write_matrix
from .phoneset import DROP, PhoneInventory

HOP_S = 0.010
ERROR_TYPES = ("none", "substitution", "deletion", "addition")
_TYPE_CODES = {"s": "substitution", "d": "deletion", "a": "addition"}


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotationSegment:
    start_s: float
    end_s: float
    canonical: str
    perceived: str
    error_type: str = "none"

    def __post_init__(self):
        if not (self.start_s >= 0 and self.end_s > self.start_s):
            raise CorpusError(f"bad segment times [{self.start_s}, {self.end_s}]")
        if self.error_type not in ERROR_TYPES:
            raise CorpusError(f"unknown error type {self.error_type!r}")
        if (self.error_type == "none") != (self.canonical == self.perceived):
            raise CorpusError(
                f"segment {self.canonical}->{self.perceived} inconsistent with type {self.error_type}")

    def as_list(self) -> list:
        return [self.start_s, self.end_s, self.canonical, self.perceived, self.error_type]


def canonical_of(segments: Iterable[AnnotationSegment]) -> list[str]:
    """Canonical phones; additions have no canonical slot."""
    return [s.canonical for s in segments if s.error_type != "addition" and s.canonical != DROP]


def perceived_of(segments: Iterable[AnnotationSegment]) -> list[str]:
    """Perceived phones; deletions are omitted, additions included."""
    return [s.perceived for s in segments if s.error_type != "deletion" and s.perceived != DROP]


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    speaker: str
    canonical: tuple[str, ...]
    perceived: tuple[str, ...]
    segments: tuple[AnnotationSegment, ...] = ()
    audio_path: str | None = field(default=None, compare=False)
    feature_path: str | None = field(default=None, compare=False)
    embedding_path: str | None = field(default=None, compare=False)
    features: np.ndarray | None = field(default=None, compare=False, repr=False)
    embedding: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "canonical", tuple(self.canonical))
        object.__setattr__(self, "perceived", tuple(self.perceived))
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.segments:
            if list(self.canonical) != canonical_of(self.segments):
                raise CorpusError(f"{self.id}: canonical sequence disagrees with segments")
            if list(self.perceived) != perceived_of(self.segments):
                raise CorpusError(f"{self.id}: perceived sequence disagrees with segments")


def record_from_segments(utt_id: str, speaker: str, segments: Sequence[AnnotationSegment],
                         drop_silence: bool = False, **kw) -> UtteranceRecord:
    if drop_silence:
        segments = [s for s in segments if not (s.canonical == "sil" and s.perceived == "sil")]
    return UtteranceRecord(utt_id, speaker, canonical_of(segments), perceived_of(segments),
                           tuple(segments), **kw)


# --- parsers -----------------------------------------------------------------

def parse_phn(text: str, sample_rate: int = 16000) -> list[AnnotationSegment]:
    """Parse a TIMIT ``.phn`` file; labels are folded and ``q`` is dropped."""
    segments = []
    prev_start = -1
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise CorpusError(f"line {lineno}: expected 'start end label', got {raw!r}")
        try:
            start, end = int(parts[0]), int(parts[1])
        except ValueError:
            raise CorpusError(f"line {lineno}: non-integer sample index in {raw!r}") from None
        if end <= start or start < 0:
            raise CorpusError(f"line {lineno}: end {end} not after start {start}")
        if start < prev_start:
            raise CorpusError(f"line {lineno}: start {start} precedes previous start {prev_start}")
        prev_start = start
        try:
            phone = phoneset.fold_timit61(parts[2])
        except phoneset.PhoneError as e:
            raise CorpusError(f"line {lineno}: {e}") from None
        if phone == DROP:
            continue
        segments.append(AnnotationSegment(start / sample_rate, end / sample_rate, phone, phone))
    return segments


_TG_TOKEN = re.compile(r'"(?:[^"]|"")*"|<exists>|<absent>|\[[^\]]*\]|[-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?')


def _tg_tokens(text: str) -> list[str]:
    # long-format TextGrids are the short format interleaved with "key =" labels
    # and "[i]" indices, so both reduce to the same value stream
    return [t for t in _TG_TOKEN.findall(text) if not t.startswith("[")]


def read_textgrid_tiers(text: str) -> dict[str, list[tuple[float, float, str]]]:
    """Return ``{tier name: [(xmin, xmax, text), ...]}`` for interval tiers."""
    toks = _tg_tokens(text.lstrip("﻿"))
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(toks):
            raise CorpusError("TextGrid truncated")
        tok = toks[pos]
        pos += 1
        return tok

    def string():
        tok = take()
        if not tok.startswith('"'):
            raise CorpusError(f"TextGrid: expected string, found {tok!r}")
        return tok[1:-1].replace('""', '"')

    def number():
        tok = take()
        try:
            return float(tok)
        except ValueError:
            raise CorpusError(f"TextGrid: expected number, found {tok!r}") from None

    if string() != "ooTextFile" or string() != "TextGrid":
        raise CorpusError("not a TextGrid file")
    number(), number()
    if take() != "<exists>":
        return {}
    tiers = {}
    for _ in range(int(number())):
        kind = string()
        name = string()
        number(), number()
        n = int(number())
        if kind != "IntervalTier":
            raise CorpusError(f"TextGrid: unsupported tier class {kind!r} (tier {name!r})")
        intervals = []
        for _ in range(n):
            lo, hi = number(), number()
            intervals.append((lo, hi, string()))
        tiers[name] = intervals
    if pos != len(toks):
        raise CorpusError("TextGrid: trailing content after last tier")
    return tiers


_STRESS = re.compile(r"(?<=[a-z])[012]$")


def _arctic_label(raw: str) -> str:
    lab = raw.strip().lower()
    if not lab:
        return DROP
    star = lab.endswith("*")
    lab = _STRESS.sub("", lab.rstrip("*")) + ("*" if star else "")
    return phoneset.fold_arctic48(lab)


def parse_textgrid(text: str, tier: str = "phones") -> list[AnnotationSegment]:
    """Parse the phone tier of an L2-ARCTIC style TextGrid.

    Interval labels are a plain phone, or ``canonical,perceived,type`` with
    type one of ``s``/``d``/``a``. Empty intervals are skipped.
    """
    tiers = read_textgrid_tiers(text)
    match = [k for k in tiers if k.lower() == tier.lower()]
    if match:
        intervals = tiers[match[0]]
    elif len(tiers) == 1:
        intervals = next(iter(tiers.values()))
    else:
        raise CorpusError(f"TextGrid has no {tier!r} tier (tiers: {sorted(tiers)})")
    segments = []
    for lo, hi, label in intervals:
        label = label.strip()
        if not label:
            continue
        try:
            if "," in label:
                parts = [p.strip() for p in label.split(",")]
                if len(parts) != 3:
                    raise CorpusError(f"malformed error triplet {label!r}")
                kind = _TYPE_CODES.get(parts[2].lower())
                if kind is None:
                    raise CorpusError(f"unknown error type code {parts[2]!r} in {label!r}")
                canon, perc = _arctic_label(parts[0]), _arctic_label(parts[1])
                if kind == "substitution" and canon == perc:
                    # folding can merge a substitution away (e.g. ao -> aa)
                    kind = "none"
            else:
                canon = perc = _arctic_label(label)
                kind = "none"
        except phoneset.PhoneError as e:
            raise CorpusError(f"interval [{lo}, {hi}]: {e}") from None
        if kind == "none" and canon == DROP:
            continue
        segments.append(AnnotationSegment(lo, hi, canon, perc, kind))
    return segments


# --- speaker splits -------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train: frozenset
    dev: frozenset = frozenset()
    test: frozenset = frozenset()

    def __post_init__(self):
        for name in ("train", "dev", "test"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if not self.train:
            raise CorpusError("train split is empty")
        for a, b in (("train", "dev"), ("train", "test"), ("dev", "test")):
            both = getattr(self, a) & getattr(self, b)
            if both:
                raise CorpusError(f"speakers in both {a} and {b}: {sorted(both)}")


L2ARCTIC_SPEAKERS = (
    "ABA", "SKA", "YBAA", "ZHAA",    # Arabic
    "BWC", "LXC", "NCC", "TXHC",     # Mandarin
    "ASI", "RRBI", "SVBI", "TNI",    # Hindi
    "HJK", "HKK", "YDCK", "YKWK",    # Korean
    "EBVS", "ERMS", "MBMPS", "NJS",  # Spanish
    "HQTV", "PNV", "THV", "TLV",     # Vietnamese
)
L2ARCTIC_DEV = frozenset({"EBVS", "THV", "TNI", "BWC", "YDCK", "YBAA"})
L2ARCTIC_TEST = frozenset({"NJS", "HQTV", "SVBI", "NCC", "YKWK", "ZHAA"})
L2ARCTIC_SPLIT = SplitSpec(
    train=frozenset(L2ARCTIC_SPEAKERS) - L2ARCTIC_DEV - L2ARCTIC_TEST,
    dev=L2ARCTIC_DEV,
    test=L2ARCTIC_TEST,
)


def split_speakers(records: Sequence[UtteranceRecord], spec: SplitSpec) -> dict[str, list[UtteranceRecord]]:
    out: dict[str, list[UtteranceRecord]] = {"train": [], "dev": [], "test": []}
    for rec in records:
        homes = [name for name in out if rec.speaker in getattr(spec, name)]
        if not homes:
            raise CorpusError(f"speaker {rec.speaker!r} (utterance {rec.id}) is in no split")
        if len(homes) > 1:
            raise CorpusError(f"speaker {rec.speaker!r} is in several splits: {homes}")
        out[homes[0]].append(rec)
    return out


# --- synthetic corpus -------------------------------------------------------------

@dataclass
class SynthConfig:
    n_utts: int = 280
    phones_per_utt: int = 8
    sub_rate: float = 0.15
    del_rate: float = 0.05
    ins_rate: float = 0.0
    frames_per_phone: int = 8
    noise_std: float = 1.0
    embed_noise_std: float = 1.0
    embed_sharpness: float = 4.0
    # share of each mispronounced phone's embedding pulled toward the canonical
    # phone, mimicking a native-speech recogniser that hears what it expects
    embed_canonical_bias: float = 0.0
    utts_per_speaker: int = 20
    feature_dim: int = 81
    inventory: str = "l2arctic-extended"

    def validate(self):
        rates = (self.sub_rate, self.del_rate, self.ins_rate)
        if any(not 0 <= r < 1 for r in rates) or self.sub_rate + self.del_rate >= 1:
            raise CorpusError(f"error rates must lie in [0, 1) and sum below 1: {rates}")
        if self.frames_per_phone < 2:
            raise CorpusError("frames_per_phone must be >= 2")
        if self.n_utts < 0 or self.phones_per_utt < 1:
            raise CorpusError("need n_utts >= 0 and phones_per_utt >= 1")
        if not 0 <= self.embed_canonical_bias <= 1:
            raise CorpusError("embed_canonical_bias must lie in [0, 1]")


def class_templates(n_classes: int, dim: int) -> np.ndarray:
    """One-hot spectral templates; the last feature column is a constant energy."""
    if n_classes > dim - 1:
        raise CorpusError(f"{n_classes} classes do not fit orthogonally in {dim - 1} dims")
    tpl = np.zeros((n_classes, dim))
    tpl[np.arange(n_classes), np.arange(n_classes)] = 1.0
    tpl[:, -1] = 1.0
    return tpl


def synth_corpus(cfg: SynthConfig, seed: int = 0, inventory: PhoneInventory | None = None) -> list[UtteranceRecord]:
    cfg.validate()
    inv = inventory or phoneset.build_inventory(cfg.inventory)
    pool = np.array(inv.standard_ids)
    if len(pool) < 2:
        raise CorpusError("inventory has fewer than two standard phones")
    rng = np.random.default_rng(seed)
    tpl = class_templates(len(inv), cfg.feature_dim)
    records = []
    for u in range(cfg.n_utts):
        canon = rng.choice(pool, cfg.phones_per_utt)
        # (canonical id | None, perceived id | None, type)
        slots = []
        for c in canon:
            r = rng.random()
            if r < cfg.del_rate:
                slots.append((c, None, "deletion"))
            elif r < cfg.del_rate + cfg.sub_rate:
                other = pool[pool != c]
                slots.append((c, rng.choice(other), "substitution"))
            else:
                slots.append((c, c, "none"))
            while rng.random() < cfg.ins_rate:
                slots.append((None, rng.choice(pool), "addition"))

        frames_f, frames_e, segments = [], [], []
        t = 0
        for c, p, kind in slots:
            start = t * HOP_S
            if p is None:
                # deleted phones render no frames; keep a nominal half-hop marker
                segments.append(AnnotationSegment(round(start, 6), round(start + HOP_S / 2, 6),
                                                  inv.classes[c], DROP, kind))
                continue
            n = cfg.frames_per_phone
            frames_f.append(tpl[p] + cfg.noise_std * rng.standard_normal((n, cfg.feature_dim)))
            logits = np.zeros((n, len(inv)))
            bias = cfg.embed_canonical_bias if kind == "substitution" else 0.0
            logits[:, p] += cfg.embed_sharpness * (1 - bias)
            if bias:
                logits[:, c] += cfg.embed_sharpness * bias
            logits[:, inv.blank_id] = -cfg.embed_sharpness
            logits += cfg.embed_noise_std * rng.standard_normal(logits.shape)
            logits -= logits.max(axis=1, keepdims=True)
            post = np.exp(logits)
            frames_e.append(post / post.sum(axis=1, keepdims=True))
            t += n
            canon_lab = DROP if c is None else inv.classes[c]
            segments.append(AnnotationSegment(round(start, 6), round(t * HOP_S, 6),
                                              canon_lab, inv.classes[p], kind))
        feats = np.concatenate(frames_f).astype(np.float32) if frames_f else np.zeros((0, cfg.feature_dim), np.float32)
        emb = np.concatenate(frames_e).astype(np.float32) if frames_e else np.zeros((0, len(inv)), np.float32)
        speaker = f"spk{u // max(cfg.utts_per_speaker, 1):03d}"
        records.append(record_from_segments(f"synth{u:05d}", speaker, segments, features=feats, embedding=emb))
    return records


def oracle_embedding(rec: UtteranceRecord, inv: PhoneInventory, n_frames: int, sharpness: float = 4.0,
                     noise_std: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Frame posteriors peaked on the annotated (perceived) phone.

    Frame ``t`` covers ``[t * HOP_S, (t + 1) * HOP_S)`` and takes the label of
    the segment containing its midpoint; uncovered frames favour blank.
    """
    if noise_std and rng is None:
        raise CorpusError("noise_std > 0 needs an rng")
    logits = np.zeros((n_frames, len(inv)))
    mids = (np.arange(n_frames) + 0.5) * HOP_S
    target = np.full(n_frames, inv.blank_id)
    for seg in rec.segments:
        if seg.perceived == DROP:
            continue
        inside = (mids >= seg.start_s) & (mids < seg.end_s)
        target[inside] = inv.encode([seg.perceived])[0]
    logits[np.arange(n_frames), target] += sharpness
    if noise_std:
        logits += noise_std * rng.standard_normal(logits.shape)
    logits -= logits.max(axis=1, keepdims=True)
    post = np.exp(logits)
    return (post / post.sum(axis=1, keepdims=True)).astype(np.float32)


def corpus_stats(records: Sequence[UtteranceRecord]) -> dict:
    counts = {k: 0 for k in ERROR_TYPES}
    for r in records:
        for s in r.segments:
            counts[s.error_type] += 1
    n_canon = sum(len(r.canonical) for r in records)
    return {
        "utterances": len(records),
        "canonical_phones": n_canon,
        "perceived_phones": sum(len(r.perceived) for r in records),
        "substitutions": counts["substitution"],
        "deletions": counts["deletion"],
        "additions": counts["addition"],
        "substitution_rate": counts["substitution"] / n_canon if n_canon else 0.0,
        "deletion_rate": counts["deletion"] / n_canon if n_canon else 0.0,
    }


# --- manifests ----------------------------------------------------------------------

def save_manifest(records: Sequence[UtteranceRecord], path: str | os.PathLike,
                  matrix_dir: str = "mats") -> None:
    """Write a JSON-lines manifest; in-memory matrices go to ``matrix_dir``.

    Paths in the manifest are relative to the manifest's directory.
    """
    path = Path(path)
    root = path.parent
    lines = []
    for rec in records:
        entry: dict = {"id": rec.id, "speaker": rec.speaker}
        if rec.features is not None and rec.feature_path is None:
            rel = f"{matrix_dir}/{rec.id}.feat"
            (root / matrix_dir).mkdir(parents=True, exist_ok=True)
            write_matrix(root / rel, rec.features)
            entry["feature_path"] = rel
        elif rec.feature_path is not None:
            entry["feature_path"] = rec.feature_path
        elif rec.audio_path is not None:
            entry["audio_path"] = rec.audio_path
        else:
            raise CorpusError(f"{rec.id}: record has neither audio nor features")
        if rec.embedding is not None and rec.embedding_path is None:
            rel = f"{matrix_dir}/{rec.id}.emb"
            (root / matrix_dir).mkdir(parents=True, exist_ok=True)
            write_matrix(root / rel, rec.embedding)
            entry["embedding_path"] = rel
        elif rec.embedding_path is not None:
            entry["embedding_path"] = rec.embedding_path
        entry["canonical"] = list(rec.canonical)
        entry["perceived"] = list(rec.perceived)
        entry["segments"] = [s.as_list() for s in rec.segments]
        lines.append(json.dumps(entry, separators=(",", ":")))
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


_REQUIRED = ("id", "speaker", "canonical", "perceived")


def load_manifest(path: str | os.PathLike, load_matrices: bool = True) -> list[UtteranceRecord]:
    path = Path(path)
    root = path.parent
    records = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        try:
            entry = json.loads(raw)
        except json.JSONDecodeError as e:
            raise CorpusError(f"{path}:{lineno}: invalid JSON ({e})") from None
        missing = [k for k in _REQUIRED if k not in entry]
        if missing:
            raise CorpusError(f"{path}:{lineno}: missing fields {missing}")
        if ("feature_path" in entry) == ("audio_path" in entry):
            raise CorpusError(f"{path}:{lineno}: exactly one of feature_path / audio_path required")
        kw = {}
        for key in ("audio_path", "feature_path", "embedding_path"):
            if entry.get(key) is None:
                continue
            full = root / entry[key]
            if not full.exists():
                raise CorpusError(f"{path}:{lineno}: referenced file not found: {full}")
            kw[key] = entry[key]
        if load_matrices:
            if "feature_path" in kw:
                kw["features"] = read_matrix(root / kw["feature_path"])
            if "embedding_path" in kw:
                kw["embedding"] = read_matrix(root / kw["embedding_path"])
        try:
            segments = tuple(AnnotationSegment(float(s[0]), float(s[1]), s[2], s[3], s[4])
                             for s in entry.get("segments", []))
            rec = UtteranceRecord(entry["id"], entry["speaker"], entry["canonical"], entry["perceived"],
                                  segments, **kw)
        except (CorpusError, IndexError, TypeError) as e:
            raise CorpusError(f"{path}:{lineno}: {e}") from None
        records.append(rec)
    return records


def with_features(rec: UtteranceRecord, features=None, embedding=None) -> UtteranceRecord:
    kw = {}
    if features is not None:
        kw["features"] = features
    if embedding is not None:
        kw["embedding"] = embedding
    return replace(rec, **kw)
