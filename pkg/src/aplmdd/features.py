"""81-dim acoustic features: 80 log-mel filter banks plus log energy."""
from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

SAMPLE_RATE = 16000


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FbankConfig:
    win_s: float = 0.025
    hop_s: float = 0.010
    n_mels: int = 80
    preemph: float = 0.97
    floor: float = 1e-10
    sample_rate: int = SAMPLE_RATE

    @property
    def win(self) -> int:
        return int(round(self.win_s * self.sample_rate))

    @property
    def hop(self) -> int:
        return int(round(self.hop_s * self.sample_rate))

    @property
    def n_fft(self) -> int:
        return 1 << (self.win - 1).bit_length()


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=float) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters evenly spaced on the mel scale from 0 Hz to Nyquist.

    Returns an ``(n_mels, n_fft // 2 + 1)`` matrix.
    """
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2), n_mels + 2))
    freqs = np.linspace(0.0, sample_rate / 2, n_fft // 2 + 1)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(up, down))


def frame_count(n_samples: int, cfg: FbankConfig = FbankConfig()) -> int:
    return 1 + (n_samples - cfg.win) // cfg.hop


def fbank_energy(samples, cfg: FbankConfig = FbankConfig(), sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Compute a ``T x (n_mels + 1)`` matrix; the last column is log energy.

    Pre-emphasis is applied per frame, so every frame depends only on its own
    window of samples.
    """
    if sample_rate != cfg.sample_rate:
        raise FeatureError(f"expected {cfg.sample_rate} Hz audio, got {sample_rate} Hz")
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise FeatureError("expected a mono waveform")
    if len(x) < cfg.win:
        raise FeatureError(f"need at least {cfg.win} samples, got {len(x)}")
    n = frame_count(len(x), cfg)
    idx = np.arange(cfg.win)[None, :] + cfg.hop * np.arange(n)[:, None]
    frames = x[idx]
    frames = np.concatenate([frames[:, :1] * (1 - cfg.preemph),
                             frames[:, 1:] - cfg.preemph * frames[:, :-1]], axis=1)
    frames = frames * np.hanning(cfg.win + 2)[1:-1]
    power = np.abs(np.fft.rfft(frames, n=cfg.n_fft)) ** 2
    mel = power @ mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate).T
    energy = np.sum(frames ** 2, axis=1, keepdims=True)
    out = np.log(np.maximum(np.concatenate([mel, energy], axis=1), cfg.floor))
    return out


def cmvn(m, var_floor: float = 1e-8) -> np.ndarray:
    """Per-utterance mean/variance normalisation of each column."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2:
        raise FeatureError("cmvn needs at least two frames")
    mu = m.mean(axis=0)
    var = m.var(axis=0)
    out = (m - mu) / np.sqrt(np.maximum(var, var_floor))
    out[:, var < var_floor] = 0.0
    return out


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read 16-bit PCM mono WAV as float samples in [-1, 1)."""
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1 or w.getsampwidth() != 2:
            raise FeatureError(f"{path}: only 16-bit mono PCM is supported")
        rate = w.getframerate()
        data = np.frombuffer(w.readframes(w.getnframes()), dtype="<i2")
    return data.astype(np.float64) / 32768.0, rate


def wav_features(path, cfg: FbankConfig = FbankConfig()) -> np.ndarray:
    samples, rate = read_wav(path)
    return fbank_energy(samples, cfg, sample_rate=rate)
