"""Mel-frequency cepstral coefficient extraction for move audio.

Pipeline: pre-emphasis, 512-sample frames with a 256-sample hop, Hamming
window, magnitude spectrum, a 26-band triangular mel filterbank on the
2595*log10(1 + f/700) scale spanning 0 Hz to Nyquist, a floored natural
log, then an orthonormal type-II DCT keeping the first 13 coefficients.
All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .errors import BadAudio


@dataclass(frozen=True)
class MfccConfig:
    sample_rate: int = 22050
    frame_len: int = 512
    hop: int = 256
    n_mels: int = 26
    n_coeffs: int = 13
    preemphasis: float = 0.97
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.n_coeffs > self.n_mels:
            raise ValueError("n_coeffs must not exceed n_mels")
        if self.frame_len & (self.frame_len - 1):
            raise ValueError("frame_len must be a power of two")
        if self.hop > self.frame_len:
            raise ValueError("hop must not exceed frame_len")


DEFAULT_CONFIG = MfccConfig()


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def normalize_wave(wave: np.ndarray) -> np.ndarray:
    """Accept int16 or float input; return float64 in [-1, 1]."""
    wave = np.asarray(wave)
    if wave.dtype == np.int16:
        return wave.astype(np.float64) / 32768.0
    wave = wave.astype(np.float64)
    if not np.all(np.isfinite(wave)):
        raise BadAudio("non-finite samples")
    return wave


def mel_filterbank(cfg: MfccConfig) -> np.ndarray:
    """(n_mels, frame_len/2 + 1) triangular filters evaluated at bin frequencies."""
    n_bins = cfg.frame_len // 2 + 1
    freqs = np.arange(n_bins) * cfg.sample_rate / cfg.frame_len
    points = mel_to_hz(
        np.linspace(hz_to_mel(0.0), hz_to_mel(cfg.sample_rate / 2.0), cfg.n_mels + 2)
    )
    bank = np.zeros((cfg.n_mels, n_bins))
    for m in range(cfg.n_mels):
        lo, mid, hi = points[m], points[m + 1], points[m + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def frame_count(n_samples: int, cfg: MfccConfig = DEFAULT_CONFIG) -> int:
    if n_samples < cfg.frame_len:
        return 0
    return 1 + (n_samples - cfg.frame_len) // cfg.hop


def magnitude_spectrum(frame: np.ndarray) -> np.ndarray:
    """|DFT| of one windowed frame, bins 0..len/2."""
    return np.abs(np.fft.rfft(np.asarray(frame, dtype=np.float64)))


def mfcc(wave: np.ndarray, cfg: MfccConfig = DEFAULT_CONFIG) -> np.ndarray:
    """MFCC matrix of shape (n_frames, n_coeffs); (0, n_coeffs) for short input."""
    x = normalize_wave(wave)
    n_frames = frame_count(len(x), cfg)
    if n_frames == 0:
        return np.zeros((0, cfg.n_coeffs))

    emphasized = np.empty_like(x)
    emphasized[0] = x[0]
    emphasized[1:] = x[1:] - cfg.preemphasis * x[:-1]

    window = np.hamming(cfg.frame_len)
    bank = mel_filterbank(cfg)
    out = np.empty((n_frames, cfg.n_coeffs))
    for i in range(n_frames):
        frame = emphasized[i * cfg.hop:i * cfg.hop + cfg.frame_len] * window
        spectrum = magnitude_spectrum(frame)
        energies = bank @ spectrum
        logs = np.log(np.maximum(energies, cfg.log_floor))
        out[i] = dct(logs, type=2, norm="ortho")[: cfg.n_coeffs]
    return out
