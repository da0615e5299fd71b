"""Deterministic sound-effect synthesis, 22,050 Hz mono int16.

Every event renders to the same samples on every call; amplitudes stay
at or below 0.8 of full scale.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

SAMPLE_RATE = 22050
PEAK = 0.8


class SoundEvent(Enum):
    ROLL = "roll"
    JUMP = "jump"
    COIN = "coin"
    KEY = "key"
    FRUIT = "fruit"
    WIN = "win"
    LOSE = "lose"


def _n_samples(ms: int) -> int:
    return (ms * SAMPLE_RATE + 500) // 1000


def _to_int16(wave: np.ndarray) -> np.ndarray:
    return np.clip(np.round(wave * 32767.0), -32768, 32767).astype(np.int16)


def _sweep(ms: int, f0: float, f1: float, amp: float) -> np.ndarray:
    n = _n_samples(ms)
    t = np.arange(n) / SAMPLE_RATE
    dur = n / SAMPLE_RATE
    # Linear chirp: phase is the integral of the swept frequency.
    phase = 2.0 * np.pi * (f0 * t + (f1 - f0) * t * t / (2.0 * dur))
    env = np.minimum(1.0, (n - np.arange(n)) / (0.2 * n))
    return amp * env * np.sin(phase)


def _tone(ms: int, freq: float, amp: float, decay: float = 0.0) -> np.ndarray:
    n = _n_samples(ms)
    t = np.arange(n) / SAMPLE_RATE
    env = np.exp(-decay * t) if decay else np.ones(n)
    return amp * env * np.sin(2.0 * np.pi * freq * t)


def _roll() -> np.ndarray:
    n = _n_samples(80)
    rng = np.random.default_rng(0xB0111)
    noise = rng.uniform(-1.0, 1.0, n + 8)
    # Crude low-pass: 9-tap moving average keeps the rumble, kills the hiss.
    kernel = np.ones(9) / 9.0
    low = np.convolve(noise, kernel, mode="valid")
    env = np.exp(-np.arange(n) / (0.35 * n))
    return 0.5 * env * low[:n]


def _fruit() -> np.ndarray:
    notes = [523.25, 659.25, 783.99]
    parts = [_tone(100, f, 0.6, decay=12.0) for f in notes]
    return np.concatenate(parts)


def _win() -> np.ndarray:
    notes = [523.25, 659.25, 783.99]
    parts = []
    for f in notes:
        base = _tone(200, f, 0.55, decay=4.0)
        shimmer = _tone(200, 2 * f, 0.15, decay=6.0)
        parts.append(base + shimmer)
    return np.concatenate(parts)


def _key() -> np.ndarray:
    first = _tone(125, 660.0, 0.65, decay=8.0)
    n_total = _n_samples(250)
    second = _tone(250, 990.0, 0.65, decay=8.0)[: n_total - len(first)]
    return np.concatenate([first, second])


_BUILDERS = {
    SoundEvent.ROLL: _roll,
    SoundEvent.JUMP: lambda: _sweep(300, 200.0, 600.0, 0.6),
    SoundEvent.COIN: lambda: _tone(150, 880.0, 0.7, decay=18.0),
    SoundEvent.KEY: _key,
    SoundEvent.FRUIT: _fruit,
    SoundEvent.WIN: _win,
    SoundEvent.LOSE: lambda: _sweep(500, 400.0, 100.0, 0.7),
}

_CACHE: dict[SoundEvent, np.ndarray] = {}


def synth_sound(event: SoundEvent) -> np.ndarray:
    """Render one event's waveform as int16 samples; cached, deterministic."""
    if event not in _CACHE:
        wave = _BUILDERS[event]()
        peak = np.max(np.abs(wave)) if len(wave) else 0.0
        if peak > PEAK:
            wave = wave * (PEAK / peak)
        _CACHE[event] = _to_int16(wave)
    return _CACHE[event].copy()


def sound_frames(event: SoundEvent) -> int:
    """Conservative frame count the event occupies on the 60 fps timeline."""
    n = len(synth_sound(event))
    return -(-n * 60 // SAMPLE_RATE) + 1
