"""Synthetic source and background signals.

Emergency sirens are rendered as phase-continuous frequency sweeps with a
few odd/even harmonics. They stand in for recorded clips in examples and
tests; any recorded clip can be used instead.
"""
from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidParameterError

SIREN_KINDS = ("hi-low", "wail", "yelp", "horn")


def tone(freq: float, duration: float, fs: float, amplitude: float = 1.0) -> np.ndarray:
    t = np.arange(int(round(duration * fs))) / fs
    return amplitude * np.sin(2 * np.pi * freq * t)


def white_noise(duration: float, fs: float, rng: np.random.Generator,
                amplitude: float = 1.0) -> np.ndarray:
    return amplitude * rng.standard_normal(int(round(duration * fs)))


def _harmonic_sweep(freq: np.ndarray, fs: float, n_harmonics: int = 4) -> np.ndarray:
    phase = 2 * np.pi * np.cumsum(freq) / fs
    out = np.zeros_like(phase)
    for k in range(1, n_harmonics + 1):
        alias_ok = k * freq < 0.45 * fs
        out += alias_ok * np.sin(k * phase) / k
    return out / np.max(np.abs(out))


def siren(kind: str, duration: float, fs: float, amplitude: float = 0.5) -> np.ndarray:
    """Synthetic emergency sound: ``hi-low``, ``wail``, ``yelp`` or ``horn``."""
    t = np.arange(int(round(duration * fs))) / fs
    if kind == "wail":
        freq = 650 + 850 * (0.5 - 0.5 * np.cos(2 * np.pi * t / 4.0))
    elif kind == "yelp":
        freq = 650 + 850 * (0.5 - 0.5 * np.cos(2 * np.pi * t / 0.33))
    elif kind == "hi-low":
        freq = np.where(np.floor(t / 0.5) % 2 == 0, 960.0, 770.0)
    elif kind == "horn":
        sig = _harmonic_sweep(np.full_like(t, 420.0), fs, 6) + _harmonic_sweep(np.full_like(t, 500.0), fs, 6)
        env = np.minimum(1.0, np.minimum(t, t[-1] - t) / 0.02) if t.size else t
        return amplitude * env * sig / 2
    else:
        raise InvalidParameterError(f"unknown siren kind {kind!r}; expected one of {SIREN_KINDS}")
    return amplitude * _harmonic_sweep(freq, fs)


def road_noise(duration: float, fs: float, rng: np.random.Generator,
               amplitude: float = 0.1) -> np.ndarray:
    """Low-frequency-heavy broadband noise resembling distant traffic."""
    w = rng.standard_normal(int(round(duration * fs)))
    x = lfilter([1.0], [1.0, -0.98], w)
    x = x - x.mean()
    return amplitude * x / np.sqrt(np.mean(x * x))
