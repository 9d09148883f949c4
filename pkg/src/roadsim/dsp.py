"""Fractional delay lines and FIR filtering primitives."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DelayRangeError, InvalidParameterError

DEFAULT_SINC_ORDER = 24
DEFAULT_KAISER_BETA = 7.0
LUT_OVERSAMPLING = 512


# ---------------------------------------------------------------------------
# Windowed-sinc interpolation kernel

def _window(u: np.ndarray, half: int, window: str, beta: float) -> np.ndarray:
    r = np.clip(u / half, -1.0, 1.0)
    if window == "hann":
        return 0.5 * (1.0 + np.cos(np.pi * r))
    if window == "kaiser":
        return np.i0(beta * np.sqrt(np.clip(1.0 - r * r, 0.0, None))) / np.i0(beta)
    raise InvalidParameterError(f"unknown window {window!r}")


def windowed_sinc(u, half: int, window: str = "kaiser", beta: float = DEFAULT_KAISER_BETA):
    """Continuous windowed-sinc kernel evaluated at offsets ``u`` (samples)."""
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) < half, np.sinc(u) * _window(u, half, window, beta), 0.0)


def sinc_weights(frac, order: int = DEFAULT_SINC_ORDER, window: str = "kaiser",
                 beta: float = DEFAULT_KAISER_BETA):
    """Exact interpolation weights for fractional positions ``frac`` in [0, 1).

    A value at ``i0 + frac`` is ``sum(w[k] * x[i0 + offsets[k]])``.
    Returns ``(offsets, weights)`` with weights shaped ``frac.shape + (order,)``.
    """
    half = order // 2
    offsets = np.arange(-half + 1, half + 1)
    frac = np.asarray(frac, dtype=float)
    return offsets, windowed_sinc(frac[..., None] - offsets, half, window, beta)


@lru_cache(maxsize=8)
def _sinc_table(order: int, window: str, beta: float) -> np.ndarray:
    grid = np.arange(LUT_OVERSAMPLING + 1) / LUT_OVERSAMPLING
    _, table = sinc_weights(grid, order, window, beta)
    table[0] = 0.0
    table[0, order // 2 - 1] = 1.0
    table[-1] = 0.0
    table[-1, order // 2] = 1.0
    return table


@dataclass(frozen=True)
class Interpolator:
    """Fractional-read rule for a delay line.

    ``mode="linear"`` uses two taps. ``mode="sinc"`` uses an ``order``-tap
    windowed sinc read from a 512x oversampled lookup table.
    """

    mode: str = "sinc"
    order: int = DEFAULT_SINC_ORDER
    window: str = "kaiser"
    beta: float = DEFAULT_KAISER_BETA

    def __post_init__(self):
        if self.mode not in ("sinc", "linear"):
            raise InvalidParameterError(f"unknown interpolation mode {self.mode!r}")
        if self.mode == "sinc" and (self.order < 2 or self.order % 2):
            raise InvalidParameterError("sinc order must be an even number >= 2")

    @property
    def offsets(self) -> np.ndarray:
        if self.mode == "linear":
            return np.array([0, 1])
        half = self.order // 2
        return np.arange(-half + 1, half + 1)

    @property
    def half_width(self) -> int:
        """Number of samples the stencil reaches past the read position."""
        return int(self.offsets[-1])

    def weights(self, frac: np.ndarray) -> np.ndarray:
        frac = np.asarray(frac, dtype=float)
        if self.mode == "linear":
            return np.stack([1.0 - frac, frac], axis=-1)
        table = _sinc_table(self.order, self.window, self.beta)
        pos = frac * LUT_OVERSAMPLING
        k = np.minimum(pos.astype(np.int64), LUT_OVERSAMPLING - 1)
        t = (pos - k)[..., None]
        return (1.0 - t) * table[k] + t * table[k + 1]


def as_interpolator(spec) -> Interpolator:
    if isinstance(spec, Interpolator):
        return spec
    return Interpolator(mode=spec)


# ---------------------------------------------------------------------------
# Delay line

class DelayLine:
    """Circular sample store with fractional-delay reads.

    A delay of 0 returns the most recently pushed sample. Slots never written
    read as zero.
    """

    def __init__(self, capacity: int, interpolation="sinc"):
        if capacity < 1:
            raise InvalidParameterError("delay line capacity must be >= 1")
        self.capacity = int(capacity)
        self.interp = as_interpolator(interpolation)
        self.buffer = np.zeros(self.capacity)
        self.count = 0  # total samples pushed; next write goes to count % capacity

    @property
    def write_index(self) -> int:
        return self.count % self.capacity

    def push(self, sample: float) -> None:
        self.buffer[self.count % self.capacity] = sample
        self.count += 1

    def push_block(self, samples) -> None:
        samples = np.asarray(samples, dtype=float)
        n = len(samples)
        if n >= self.capacity:
            samples = samples[-self.capacity:]
            start = self.count + n - self.capacity
        else:
            start = self.count
        idx = (start + np.arange(len(samples))) % self.capacity
        self.buffer[idx] = samples
        self.count += n

    def read(self, delay: float) -> float:
        return float(self.read_at(np.asarray([self.count - 1 - delay]))[0])

    def read_block(self, delays) -> np.ndarray:
        """Read one value per recently pushed sample.

        ``delays[j]`` is relative to the j-th of the last ``len(delays)``
        pushed samples.
        """
        delays = np.asarray(delays, dtype=float)
        n = len(delays)
        return self.read_at(self.count - n + np.arange(n) - delays)

    def read_at(self, positions) -> np.ndarray:
        """Interpolated values at absolute (fractional) sample positions."""
        pos = np.asarray(positions, dtype=float)
        base = np.floor(pos)
        frac = pos - base
        base = base.astype(np.int64)
        exact = frac == 0.0
        offsets = self.interp.offsets
        lo_ok = self.count - self.capacity
        hi_ok = self.count - 1
        lo = np.where(exact, base, base + offsets[0])
        hi = np.where(exact, base, base + offsets[-1])
        if np.any(lo < lo_ok) or np.any(hi > hi_ok):
            bad = np.flatnonzero((lo < lo_ok) | (hi > hi_ok))[0]
            delay = self.count - 1 - pos.reshape(-1)[bad]
            raise DelayRangeError(
                f"delay {delay:.4f} samples outside readable range of a "
                f"{self.capacity}-sample line ({self.interp.mode} interpolation)")
        out = np.empty(pos.shape)
        if np.any(exact):
            out[exact] = self.buffer[base[exact] % self.capacity]
        frac_mask = ~exact
        if np.any(frac_mask):
            w = self.interp.weights(frac[frac_mask])
            idx = (base[frac_mask][:, None] + offsets) % self.capacity
            out[frac_mask] = np.einsum("nk,nk->n", w, self.buffer[idx])
        return out


# ---------------------------------------------------------------------------
# FIR filters

@dataclass(frozen=True, eq=False)
class FirFilter:
    taps: np.ndarray

    def __post_init__(self):
        taps = np.array(self.taps, dtype=float).reshape(-1)
        if taps.size < 1 or not np.all(np.isfinite(taps)):
            raise InvalidParameterError("FIR filter needs at least one finite tap")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    def __eq__(self, other):
        return isinstance(other, FirFilter) and np.array_equal(self.taps, other.taps)

    def __hash__(self):
        return hash(self.taps.tobytes())

    @property
    def n_taps(self) -> int:
        return self.taps.size

    @property
    def group_delay(self) -> float:
        """Group delay in samples of a linear-phase design."""
        return (self.n_taps - 1) / 2

    def is_linear_phase(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.taps - self.taps[::-1]) <= tol))

    def response(self, freqs, fs: float) -> np.ndarray:
        """Complex frequency response evaluated by direct DTFT."""
        w = 2 * np.pi * np.asarray(freqs, dtype=float) / fs
        n = np.arange(self.n_taps)
        return np.exp(-1j * np.multiply.outer(w, n)) @ self.taps

    def __eq__(self, other):
        return isinstance(other, FirFilter) and np.array_equal(self.taps, other.taps)

    __hash__ = None


IDENTITY = FirFilter([1.0])


def fir_apply(f: FirFilter, x) -> np.ndarray:
    """Causal FIR filtering from zero state; output has the input's length."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x.copy()
    return np.convolve(x, f.taps)[: x.size]


def design_frequencies(n_points: int, fs: float) -> np.ndarray:
    """The uniform grid of ``n_points`` frequencies spanning ``[0, fs/2]``."""
    return np.linspace(0.0, fs / 2, n_points)


def fir_design_freq_sampling(target, n_taps: int) -> FirFilter:
    """Linear-phase FIR whose amplitude matches ``target`` on a uniform grid.

    ``target`` holds magnitudes at K uniformly spaced frequencies from DC to
    Nyquist inclusive. The symmetric (type I) amplitude response is fit to the
    samples in the least-squares sense, which is exact interpolation when the
    grid is no denser than the number of free coefficients allows.
    """
    target = np.asarray(target, dtype=float).reshape(-1)
    if n_taps < 1 or n_taps % 2 == 0:
        raise InvalidParameterError(f"n_taps must be a positive odd integer, got {n_taps}")
    if target.size < n_taps:
        raise InvalidParameterError(
            f"need at least n_taps={n_taps} design frequencies, got {target.size}")
    if not np.all(np.isfinite(target)) or np.any(target < 0):
        raise InvalidParameterError("target magnitudes must be finite and >= 0")
    half = (n_taps - 1) // 2
    omega = np.linspace(0.0, np.pi, target.size)
    basis = np.cos(np.multiply.outer(omega, np.arange(half + 1)))
    basis[:, 1:] *= 2.0
    coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
    taps = np.concatenate([coef[:0:-1], coef])
    return FirFilter(taps)


class VaryingFir:
    """FIR whose taps switch per sample among a bank, keeping its state.

    ``bank`` is an ``(n_filters, n_taps)`` array; all rows share one length.
    """

    def __init__(self, bank: np.ndarray):
        bank = np.asarray(bank, dtype=float)
        self.bank_rev = bank[:, ::-1].copy()
        self.n_taps = bank.shape[1]
        self.history = np.zeros(self.n_taps - 1)

    def process(self, x: np.ndarray, which: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.n_taps == 1:
            return x * self.bank_rev[which, 0]
        ext = np.concatenate([self.history, x])
        frames = sliding_window_view(ext, self.n_taps)
        y = np.einsum("nk,nk->n", self.bank_rev[which], frames)
        self.history = ext[-(self.n_taps - 1):].copy()
        return y
