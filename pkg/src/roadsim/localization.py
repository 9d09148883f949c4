"""GCC-PHAT and SRP-PHAT direction-of-arrival estimation.

Two steered-response-power maps are provided. :func:`srp_map_direct` is the
plain beamformer: whiten, steer, sum, measure power, once per direction.
:func:`srp_map_phat` expands the same power into pairwise GCC-PHAT terms and
reads them from precomputed lag tables, which is far cheaper on large grids.
The two agree to interpolation accuracy.

Sign convention: ``gcc_phat(x1, x2)`` peaks at lag ``-k`` when
``x2[n] = x1[n - k]``, i.e. a lagging second channel gives a negative lag.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.signal import get_window

from .dsp import windowed_sinc
from .errors import InvalidInputError, InvalidParameterError

PHAT_EPS = 1e-12
LAG_OVERSAMPLING = 4
LAG_SINC_ORDER = 32
LAG_SINC_BETA = 14.0


@dataclass(frozen=True, eq=False)
class Frame:
    data: np.ndarray  # (n_channels, n_samples)
    fs: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 2:
            raise InvalidInputError("a frame needs at least two channels")
        n = data.shape[1]
        if n < 64 or n & (n - 1):
            raise InvalidInputError(f"frame length must be a power of two >= 64, got {n}")
        object.__setattr__(self, "data", data)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def length(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class DoaGrid:
    directions: np.ndarray  # (n, 3) unit vectors
    step: float  # nominal angular spacing, degrees

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float).reshape(-1, 3)
        if len(d) == 0:
            raise InvalidParameterError("direction grid is empty")
        d = d / np.linalg.norm(d, axis=1, keepdims=True)
        d.setflags(write=False)
        object.__setattr__(self, "directions", d)

    def __len__(self):
        return len(self.directions)

    @classmethod
    def ring(cls, step: float = 5.0, elevation: float = 0.0) -> "DoaGrid":
        """Azimuth ring starting at 0 degrees (+x axis), counter-clockwise."""
        az = np.radians(np.arange(0.0, 360.0 - 1e-9, step))
        el = np.radians(elevation)
        dirs = np.stack([np.cos(az) * np.cos(el), np.sin(az) * np.cos(el),
                         np.full_like(az, np.sin(el))], axis=1)
        return cls(dirs, step)

    @classmethod
    def hemisphere(cls, step: float = 5.0) -> "DoaGrid":
        """Upper hemisphere in elevation rings of roughly equal spacing."""
        dirs = []
        for el in np.arange(0.0, 90.0 + 1e-9, step):
            n_az = max(1, int(round(360.0 * np.cos(np.radians(el)) / step)))
            az = np.radians(np.arange(n_az) * 360.0 / n_az)
            e = np.radians(el)
            dirs.append(np.stack([np.cos(az) * np.cos(e), np.sin(az) * np.cos(e),
                                  np.full_like(az, np.sin(e))], axis=1))
        return cls(np.concatenate(dirs), step)

    @classmethod
    def fibonacci(cls, n: int) -> "DoaGrid":
        """``n`` near-uniform directions on the upper hemisphere."""
        i = np.arange(n) + 0.5
        z = i / n
        phi = np.pi * (1 + 5 ** 0.5) * i
        r = np.sqrt(1 - z * z)
        step = np.degrees(np.sqrt(2 * np.pi / n))
        return cls(np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1), float(step))

    @property
    def azimuth(self) -> np.ndarray:
        return np.degrees(np.arctan2(self.directions[:, 1], self.directions[:, 0])) % 360.0

    @property
    def elevation(self) -> np.ndarray:
        return np.degrees(np.arcsin(np.clip(self.directions[:, 2], -1, 1)))


# ---------------------------------------------------------------------------
# GCC-PHAT

def _phat(cross: np.ndarray) -> np.ndarray:
    mag = np.abs(cross)
    eps = PHAT_EPS * mag.max(axis=-1, keepdims=True)
    return cross / np.maximum(mag, np.maximum(eps, np.finfo(float).tiny))


def gcc_phat(x1, x2, nfft: int | None = None):
    """Generalized cross-correlation with phase transform.

    Returns ``(lags, values)`` for integer lags in ``[-N/2, N/2)`` where N is
    the input length. ``nfft`` defaults to ``2 N`` so the correlation is
    linear, not circular, over that lag span.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape or x1.ndim != 1:
        raise InvalidInputError("gcc_phat expects two 1-D inputs of equal length")
    if not np.any(x1) or not np.any(x2):
        raise InvalidInputError("gcc_phat input channel is all zeros")
    n = x1.size
    nfft = 2 * n if nfft is None else int(nfft)
    if nfft < n or nfft & (nfft - 1):
        raise InvalidParameterError("nfft must be a power of two >= the input length")
    cross = np.fft.rfft(x1, nfft) * np.conj(np.fft.rfft(x2, nfft))
    r = np.fft.irfft(_phat(cross), nfft)
    lags = np.arange(-(n // 2), n - n // 2)
    return lags, r[lags % nfft]


def tdoa_for_direction(direction, pi, pj, c: float, fs: float) -> float:
    """Far-field lag (samples) at which ``gcc_phat(x_i, x_j)`` peaks."""
    d = np.asarray(direction, dtype=float)
    return float(fs * np.dot(np.asarray(pj, float) - np.asarray(pi, float), d) / c)


# ---------------------------------------------------------------------------
# SRP maps

def _steering_delays(mics: np.ndarray, grid: DoaGrid, c: float, fs: float) -> np.ndarray:
    """Per-mic alignment delays in samples, shape (n_mics, n_dirs)."""
    rel = mics - mics.mean(axis=0)
    return fs * (rel @ grid.directions.T) / c


def _nfft(frame: Frame) -> int:
    return 2 * frame.length


def srp_map_direct(frame: Frame, mics, grid: DoaGrid, c: float = 343.0) -> np.ndarray:
    """Reference steered-response power, one beamformer pass per direction.

    Each channel is PHAT-whitened, delayed by its steering delay as an exact
    band-limited (DFT phase) shift, and the mean square of the channel sum is
    recorded. The Nyquist bin is dropped because a real signal carries no
    phase there to steer.
    """
    mics = np.asarray(mics, dtype=float)
    if mics.shape != (frame.n_channels, 3):
        raise InvalidInputError("one microphone position per frame channel is required")
    nfft = _nfft(frame)
    spec = np.fft.rfft(frame.data, nfft)
    white = _phat(spec)
    white[:, -1] = 0.0
    omega = 2 * np.pi * np.arange(spec.shape[1]) / nfft
    delays = _steering_delays(mics, grid, c, frame.fs)
    out = np.empty(len(grid))
    for k in range(len(grid)):
        steered = white * np.exp(-1j * np.outer(delays[:, k], omega))
        beam = np.fft.irfft(steered.sum(axis=0), nfft)
        out[k] = np.mean(beam * beam)
    return out


@dataclass(frozen=True, eq=False)
class LagTables:
    """Precomputed interpolation stencils of every mic pair for one grid."""

    pairs: tuple[tuple[int, int], ...]
    index: np.ndarray  # (n_pairs, n_dirs, n_taps) into the oversampled correlation
    weights: np.ndarray  # (n_pairs, n_dirs, n_taps)
    nfft: int
    oversampling: int
    interpolation: str


def build_lag_tables(mics, grid: DoaGrid, c: float, fs: float, frame_length: int,
                     interpolation: str = "sinc",
                     oversampling: int = LAG_OVERSAMPLING) -> LagTables:
    mics = np.asarray(mics, dtype=float)
    n_mics = len(mics)
    pairs = tuple(combinations(range(n_mics), 2))
    nfft = 2 * frame_length
    size = nfft * oversampling
    delays = _steering_delays(mics, grid, c, fs)
    tau = np.stack([delays[j] - delays[i] for i, j in pairs]) * oversampling
    base = np.floor(tau)
    frac = tau - base
    if interpolation == "sinc":
        half = LAG_SINC_ORDER // 2
        offs = np.arange(-half + 1, half + 1)
        weights = windowed_sinc(frac[..., None] - offs, half, "kaiser", LAG_SINC_BETA)
    elif interpolation == "linear":
        offs = np.array([0, 1])
        weights = np.stack([1.0 - frac, frac], axis=-1)
    else:
        raise InvalidParameterError(f"unknown lag interpolation {interpolation!r}")
    index = (base.astype(np.int64)[..., None] + offs) % size
    return LagTables(pairs, index, weights, nfft, oversampling, interpolation)


def pair_correlations(frame: Frame, pairs, nfft: int, oversampling: int = 1) -> np.ndarray:
    """GCC-PHAT sequences of the given pairs, oversampled by zero padding.

    Entry ``[p, j]`` is the correlation at lag ``j / oversampling`` (circular
    over ``nfft`` samples). The Nyquist bin is excluded, matching the direct map.
    """
    spec = np.fft.rfft(frame.data, nfft)
    i, j = np.array(pairs).T
    cross = _phat(spec[i] * np.conj(spec[j]))
    cross[:, -1] = 0.0
    return np.fft.irfft(cross, nfft * oversampling, axis=-1) * oversampling


def _self_energy(frame: Frame, nfft: int) -> float:
    spec = np.fft.rfft(frame.data, nfft)
    auto = np.abs(_phat(spec * np.conj(spec)))
    w = np.full(auto.shape[1], 2.0)
    w[0] = 1.0
    w[-1] = 0.0
    return float(np.sum(auto * w) / nfft)


def srp_map_phat(frame: Frame, mics, grid: DoaGrid, c: float = 343.0,
                 tables: LagTables | None = None, interpolation: str = "sinc") -> np.ndarray:
    """Steered-response power as a sum of interpolated pairwise GCC-PHAT values."""
    mics = np.asarray(mics, dtype=float)
    if mics.shape != (frame.n_channels, 3):
        raise InvalidInputError("one microphone position per frame channel is required")
    if tables is None:
        tables = build_lag_tables(mics, grid, c, frame.fs, frame.length, interpolation)
    corr = pair_correlations(frame, tables.pairs, tables.nfft, tables.oversampling)
    return steer_correlations(frame, corr, tables)


def steer_correlations(frame: Frame, corr: np.ndarray, tables: LagTables) -> np.ndarray:
    """Map pairwise correlations from :func:`pair_correlations` onto the grid."""
    values = np.take_along_axis(corr[:, None, :], tables.index.reshape(len(corr), 1, -1),
                                axis=-1).reshape(tables.index.shape)
    cross = np.einsum("pdk,pdk->d", tables.weights, values)
    total = (_self_energy(frame, tables.nfft) + 2.0 * cross) / tables.nfft
    return np.maximum(total, 0.0)


def estimate_doa(srp: np.ndarray, grid: DoaGrid) -> tuple[np.ndarray, float]:
    """Grid direction with the largest power; ties go to the lowest index."""
    srp = np.asarray(srp)
    if srp.size == 0:
        raise InvalidInputError("empty SRP map")
    k = int(np.argmax(srp))
    return grid.directions[k], float(srp[k])


# ---------------------------------------------------------------------------
# multi-frame driver

@dataclass(frozen=True)
class DoaEstimate:
    time: float
    index: int
    azimuth: float
    elevation: float
    power: float


def analysis_window(n: int) -> np.ndarray:
    return np.sqrt(get_window("hann", n))


def localize(channels, fs: float, mics, grid: DoaGrid, c: float = 343.0,
             window: int = 512, hop: int | None = None, method: str = "phat",
             interpolation: str = "sinc") -> list[DoaEstimate]:
    """Frame-by-frame DOA estimates for a multichannel recording."""
    channels = np.asarray(channels, dtype=float)
    hop = window // 2 if hop is None else hop
    win = analysis_window(window)
    mics = np.asarray(mics, dtype=float)
    tables = None
    if method == "phat":
        tables = build_lag_tables(mics, grid, c, fs, window, interpolation)
    elif method != "direct":
        raise InvalidParameterError(f"unknown SRP method {method!r}")
    az, el = grid.azimuth, grid.elevation
    out = []
    for start in range(0, channels.shape[1] - window + 1, hop):
        seg = channels[:, start:start + window]
        if not np.all(np.any(seg, axis=1)):
            continue
        frame = Frame(seg * win, fs)
        if method == "phat":
            srp = srp_map_phat(frame, mics, grid, c, tables=tables)
        else:
            srp = srp_map_direct(frame, mics, grid, c)
        k = int(np.argmax(srp))
        out.append(DoaEstimate((start + window / 2) / fs, k, float(az[k]), float(el[k]),
                               float(srp[k])))
    return out
