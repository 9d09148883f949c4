"""Physical attenuation: spherical spreading, air absorption, road reflection."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dsp import FirFilter, design_frequencies, fir_design_freq_sampling
from .errors import InvalidParameterError, OutOfRangeError

log = logging.getLogger(__name__)

REFERENCE_DISTANCE = 0.1
DEFAULT_DESIGN_POINTS = 64
ASPHALT_FLOW_RESISTIVITY = 3e7  # Pa s / m^2
AIR_DENSITY = 1.21  # kg / m^3

# ISO 9613-1 reference values
_T0 = 293.15
_T01 = 273.16
_P_REF = 101.325


@dataclass(frozen=True)
class AtmosphericConditions:
    temperature: float = 20.0  # degrees C
    humidity: float = 70.0  # percent relative humidity
    pressure: float = 101.325  # kPa

    def __post_init__(self):
        if not -50.0 <= self.temperature <= 60.0:
            raise InvalidParameterError(f"temperature {self.temperature} C outside [-50, 60]")
        if not 0.0 < self.humidity <= 100.0:
            raise InvalidParameterError(f"relative humidity {self.humidity} % outside (0, 100]")
        if not 50.0 <= self.pressure <= 120.0:
            raise InvalidParameterError(f"pressure {self.pressure} kPa outside [50, 120]")


def alpha_air(f, atm: AtmosphericConditions = AtmosphericConditions()) -> np.ndarray:
    """Pure-tone atmospheric absorption in dB/m (ISO 9613-1 closed form)."""
    f = np.asarray(f, dtype=float)
    if np.any(f < 0) or np.any(f > 100e3):
        raise InvalidParameterError("frequency must lie in [0, 100 kHz]")
    T = atm.temperature + 273.15
    pr = atm.pressure / _P_REF
    c_sat = -6.8346 * (_T01 / T) ** 1.261 + 4.6151
    h = atm.humidity * 10.0 ** c_sat / pr  # molar concentration of water vapour, %
    tr = T / _T0
    fr_o = pr * (24.0 + 4.04e4 * h * (0.02 + h) / (0.391 + h))
    fr_n = pr * tr ** -0.5 * (9.0 + 280.0 * h * np.exp(-4.170 * (tr ** (-1.0 / 3.0) - 1.0)))
    f2 = f * f
    return 8.686 * f2 * (
        1.84e-11 / pr * tr ** 0.5
        + tr ** -2.5 * (
            0.01275 * np.exp(-2239.1 / T) / (fr_o + f2 / fr_o)
            + 0.1068 * np.exp(-3352.0 / T) / (fr_n + f2 / fr_n)
        )
    )


# ---------------------------------------------------------------------------
# Air absorption filter bank

@dataclass(frozen=True, eq=False)
class AirAbsorptionBank:
    step: float
    max_distance: float
    n_taps: int
    taps: np.ndarray  # (n_buckets, n_taps)
    atmosphere: AtmosphericConditions
    fs: float

    @property
    def n_buckets(self) -> int:
        return self.taps.shape[0]

    @property
    def filters(self) -> list[FirFilter]:
        return [FirFilter(t) for t in self.taps]

    def bucket_index(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if np.any(d < 0) or np.any(d > self.max_distance):
            raise OutOfRangeError(
                f"distance outside air-absorption bank range [0, {self.max_distance}] m")
        return np.minimum(np.floor(d / self.step + 0.5).astype(np.int64), self.n_buckets - 1)


def build_air_bank(atm: AtmosphericConditions, fs: float, step: float = 1.0,
                   max_distance: float = 100.0, n_taps: int = 11,
                   n_freqs: int = DEFAULT_DESIGN_POINTS) -> AirAbsorptionBank:
    """Precompute one linear-phase absorption filter per distance bucket."""
    if not step > 0:
        raise InvalidParameterError("distance step must be > 0")
    if max_distance < step:
        raise InvalidParameterError("max distance must be at least one step")
    freqs = design_frequencies(n_freqs, fs)
    alpha = alpha_air(freqs, atm)
    n_buckets = int(np.ceil(max_distance / step - 1e-9)) + 1
    taps = np.empty((n_buckets, n_taps))
    for q in range(n_buckets):
        target = 10.0 ** (-alpha * q * step / 20.0)
        taps[q] = fir_design_freq_sampling(target, n_taps).taps
    taps[0] = 0.0
    taps[0, n_taps // 2] = 1.0
    taps.setflags(write=False)
    # A short FIR cannot follow very steep high-frequency roll-offs, so far
    # buckets may stop attenuating monotonically. Worth knowing, not fatal.
    mag = np.abs(np.fft.rfft(taps, 512, axis=1))
    rise = np.max(np.diff(mag, axis=0), initial=0.0)
    if rise > 1e-3:
        first = int(np.argmax(np.max(np.diff(mag, axis=0), axis=1) > 1e-3)) + 1
        log.warning("air absorption bank (fs=%g Hz, %d taps) is not monotone in distance "
                    "beyond %.0f m (max gain rise %.3g)", fs, n_taps, first * step, rise)
    return AirAbsorptionBank(step, float(max_distance), n_taps, taps, atm, fs)


def air_filter_for(bank: AirAbsorptionBank, d: float) -> FirFilter:
    """Filter of the nearest distance bucket."""
    return FirFilter(bank.taps[int(bank.bucket_index(d))])


# ---------------------------------------------------------------------------
# Road reflection

def delany_bazley_reflection(freqs, flow_resistivity: float = ASPHALT_FLOW_RESISTIVITY) -> np.ndarray:
    """Normal-incidence reflection coefficient magnitude of a porous surface."""
    freqs = np.asarray(freqs, dtype=float)
    if np.isinf(flow_resistivity):
        return np.ones_like(freqs)
    x = np.maximum(AIR_DENSITY * freqs / flow_resistivity, 1e-300)
    z = 1.0 + 0.0571 * x ** -0.754 - 1j * 0.087 * x ** -0.732
    r = np.abs((z - 1.0) / (z + 1.0))
    return np.where(freqs > 0, r, 1.0)


@dataclass(frozen=True)
class ReflectionModel:
    filter: FirFilter

    @classmethod
    def from_taps(cls, taps, n_check: int = DEFAULT_DESIGN_POINTS) -> "ReflectionModel":
        """Wrap user-supplied taps unmodified after a passivity check."""
        f = FirFilter(taps)
        mag = np.abs(f.response(design_frequencies(n_check, 2.0), 2.0))
        if np.any(mag > 1.0 + 1e-9):
            raise InvalidParameterError(
                f"reflection filter is not passive (max |H| = {mag.max():.6f})")
        return cls(f)


def default_asphalt_filter(fs: float, n_taps: int = 11,
                           flow_resistivity: float = ASPHALT_FLOW_RESISTIVITY,
                           n_freqs: int = DEFAULT_DESIGN_POINTS) -> ReflectionModel:
    """Hard-asphalt reflection filter from the Delany-Bazley impedance model."""
    if n_taps < 3:
        raise InvalidParameterError("asphalt filter needs at least 3 taps")
    freqs = design_frequencies(n_freqs, fs)
    target = np.minimum(delany_bazley_reflection(freqs, flow_resistivity), 1.0)
    f = fir_design_freq_sampling(target, n_taps)
    # least-squares ripple may overshoot unity; rescale to stay passive
    peak = np.abs(f.response(freqs, fs)).max()
    if peak > 1.0:
        f = FirFilter(f.taps / peak)
    return ReflectionModel(f)


# ---------------------------------------------------------------------------
# Spherical spreading

@dataclass(frozen=True)
class SpreadingGains:
    g1: np.ndarray | float
    g2: np.ndarray | float
    g3: np.ndarray | float


def spreading_gains(d1, d2, d3, d_ref: float = REFERENCE_DISTANCE) -> SpreadingGains:
    """Inverse-distance gains; the reflected branch carries ``1/(d2 + d3)`` in G2."""
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    d3 = np.asarray(d3, dtype=float)
    if np.any(d1 < 0) or np.any(d2 < 0) or np.any(d3 < 0):
        raise InvalidParameterError("distances must be >= 0")
    g1 = 1.0 / np.maximum(d1, d_ref)
    g2 = 1.0 / np.maximum(d2 + d3, d_ref)
    g3 = np.ones_like(g2)
    if g1.ndim == 0:
        return SpreadingGains(float(g1), float(g2), float(g3))
    return SpreadingGains(g1, g2, g3)
