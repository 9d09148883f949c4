"""Sample-accurate rendering of a moving source onto a static microphone array.

Per microphone the signal path is::

    x -> delay line 1 -+-> H_air(d1) -> G1 --------------------------------+-> out
                       +-> H_air(d2) -> G2 -> H_refl -> delay line 2 ->     |
                                              H_air(d3) -> G3 -------------+

Propagation delays are solved at emission time, so the Doppler shift of a
moving source is exact for any trajectory. Linear-phase filter group delays
are subtracted from the delay-line reads so every path arrives at exactly
``d / c * fs`` samples.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .dsp import DelayLine, Interpolator, VaryingFir, as_interpolator
from .errors import ConfigurationError, DelayRangeError, InvalidGeometryError, InvalidParameterError
from .geometry import Trajectory, azimuth_elevation, direction_to, path_lengths
from .propagation import (
    AirAbsorptionBank,
    AtmosphericConditions,
    ReflectionModel,
    build_air_bank,
    default_asphalt_filter,
    spreading_gains,
)
from .timing import NULL_TIMER

GUARD_SAMPLES = 64
BLOCK_SIZE = 4096
_EMISSION_TOL = 1e-11  # seconds


@dataclass(frozen=True, eq=False)
class Scene:
    fs: float
    signal: np.ndarray
    trajectory: Trajectory
    microphones: np.ndarray
    c: float = 343.0
    atmosphere: AtmosphericConditions = field(default_factory=AtmosphericConditions)
    reflection: ReflectionModel | str | None = "asphalt"
    air_absorption: bool = True
    direct_path: bool = True
    interpolation: Interpolator | str = "sinc"
    seed: int = 0
    air_step: float = 1.0
    air_taps: int = 11

    def __post_init__(self):
        if not self.fs > 0:
            raise InvalidParameterError("fs must be > 0")
        if not self.c > 0:
            raise InvalidParameterError("speed of sound must be > 0")
        sig = np.array(self.signal, dtype=float).reshape(-1)
        sig.setflags(write=False)
        object.__setattr__(self, "signal", sig)
        mics = np.array(self.microphones, dtype=float).reshape(-1, 3)
        if len(mics) < 1:
            raise InvalidGeometryError("scene needs at least one microphone")
        if np.any(mics[:, 2] <= 0) or not np.all(np.isfinite(mics)):
            raise InvalidGeometryError("microphones must lie above the road (z > 0)")
        mics.setflags(write=False)
        object.__setattr__(self, "microphones", mics)
        if isinstance(self.reflection, str):
            if self.reflection != "asphalt":
                raise InvalidParameterError(f"unknown reflection model {self.reflection!r}")
            object.__setattr__(self, "reflection", default_asphalt_filter(self.fs))
        object.__setattr__(self, "interpolation", as_interpolator(self.interpolation))
        if self.trajectory.max_speed >= self.c:
            raise InvalidParameterError("source speed must stay below the speed of sound")

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return all(
            np.array_equal(a, b) if isinstance(a, np.ndarray) else a == b
            for a, b in ((getattr(self, f.name), getattr(other, f.name)) for f in fields(self)))

    __hash__ = None

    @property
    def n_samples(self) -> int:
        return self.signal.size

    @property
    def duration(self) -> float:
        return self.n_samples / self.fs

    def replace(self, **changes) -> "Scene":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return Scene(**fields)


@dataclass(frozen=True, eq=False)
class RenderOutput:
    channels: np.ndarray  # (n_mics, n_samples)
    fs: float
    positions: np.ndarray | None = None  # (n_samples, 3) emitter position seen by the direct path of mic 0
    distances: np.ndarray | None = None  # (n_mics, n_samples, 3) -> d1, d2, d3


# ---------------------------------------------------------------------------
# emission-time geometry

def _leg_lengths(traj: Trajectory, te: np.ndarray, mic: np.ndarray):
    d1, d2, d3, _ = path_lengths(traj.positions_at(np.clip(te, 0.0, None)), mic)
    return d1, d2, d3


def emission_times(traj: Trajectory, t: np.ndarray, mic, c: float, leg: str = "direct"):
    """Solve ``te = t - L(te) / c`` for the path length ``L`` named by ``leg``.

    ``leg`` is ``"direct"`` (d1), ``"first"`` (d2) or ``"reflected"``
    (d2 + d3). Returns ``(te, d1, d2, d3)`` with lengths evaluated at ``te``.
    Emission before time zero is located at the trajectory's start point;
    the source signal is zero there anyway.
    """
    pick = {"direct": lambda a, b, d: a, "first": lambda a, b, d: b,
            "reflected": lambda a, b, d: b + d}[leg]
    t = np.asarray(t, dtype=float)
    mic = np.asarray(mic, dtype=float)

    def step(te):
        lengths = _leg_lengths(traj, te, mic)
        return t - pick(*lengths) / c, lengths

    te, lengths = step(t)
    if traj.kind == "static":
        return (te, *lengths)
    # Fixed-point iteration contracts only by about v/c per step, so the
    # iterates are accelerated with Aitken's delta-squared (Steffensen).
    for _ in range(100):
        x1, lengths1 = step(te)
        if np.max(np.abs(x1 - te), initial=0.0) < _EMISSION_TOL:
            return (x1, *lengths1)
        x2, lengths = step(x1)
        if np.max(np.abs(x2 - x1), initial=0.0) < _EMISSION_TOL:
            return (x2, *lengths)
        den = x2 - 2.0 * x1 + te
        with np.errstate(divide="ignore", invalid="ignore"):
            acc = te - (x1 - te) ** 2 / den
        te = np.where(np.isfinite(acc) & (np.abs(den) > 1e-15), acc, x2)
    te, lengths = step(te)
    d1, d2, d3 = lengths
    return te, d1, d2, d3


# ---------------------------------------------------------------------------

def _air_bank_for(scene: Scene, max_distance: float) -> AirAbsorptionBank | None:
    if not scene.air_absorption:
        return None
    max_d = max(np.ceil(max_distance / scene.air_step) * scene.air_step, scene.air_step)
    return build_air_bank(scene.atmosphere, scene.fs, scene.air_step, max_d, scene.air_taps)


def _split_compensation(total: float, first_leg: np.ndarray, second_leg: np.ndarray,
                        min_delay: float) -> tuple[float, float]:
    """Share the reflected branch's group delay between its two delay lines."""
    room = max(0.0, np.floor(first_leg.min() - min_delay))
    c1 = min(total, room)
    return c1, total - c1


def render(scene: Scene, *, ground_truth: bool = False, timer=NULL_TIMER,
           block_size: int = BLOCK_SIZE) -> RenderOutput:
    """Render the scene to one channel per microphone."""
    fs, c = scene.fs, scene.c
    n = scene.n_samples
    traj = scene.trajectory
    if traj.duration < scene.duration - 1e-12:
        raise ConfigurationError(
            f"trajectory lasts {traj.duration:.4f} s but the signal lasts {scene.duration:.4f} s")
    interp = scene.interpolation
    min_delay = interp.half_width
    t = np.arange(n) / fs
    x = scene.signal
    out = np.zeros((scene.microphones.shape[0], n))
    gt_dist = np.zeros((scene.microphones.shape[0], n, 3)) if ground_truth else None
    positions = None
    refl = scene.reflection

    for m, mic in enumerate(scene.microphones):
        with timer.stage("geometry"):
            te1, d1, _, _ = emission_times(traj, t, mic, c, "direct")
            if refl is not None:
                te_a, _, d2a, d3a = emission_times(traj, t, mic, c, "first")
                te_r, _, d2r, d3r = emission_times(traj, t, mic, c, "reflected")
                g2 = spreading_gains(d1, d2a, d3a).g2
            g1 = spreading_gains(d1, 0.0 * d1, 0.0 * d1).g1
            far = max(d1.max(), (d2a.max() if refl is not None else 0.0),
                      (d3r.max() if refl is not None else 0.0))
            bank = _air_bank_for(scene, far)
            gd_air = (bank.n_taps - 1) / 2 if bank is not None else 0.0
            delay1 = d1 * fs / c - gd_air
            if refl is not None:
                gd_total = 2 * gd_air + refl.filter.group_delay
                raw2 = d2a * fs / c
                raw3 = d3r / c * fs
                c2, c3 = _split_compensation(gd_total, raw2, raw3, min_delay)
                delay2 = raw2 - c2
                delay3 = raw3 - c3
            if ground_truth:
                gt_dist[m, :, 0] = d1
                if refl is not None:
                    gt_dist[m, :, 1] = d2r
                    gt_dist[m, :, 2] = d3r
                if m == 0:
                    positions = traj.positions_at(np.clip(te1, 0.0, None))
            if bank is not None:
                b1 = bank.bucket_index(d1)
                if refl is not None:
                    b2 = bank.bucket_index(d2a)
                    b3 = bank.bucket_index(d3r)
            else:
                b1 = b2 = b3 = np.zeros(n, dtype=np.int64)

        reads = [delay1] + ([delay2, delay3] if refl is not None else [])
        shortest = min(float(r.min(initial=np.inf)) for r in reads)
        if shortest < min_delay:
            raise ConfigurationError(
                f"microphone {m}: propagation delay of {shortest:.2f} samples after filter "
                f"compensation is below the {min_delay}-sample interpolation reach; "
                "move the source further away or raise fs")

        identity = np.ones((1, 1))
        air_taps = bank.taps if bank is not None else identity
        cap1 = int(np.ceil(max(delay1.max(initial=0.0),
                               delay2.max(initial=0.0) if refl is not None else 0.0)))
        dl1 = DelayLine(cap1 + GUARD_SAMPLES + block_size, interp)
        air1 = VaryingFir(air_taps)
        if refl is not None:
            dl2 = DelayLine(int(np.ceil(delay3.max(initial=0.0))) + GUARD_SAMPLES + block_size, interp)
            air2 = VaryingFir(air_taps)
            air3 = VaryingFir(air_taps)
            hrefl = VaryingFir(refl.filter.taps[None, :])
            zeros = np.zeros(block_size, dtype=np.int64)

        try:
            for s in range(0, n, block_size):
                e = min(s + block_size, n)
                with timer.stage("delay_reads"):
                    dl1.push_block(x[s:e])
                    if scene.direct_path:
                        u1 = dl1.read_block(delay1[s:e])
                    if refl is not None:
                        u2 = dl1.read_block(delay2[s:e])
                if scene.direct_path:
                    with timer.stage("filtering"):
                        u1 = air1.process(u1, b1[s:e])
                    with timer.stage("mixing"):
                        out[m, s:e] += g1[s:e] * u1
                if refl is not None:
                    with timer.stage("filtering"):
                        v = air2.process(u2, b2[s:e])
                    with timer.stage("mixing"):
                        v = v * g2[s:e]
                    with timer.stage("filtering"):
                        v = hrefl.process(v, zeros[: e - s])
                    with timer.stage("delay_reads"):
                        dl2.push_block(v)
                        u3 = dl2.read_block(delay3[s:e])
                    with timer.stage("filtering"):
                        u3 = air3.process(u3, b3[s:e])
                    with timer.stage("mixing"):
                        out[m, s:e] += u3  # G3 = 1
        except DelayRangeError as exc:
            raise ConfigurationError(
                f"microphone {m}: path too short or too long for the delay lines ({exc})") from exc

    return RenderOutput(out, fs, positions, gt_dist)


# ---------------------------------------------------------------------------
# ground truth labels

@dataclass(frozen=True)
class GroundTruthFrame:
    time: float
    position: np.ndarray  # emitter position heard at the array centroid
    directions: np.ndarray  # (n_mics, 3) unit vectors mic -> emitter
    azimuth: np.ndarray  # degrees, per mic
    elevation: np.ndarray  # degrees, per mic
    array_azimuth: float
    array_elevation: float


def render_ground_truth(scene: Scene, hop: int, window: int | None = None) -> list[GroundTruthFrame]:
    """Direction-of-arrival labels at frame centres.

    Frame ``k`` spans samples ``[k*hop, k*hop + window)``; ``window`` defaults
    to ``hop``. Directions point from each microphone toward the source
    position at the emission time of the sound arriving at the frame centre.
    """
    if hop < 1:
        raise InvalidParameterError("hop must be >= 1")
    window = hop if window is None else window
    n = scene.n_samples
    n_frames = -(-n // hop)
    centres = np.minimum(np.arange(n_frames) * hop + window / 2, n) / scene.fs
    centroid = scene.microphones.mean(axis=0)
    traj, c = scene.trajectory, scene.c
    te_c, *_ = emission_times(traj, centres, centroid, c, "direct")
    pos_c = traj.positions_at(np.clip(te_c, 0.0, None))
    arr_dir = direction_to(pos_c, centroid)
    arr_az, arr_el = azimuth_elevation(arr_dir)
    dirs = np.empty((n_frames, len(scene.microphones), 3))
    for m, mic in enumerate(scene.microphones):
        te, *_ = emission_times(traj, centres, mic, c, "direct")
        dirs[:, m] = direction_to(traj.positions_at(np.clip(te, 0.0, None)), mic)
    az, el = azimuth_elevation(dirs)
    return [GroundTruthFrame(float(centres[k]), pos_c[k], dirs[k], az[k], el[k],
                             float(arr_az[k]), float(arr_el[k]))
            for k in range(n_frames)]
