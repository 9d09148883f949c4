"""Seeded generation of labeled emergency-sound datasets.

Each item draws a sound class and clip, a random trajectory and an SNR,
renders the event through the propagation simulator and adds background
noise at the drawn SNR. Items are seeded independently from the master seed,
so any single item can be regenerated on its own.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from math import gcd
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import InvalidInputError, InvalidParameterError, RoadSimError
from .geometry import Trajectory
from .propagation import AtmosphericConditions
from .renderer import GUARD_SAMPLES, Scene, render, render_ground_truth
from .wavio import wav_write

ACTIVE_THRESHOLD_DB = -60.0


class DatasetItemError(RoadSimError):
    def __init__(self, item_id: int, cause: Exception):
        super().__init__(f"item {item_id}: {cause}")
        self.item_id = item_id


# ---------------------------------------------------------------------------
# SNR mixing

def active_rms(x: np.ndarray, threshold_db: float = ACTIVE_THRESHOLD_DB) -> float:
    """RMS over samples within ``threshold_db`` of the peak magnitude."""
    x = np.asarray(x, dtype=float)
    peak = np.max(np.abs(x), initial=0.0)
    if peak == 0:
        return 0.0
    active = np.abs(x) >= peak * 10.0 ** (threshold_db / 20.0)
    return float(np.sqrt(np.mean(x[active] ** 2)))


def mix_at_snr(event, noise, snr_db: float):
    """Add ``noise`` to ``event`` so the active-region SNR equals ``snr_db``.

    Both inputs may be 1-D or ``(channels, samples)``; they are truncated to
    the shorter length. Returns ``(mixture, noise_gain)``.
    """
    event = np.asarray(event, dtype=float)
    noise = np.asarray(noise, dtype=float)
    n = min(event.shape[-1], noise.shape[-1])
    event = event[..., :n]
    noise = noise[..., :n]
    sig = active_rms(event)
    if sig == 0:
        raise InvalidInputError("event is silent")
    noise_rms = float(np.sqrt(np.mean(noise ** 2))) if noise.size else 0.0
    if noise_rms == 0:
        raise InvalidInputError("noise is silent")
    gain = sig / (noise_rms * 10.0 ** (snr_db / 20.0))
    return event + gain * noise, gain


def measured_snr(event, scaled_noise) -> float:
    return 20.0 * np.log10(active_rms(event) / np.sqrt(np.mean(np.asarray(scaled_noise) ** 2)))


# ---------------------------------------------------------------------------
# random trajectories

@dataclass(frozen=True)
class Region:
    """Axis-aligned box (metres) that random trajectories stay inside."""

    low: tuple[float, float, float]
    high: tuple[float, float, float]

    def __post_init__(self):
        lo = np.asarray(self.low, dtype=float)
        hi = np.asarray(self.high, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi < lo):
            raise InvalidParameterError("region needs low <= high in all three axes")
        if lo[2] <= 0:
            raise InvalidParameterError("region must lie above the road (z > 0)")
        object.__setattr__(self, "low", tuple(map(float, lo)))
        object.__setattr__(self, "high", tuple(map(float, hi)))

    def contains(self, pts, tol: float = 1e-9) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return np.all((pts >= np.subtract(self.low, tol)) & (pts <= np.add(self.high, tol)), axis=-1)

    @property
    def corners(self) -> np.ndarray:
        lo, hi = self.low, self.high
        return np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1])
                         for z in (lo[2], hi[2])])


def _chain_through(points: np.ndarray) -> list[np.ndarray]:
    """Cubic Bezier control points of a clamped quadratic B-spline.

    Every control point is a convex combination of the input points, so the
    curve never leaves their convex hull.
    """
    k = len(points) - 1
    ctrl = []
    for j in range(1, k):
        p0 = points[0] if j == 1 else 0.5 * (points[j - 1] + points[j])
        p1 = points[j]
        p2 = points[k] if j == k - 1 else 0.5 * (points[j] + points[j + 1])
        seg = [p0, p0 + 2 / 3 * (p1 - p0), p2 + 2 / 3 * (p1 - p2), p2]
        ctrl.extend(seg if not ctrl else seg[1:])
    return ctrl


def random_trajectory(rng: np.random.Generator, region: Region, speed_range,
                      min_duration: float = 0.0) -> Trajectory:
    """Smooth random path with 3-5 control points and constant speed.

    If the path is shorter than ``min_duration`` at the drawn speed, the
    source waits at its start point for the difference.
    """
    lo = np.asarray(region.low)
    hi = np.asarray(region.high)
    if np.all(lo == hi):
        return Trajectory.static(tuple(lo))
    n_points = int(rng.integers(3, 6))
    pts = lo + (hi - lo) * rng.random((n_points, 3))
    speed = float(rng.uniform(*speed_range))
    ctrl = _chain_through(pts)
    traj = Trajectory.bezier([tuple(p) for p in ctrl], speed)
    wait = max(0.0, min_duration - traj.length / speed)
    if wait > 0:
        traj = Trajectory.bezier(traj.waypoints, speed, start_time=wait)
    return traj


# ---------------------------------------------------------------------------
# dataset specification

def ingest_clip(samples, clip_fs: float, fs: float) -> np.ndarray:
    """Mono float clip resampled to ``fs`` with a polyphase filter."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 2:
        x = x.mean(axis=0)
    if int(clip_fs) == int(fs):
        return x.copy()
    up, down = int(fs), int(clip_fs)
    g = gcd(up, down)
    return resample_poly(x, up // g, down // g)


@dataclass(frozen=True, eq=False)
class DatasetSpec:
    count: int
    fs: float
    duration: float
    classes: dict[str, list[np.ndarray]]
    noise: list[np.ndarray]
    region: Region
    speed_range: tuple[float, float] = (5.0, 20.0)
    snr_range: tuple[float, float] = (-30.0, 0.0)
    microphones: np.ndarray = field(default_factory=lambda: np.array([[0.0, 0.0, 1.0]]))
    seed: int = 0
    c: float = 343.0
    atmosphere: AtmosphericConditions = field(default_factory=AtmosphericConditions)
    air_absorption: bool = True
    reflection: bool = True
    interpolation: str = "sinc"
    label_hop: float = 0.1  # seconds between DOA labels
    encoding: str = "float32"

    def __post_init__(self):
        if self.count < 0:
            raise InvalidParameterError("item count must be >= 0")
        if not self.duration > 0:
            raise InvalidParameterError("item duration must be > 0")
        lo, hi = self.snr_range
        if lo > hi:
            raise InvalidParameterError("SNR range must satisfy lo <= hi")
        if not self.classes or any(len(v) == 0 for v in self.classes.values()):
            raise InvalidParameterError("every event class needs a non-empty clip pool")
        if not self.noise:
            raise InvalidParameterError("noise pool is empty")
        s_lo, s_hi = self.speed_range
        if not 0 < s_lo <= s_hi < self.c:
            raise InvalidParameterError("speed range must satisfy 0 < lo <= hi < c")
        object.__setattr__(self, "microphones",
                           np.asarray(self.microphones, dtype=float).reshape(-1, 3))

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.fs))

    @property
    def labels(self) -> list[str]:
        return sorted(self.classes)

    def path_margin(self) -> int:
        """Samples to leave after an event so its longest echo fits the item."""
        longest = 0.0
        for mic in self.microphones:
            image = self.region.corners * np.array([1.0, 1.0, -1.0])
            longest = max(longest, np.linalg.norm(image - mic, axis=1).max())
        return int(np.ceil(longest / self.c * self.fs)) + GUARD_SAMPLES


@dataclass
class ManifestRecord:
    item_id: int
    audio_path: str
    label: str
    snr_db: float
    seed: int
    trajectory: dict
    onset: float
    offset: float
    doa: list | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ManifestRecord":
        return cls(**json.loads(line))


def item_seed(master_seed: int, item_id: int) -> int:
    """64-bit per-item seed derived from the master seed and the item id."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(item_id),))
    hi, lo = ss.generate_state(2, np.uint32)
    return (int(hi) << 32) | int(lo)


@dataclass
class ItemPlan:
    item_id: int
    seed: int
    label: str
    clip_index: int
    excerpt_start: int
    event_length: int
    placement: int
    trajectory: Trajectory
    snr_db: float
    noise_choices: list[tuple[int, int]]  # per channel: (clip index, offset)


def plan_item(spec: DatasetSpec, item_id: int) -> ItemPlan:
    """Draw every random quantity of one item, in a fixed order."""
    seed = item_seed(spec.seed, item_id)
    rng = np.random.default_rng(seed)
    labels = spec.labels
    label = labels[int(rng.integers(len(labels)))]
    pool = spec.classes[label]
    clip_index = int(rng.integers(len(pool)))
    trajectory = random_trajectory(rng, spec.region, spec.speed_range, spec.duration)
    snr = float(rng.uniform(*spec.snr_range))
    n = spec.n_samples
    room = n - spec.path_margin()
    if room < 1:
        raise InvalidParameterError("item duration too short for the propagation distances")
    clip_len = len(pool[clip_index])
    length = min(clip_len, room)
    excerpt = int(rng.integers(0, clip_len - length + 1))
    placement = int(rng.integers(0, room - length + 1))
    noise_choices = []
    for _ in range(len(spec.microphones)):
        k = int(rng.integers(len(spec.noise)))
        noise_choices.append((k, int(rng.integers(len(spec.noise[k])))))
    return ItemPlan(item_id, seed, label, clip_index, excerpt, length, placement,
                    trajectory, snr, noise_choices)


def _noise_segment(clip: np.ndarray, offset: int, n: int) -> np.ndarray:
    idx = (offset + np.arange(n)) % len(clip)
    return clip[idx]


def _event_bounds(spec: DatasetSpec, plan: ItemPlan) -> tuple[float, float]:
    onset = plan.placement / spec.fs
    offset = min(spec.n_samples, plan.placement + plan.event_length + spec.path_margin()) / spec.fs
    return onset, offset


def audio_name(item_id: int) -> str:
    return f"audio/{item_id:06d}.wav"


@dataclass
class RenderedItem:
    record: ManifestRecord
    mixture: np.ndarray
    event: np.ndarray
    scaled_noise: np.ndarray


def realize_item(spec: DatasetSpec, plan: ItemPlan) -> RenderedItem:
    n = spec.n_samples
    clip = spec.classes[plan.label][plan.clip_index]
    source = np.zeros(n)
    source[plan.placement:plan.placement + plan.event_length] = \
        clip[plan.excerpt_start:plan.excerpt_start + plan.event_length]
    scene = Scene(spec.fs, source, plan.trajectory, spec.microphones, c=spec.c,
                  atmosphere=spec.atmosphere,
                  reflection="asphalt" if spec.reflection else None,
                  air_absorption=spec.air_absorption, interpolation=spec.interpolation,
                  seed=plan.seed)
    event = render(scene).channels
    noise = np.stack([_noise_segment(spec.noise[k], off, n) for k, off in plan.noise_choices])
    mixture, gain = mix_at_snr(event, noise, plan.snr_db)
    doa = None
    if len(spec.microphones) > 1:
        hop = max(1, int(round(spec.label_hop * spec.fs)))
        doa = [[f.time, f.array_azimuth, f.array_elevation]
               for f in render_ground_truth(scene, hop)]
    return RenderedItem(_record(spec, plan, doa), mixture, event, gain * noise)


def _record(spec: DatasetSpec, plan: ItemPlan, doa=None) -> ManifestRecord:
    onset, offset = _event_bounds(spec, plan)
    return ManifestRecord(plan.item_id, audio_name(plan.item_id), plan.label, plan.snr_db,
                          plan.seed, plan.trajectory.describe(), onset, offset, doa)


def generate_item(spec: DatasetSpec, item_id: int, out_dir=None, debug: bool = False,
                  dry_run: bool = False) -> ManifestRecord:
    """Plan, render and (unless ``dry_run``) write one item."""
    try:
        plan = plan_item(spec, item_id)
        if dry_run:
            return _record(spec, plan)
        item = realize_item(spec, plan)
        if out_dir is not None:
            out_dir = Path(out_dir)
            wav_write(out_dir / item.record.audio_path, item.mixture, spec.fs, spec.encoding)
            if debug:
                stem = out_dir / "stems" / f"{item_id:06d}"
                wav_write(f"{stem}_event.wav", item.event, spec.fs, "float32")
                wav_write(f"{stem}_noise.wav", item.scaled_noise, spec.fs, "float32")
        return item.record
    except RoadSimError as exc:
        if isinstance(exc, DatasetItemError):
            raise
        raise DatasetItemError(item_id, exc) from exc
    except OSError as exc:
        raise DatasetItemError(item_id, exc) from exc


def _generate_star(args):
    return generate_item(*args)


def generate_dataset(spec: DatasetSpec, out_dir=None, jobs: int = 1, debug: bool = False,
                     dry_run: bool = False) -> list[ManifestRecord]:
    """Generate all items and write ``manifest.jsonl`` ordered by item id."""
    if out_dir is not None:
        out_dir = Path(out_dir)
        (out_dir if dry_run else out_dir / "audio").mkdir(parents=True, exist_ok=True)
    tasks = [(spec, i, out_dir, debug, dry_run) for i in range(spec.count)]
    if jobs > 1 and spec.count > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_generate_star, tasks))
    else:
        records = [_generate_star(t) for t in tasks]
    records.sort(key=lambda r: r.item_id)
    if out_dir is not None:
        tmp = out_dir / "manifest.jsonl.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            for r in records:
                fh.write(r.to_json() + "\n")
        os.replace(tmp, out_dir / "manifest.jsonl")
    return records


def read_manifest(path) -> list[ManifestRecord]:
    with open(path, encoding="utf-8") as fh:
        return [ManifestRecord.from_json(line) for line in fh if line.strip()]

