"""Per-stage latency accounting for the render and localization path.

The report keeps absolute times, but only relative comparisons (such as fast
versus direct SRP) are meaningful across machines.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidParameterError
from .localization import (DoaGrid, Frame, analysis_window, build_lag_tables, pair_correlations,
                           srp_map_direct, steer_correlations)
from .renderer import Scene, render
from .timing import StageTimer

STAGES = ("geometry", "filtering", "delay_reads", "mixing", "gcc", "srp_map")


@dataclass(frozen=True)
class LatencyStats:
    mean_ms: float
    p95_ms: float

    @classmethod
    def of(cls, seconds) -> "LatencyStats":
        ms = 1e3 * np.asarray(seconds, dtype=float)
        return cls(float(ms.mean()), float(np.percentile(ms, 95)))


@dataclass(frozen=True)
class ProfileReport:
    stages: dict[str, float]      # seconds per stage
    total: float                  # seconds, whole profiled run
    frames: int
    fast_srp: LatencyStats
    direct_srp: LatencyStats
    config: dict

    @property
    def speedup(self) -> float:
        return self.direct_srp.mean_ms / self.fast_srp.mean_ms

    def to_dict(self) -> dict:
        out = asdict(self)
        out["speedup"] = self.speedup
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def profile_pipeline(scene: Scene, frames: int, grid: DoaGrid | None = None,
                     window: int = 512, hop: int | None = None,
                     interpolation: str = "sinc") -> ProfileReport:
    """Render ``scene``, then localize ``frames`` analysis frames of the result.

    Each frame is processed by both the fast and the direct SRP maps so their
    per-frame latencies can be compared on identical input. Frames cycle over
    the rendered audio if it holds fewer than ``frames`` windows.
    """
    if frames < 1:
        raise InvalidParameterError("frames must be >= 1")
    if scene.microphones.shape[0] < 2:
        raise InvalidParameterError("profiling the localization path needs at least 2 microphones")
    grid = DoaGrid.hemisphere(5.0) if grid is None else grid
    hop = window // 2 if hop is None else hop
    timer = StageTimer()
    for name in STAGES:
        timer.totals[name] = 0.0

    t_start = time.perf_counter()
    channels = render(scene, timer=timer).channels
    starts = np.arange(0, channels.shape[1] - window + 1, hop)
    if starts.size == 0:
        raise InvalidParameterError("rendered signal is shorter than one analysis window")

    mics = scene.microphones
    win = analysis_window(window)
    with timer.stage("srp_map"):
        tables = build_lag_tables(mics, grid, scene.c, scene.fs, window, interpolation)
    fast, direct = [], []
    for k in range(frames):
        s = starts[k % starts.size]
        frame = Frame(channels[:, s:s + window] * win, scene.fs)
        t0 = time.perf_counter()
        with timer.stage("gcc"):
            corr = pair_correlations(frame, tables.pairs, tables.nfft, tables.oversampling)
        with timer.stage("srp_map"):
            steer_correlations(frame, corr, tables)
        t1 = time.perf_counter()
        srp_map_direct(frame, mics, grid, scene.c)
        t2 = time.perf_counter()
        fast.append(t1 - t0)
        direct.append(t2 - t1)
    total = time.perf_counter() - t_start

    config = {
        "fs": scene.fs, "n_microphones": int(mics.shape[0]), "n_samples": scene.n_samples,
        "n_directions": len(grid), "window": window, "hop": hop, "frames": frames,
        "interpolation": interpolation, "render_interpolation": scene.interpolation,
        "air_absorption": scene.air_absorption, "reflection": scene.reflection is not None,
    }
    return ProfileReport({name: timer.totals[name] for name in STAGES}, total, frames,
                         LatencyStats.of(fast), LatencyStats.of(direct), config)
