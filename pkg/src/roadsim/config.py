"""YAML scene, array and dataset configurations.

Every config rejects unknown fields, and validation errors name the
offending field path (e.g. ``source.trajectory.waypoints.1``). Relative file
paths resolve against the directory of the config file.

Scene schema::

    fs: 16000
    c: 343.0
    seed: 0
    interpolation: sinc            # or linear
    source:
      signal: {kind: siren, type: wail, duration: 3.0}
      trajectory: {kind: polyline, waypoints: [[-30, 4, 1], [30, 4, 1]], speeds: [20]}
    microphones: [[0, 0, 1.2], [0.1, 0, 1.2]]
    atmosphere: {temperature: 20, humidity: 70, pressure: 101.325}
    reflection: {enabled: true, flow_resistivity: 3.0e7, n_taps: 11}
    air_absorption: {enabled: true, n_taps: 11, distance_step: 1.0}

Signal kinds: ``file`` (path), ``tone`` (frequency, duration), ``noise``,
``road_noise`` and ``siren`` (type: hi-low | wail | yelp | horn).
"""
from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import signals
from .datagen import DatasetSpec, Region, ingest_clip
from .errors import ConfigurationError
from .geometry import Trajectory
from .propagation import AtmosphericConditions, ReflectionModel, default_asphalt_filter
from .renderer import Scene
from .wavio import wav_read

Vec3 = tuple[float, float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# -- signals ----------------------------------------------------------------

class FileSignal(_Strict):
    kind: Literal["file"] = "file"
    path: str


class ToneSignal(_Strict):
    kind: Literal["tone"] = "tone"
    frequency: float = Field(gt=0)
    duration: float = Field(gt=0)
    amplitude: float = 1.0


class NoiseSignal(_Strict):
    kind: Literal["noise"] = "noise"
    duration: float = Field(gt=0)
    amplitude: float = 1.0


class RoadNoiseSignal(_Strict):
    kind: Literal["road_noise"] = "road_noise"
    duration: float = Field(gt=0)
    amplitude: float = 0.1


class SirenSignal(_Strict):
    kind: Literal["siren"] = "siren"
    type: Literal["hi-low", "wail", "yelp", "horn"]
    duration: float = Field(gt=0)
    amplitude: float = 0.5


SignalConfig = Annotated[
    Union[FileSignal, ToneSignal, NoiseSignal, RoadNoiseSignal, SirenSignal],
    Field(discriminator="kind"),
]


def load_signal(cfg, fs: float, seed: int, base_dir: Path) -> np.ndarray:
    if cfg.kind == "file":
        path = Path(cfg.path)
        if not path.is_absolute():
            path = base_dir / path
        data, clip_fs = wav_read(path)
        return ingest_clip(data, clip_fs, fs)
    if cfg.kind == "tone":
        return signals.tone(cfg.frequency, cfg.duration, fs, cfg.amplitude)
    rng = np.random.default_rng(seed)
    if cfg.kind == "noise":
        return signals.white_noise(cfg.duration, fs, rng, cfg.amplitude)
    if cfg.kind == "road_noise":
        return signals.road_noise(cfg.duration, fs, rng, cfg.amplitude)
    return signals.siren(cfg.type, cfg.duration, fs, cfg.amplitude)


# -- scene ------------------------------------------------------------------

def _above_road(points):
    for i, p in enumerate(points):
        if p[2] <= 0:
            raise ValueError(f"point {i} has z = {p[2]} but must lie above the road (z > 0)")
    return points


class TrajectoryConfig(_Strict):
    kind: Literal["static", "polyline", "bezier"]
    waypoints: list[Vec3] = Field(min_length=1)
    speeds: list[float] = []
    start_time: float = Field(default=0.0, ge=0)

    _check = field_validator("waypoints")(_above_road)

    def build(self) -> Trajectory:
        return Trajectory(self.kind, tuple(self.waypoints), tuple(self.speeds), self.start_time)


class SourceConfig(_Strict):
    signal: SignalConfig
    trajectory: TrajectoryConfig


class AtmosphereConfig(_Strict):
    temperature: float = Field(default=20.0, ge=-50, le=60)
    humidity: float = Field(default=70.0, gt=0, le=100)
    pressure: float = Field(default=101.325, ge=50, le=120)

    def build(self) -> AtmosphericConditions:
        return AtmosphericConditions(self.temperature, self.humidity, self.pressure)


class ReflectionConfig(_Strict):
    enabled: bool = True
    flow_resistivity: float = Field(default=3e7, gt=0)
    n_taps: int = Field(default=11, ge=3)
    taps: Optional[list[float]] = None

    def build(self, fs: float):
        if not self.enabled:
            return None
        if self.taps is not None:
            return ReflectionModel.from_taps(self.taps)
        return default_asphalt_filter(fs, self.n_taps, self.flow_resistivity)


class AirConfig(_Strict):
    enabled: bool = True
    n_taps: int = Field(default=11, ge=1)
    distance_step: float = Field(default=1.0, gt=0)


class SceneConfig(_Strict):
    fs: float = Field(gt=0)
    c: float = Field(default=343.0, gt=0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    interpolation: Literal["sinc", "linear"] = "sinc"
    source: SourceConfig
    microphones: list[Vec3] = Field(min_length=1)
    atmosphere: AtmosphereConfig = AtmosphereConfig()
    reflection: ReflectionConfig = ReflectionConfig()
    air_absorption: AirConfig = AirConfig()

    _check = field_validator("microphones")(_above_road)

    def to_scene(self, base_dir=".") -> Scene:
        try:
            signal = load_signal(self.source.signal, self.fs, self.seed, Path(base_dir))
            return Scene(
                fs=self.fs, signal=signal, trajectory=self.source.trajectory.build(),
                microphones=np.array(self.microphones), c=self.c,
                atmosphere=self.atmosphere.build(), reflection=self.reflection.build(self.fs),
                air_absorption=self.air_absorption.enabled, interpolation=self.interpolation,
                seed=self.seed, air_step=self.air_absorption.distance_step,
                air_taps=self.air_absorption.n_taps)
        except (ValueError, OSError) as exc:
            raise ConfigurationError(f"scene config: {exc}") from exc


# -- microphone array ---------------------------------------------------------

class ArrayConfig(_Strict):
    microphones: list[Vec3] = Field(min_length=2)
    c: float = Field(default=343.0, gt=0)


# -- dataset ----------------------------------------------------------------

class RegionConfig(_Strict):
    low: Vec3
    high: Vec3


class DatasetConfig(_Strict):
    count: int = Field(ge=0)
    fs: float = Field(gt=0)
    duration: float = Field(gt=0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    snr_range: tuple[float, float] = (-30.0, 0.0)
    classes: dict[str, list[SignalConfig]]
    noise: list[SignalConfig] = Field(min_length=1)
    region: RegionConfig
    speed_range: tuple[float, float] = (5.0, 20.0)
    microphones: list[Vec3] = [(0.0, 0.0, 1.0)]
    c: float = Field(default=343.0, gt=0)
    atmosphere: AtmosphereConfig = AtmosphereConfig()
    reflection: bool = True
    air_absorption: bool = True
    interpolation: Literal["sinc", "linear"] = "sinc"
    label_hop: float = Field(default=0.1, gt=0)
    encoding: Literal["float32", "pcm16"] = "float32"

    _check = field_validator("microphones")(_above_road)

    def to_spec(self, base_dir=".") -> DatasetSpec:
        base = Path(base_dir)
        try:
            # pool clips get fixed seeds so generated noise clips never depend on run order
            classes = {
                name: [load_signal(s, self.fs, self.seed + 7919 * i + j, base)
                       for j, s in enumerate(pool)]
                for i, (name, pool) in enumerate(sorted(self.classes.items()))
            }
            noise = [load_signal(s, self.fs, self.seed + 104729 + j, base)
                     for j, s in enumerate(self.noise)]
            return DatasetSpec(
                count=self.count, fs=self.fs, duration=self.duration, classes=classes,
                noise=noise, region=Region(self.region.low, self.region.high),
                speed_range=self.speed_range, snr_range=self.snr_range,
                microphones=np.array(self.microphones), seed=self.seed, c=self.c,
                atmosphere=self.atmosphere.build(), air_absorption=self.air_absorption,
                reflection=self.reflection, interpolation=self.interpolation,
                label_hop=self.label_hop, encoding=self.encoding)
        except (ValueError, OSError) as exc:
            raise ConfigurationError(f"dataset config: {exc}") from exc


# -- loading / dumping ---------------------------------------------------------

def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_config(model: type[BaseModel], text: str, source: str = "<string>"):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{source}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source}: top level must be a mapping")
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(f"{source}: {_format_errors(exc)}") from exc


def load_config(model: type[BaseModel], path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(model, text, str(path))


def dump_config(cfg: BaseModel) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)


def load_scene(path) -> Scene:
    path = Path(path)
    return load_config(SceneConfig, path).to_scene(path.parent)
