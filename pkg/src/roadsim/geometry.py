"""Scene geometry: points, source trajectories and ground-reflection paths.

The road is the plane ``z = 0``. Every trajectory is parameterized by arc
length, and each segment has its own constant speed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidGeometryError, InvalidParameterError, OutOfRangeError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL3_NODES, _GL3_WEIGHTS = np.polynomial.legendre.leggauss(3)
_TABLE_SIZE = 1024
_TIME_SLACK = 1e-9


class Point3(NamedTuple):
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


def as_point(p) -> Point3:
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise InvalidGeometryError(f"expected three finite coordinates, got {p!r}")
    return Point3(float(arr[0]), float(arr[1]), float(arr[2]))


# ---------------------------------------------------------------------------
# Bezier helpers

def _bezier_eval(ctrl: np.ndarray, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)[..., None]
    v = 1.0 - u
    return (v ** 3 * ctrl[0] + 3 * v ** 2 * u * ctrl[1]
            + 3 * v * u ** 2 * ctrl[2] + u ** 3 * ctrl[3])


def _bezier_speed(ctrl: np.ndarray, u: np.ndarray) -> np.ndarray:
    """|dB/du| for a cubic segment."""
    u = np.asarray(u, dtype=float)[..., None]
    v = 1.0 - u
    deriv = 3.0 * (v ** 2 * (ctrl[1] - ctrl[0]) + 2 * v * u * (ctrl[2] - ctrl[1])
                   + u ** 2 * (ctrl[3] - ctrl[2]))
    return np.sqrt(np.einsum("...k,...k->...", deriv, deriv))


def _gauss_legendre(f, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[..., None] + half[..., None] * _GL_NODES
    return half * np.sum(_GL_WEIGHTS * f(nodes), axis=-1)


def adaptive_arc_length(ctrl: np.ndarray, a: float = 0.0, b: float = 1.0,
                        tol: float = 1e-6, _depth: int = 0) -> float:
    """Arc length of a cubic Bezier over ``[a, b]`` by adaptive Gauss-Legendre."""
    f = lambda u: _bezier_speed(ctrl, u)  # noqa: E731
    m = 0.5 * (a + b)
    whole = float(_gauss_legendre(f, a, b))
    left = float(_gauss_legendre(f, a, m))
    right = float(_gauss_legendre(f, m, b))
    if abs(left + right - whole) <= tol or _depth >= 40:
        return left + right
    return (adaptive_arc_length(ctrl, a, m, tol / 2, _depth + 1)
            + adaptive_arc_length(ctrl, m, b, tol / 2, _depth + 1))


# ---------------------------------------------------------------------------
# Trajectory

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-parameterized source path.

    ``kind`` is ``"static"``, ``"polyline"`` or ``"bezier"``. A Bezier
    trajectory holds ``3k + 1`` control points forming ``k`` chained cubic
    segments. ``speeds`` has one entry per segment. Before ``start_time`` the
    source rests at its first waypoint.
    """

    kind: str
    waypoints: tuple[Point3, ...]
    speeds: tuple[float, ...] = ()
    start_time: float = 0.0
    _ctrl: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = tuple(as_point(p) for p in self.waypoints)
        object.__setattr__(self, "waypoints", pts)
        object.__setattr__(self, "speeds", tuple(float(s) for s in self.speeds))
        object.__setattr__(self, "start_time", float(self.start_time))
        if self.kind not in ("static", "polyline", "bezier"):
            raise InvalidParameterError(f"unknown trajectory kind {self.kind!r}")
        if not pts:
            raise InvalidGeometryError("trajectory needs at least one waypoint")
        if any(p.z <= 0 for p in pts):
            raise InvalidGeometryError("every waypoint must lie above the road (z > 0)")
        if self.start_time < 0 or not np.isfinite(self.start_time):
            raise InvalidParameterError("start_time must be finite and >= 0")
        ctrl = np.array(pts, dtype=float)
        object.__setattr__(self, "_ctrl", ctrl)
        if self.kind == "static":
            if len(pts) != 1:
                raise InvalidGeometryError("static trajectory takes exactly one point")
            return
        if self.kind == "polyline":
            n_seg = len(pts) - 1
            if n_seg < 1:
                raise InvalidGeometryError("polyline needs at least two waypoints")
        else:
            if len(pts) < 4 or (len(pts) - 1) % 3:
                raise InvalidGeometryError("bezier chain needs 3k+1 control points")
            n_seg = (len(pts) - 1) // 3
        if len(self.speeds) != n_seg:
            raise InvalidParameterError(
                f"expected {n_seg} segment speeds, got {len(self.speeds)}")
        if any(not (s > 0 and np.isfinite(s)) for s in self.speeds):
            raise InvalidParameterError("segment speeds must be finite and > 0")
        if np.any(self.segment_lengths <= 0):
            raise InvalidGeometryError("zero-length trajectory segment")

    # -- constructors -------------------------------------------------------
    @classmethod
    def static(cls, point) -> "Trajectory":
        return cls("static", (point,))

    @classmethod
    def polyline(cls, points: Sequence, speed, start_time: float = 0.0) -> "Trajectory":
        n_seg = len(points) - 1
        speeds = np.broadcast_to(np.asarray(speed, dtype=float), (max(n_seg, 0),))
        return cls("polyline", tuple(points), tuple(speeds), start_time)

    @classmethod
    def bezier(cls, control_points: Sequence, speed, start_time: float = 0.0) -> "Trajectory":
        n_seg = max((len(control_points) - 1) // 3, 0)
        speeds = np.broadcast_to(np.asarray(speed, dtype=float), (n_seg,))
        return cls("bezier", tuple(control_points), tuple(speeds), start_time)

    # -- derived quantities -------------------------------------------------
    @cached_property
    def segment_lengths(self) -> np.ndarray:
        if self.kind == "static":
            return np.zeros(0)
        if self.kind == "polyline":
            return np.linalg.norm(np.diff(self._ctrl, axis=0), axis=1)
        return np.array([adaptive_arc_length(seg) for seg in self._segments])

    @cached_property
    def _segments(self) -> list[np.ndarray]:
        return [self._ctrl[3 * i: 3 * i + 4] for i in range((len(self._ctrl) - 1) // 3)]

    @cached_property
    def _cum_length(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths)])

    @cached_property
    def _cum_time(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths / np.asarray(self.speeds))])

    @cached_property
    def _arc_tables(self) -> list[np.ndarray]:
        # cumulative arc length at uniformly spaced parameter nodes, per segment
        u = np.linspace(0.0, 1.0, _TABLE_SIZE + 1)
        tables = []
        for seg in self._segments:
            pieces = _gauss_legendre(lambda q: _bezier_speed(seg, q), u[:-1], u[1:])
            tables.append(np.concatenate([[0.0], np.cumsum(pieces)]))
        return tables

    @property
    def length(self) -> float:
        return float(self._cum_length[-1])

    @property
    def duration(self) -> float:
        """Time covered by the trajectory, including the start offset."""
        if self.kind == "static":
            return float("inf")
        return self.start_time + float(self._cum_time[-1])

    @property
    def max_speed(self) -> float:
        return max(self.speeds, default=0.0)

    # -- evaluation ---------------------------------------------------------
    def distance_at(self, t) -> np.ndarray:
        """Arc length travelled at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < -_TIME_SLACK) or np.any(t > self.duration + _TIME_SLACK):
            raise OutOfRangeError(
                f"time outside trajectory span [0, {self.duration:.6g}] s")
        if self.kind == "static":
            return np.zeros_like(t)
        local = np.clip(t - self.start_time, 0.0, self._cum_time[-1])
        seg = np.clip(np.searchsorted(self._cum_time, local, side="right") - 1,
                      0, len(self.speeds) - 1)
        speeds = np.asarray(self.speeds)[seg]
        s = self._cum_length[seg] + speeds * (local - self._cum_time[seg])
        return np.minimum(s, self._cum_length[seg + 1])

    def _point_at_length(self, s: np.ndarray) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s.shape + (3,))
        n_seg = len(self.speeds)
        seg = np.clip(np.searchsorted(self._cum_length, s, side="right") - 1, 0, n_seg - 1)
        local = np.clip(s - self._cum_length[seg], 0.0, None)
        if self.kind == "polyline":
            a = self._ctrl[seg]
            b = self._ctrl[seg + 1]
            frac = np.clip(local / self.segment_lengths[seg], 0.0, 1.0)
            return a + frac[:, None] * (b - a)
        for i, ctrl in enumerate(self._segments):
            mask = seg == i
            if np.any(mask):
                u = self._invert_arc(i, local[mask])
                out[mask] = _bezier_eval(ctrl, u)
        return out

    def _invert_arc(self, i: int, s: np.ndarray) -> np.ndarray:
        """Parameter u with arc length ``s`` on Bezier segment ``i``."""
        ctrl = self._segments[i]
        table = self._arc_tables[i]
        s = np.clip(s, 0.0, table[-1])
        k = np.clip(np.searchsorted(table, s, side="right") - 1, 0, _TABLE_SIZE - 1)
        u0 = k / _TABLE_SIZE
        u1 = (k + 1) / _TABLE_SIZE
        span = table[k + 1] - table[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(span > 0, u0 + (s - table[k]) / span * (u1 - u0), u0)
        # Table cells are short enough that a 3-point rule is exact to
        # rounding and two Newton steps from the linear guess converge.
        for _ in range(2):
            speed = _bezier_speed(ctrl, u)
            half = 0.5 * (u - u0)
            nodes = (u0 + half)[:, None] + half[:, None] * _GL3_NODES
            resid = table[k] + half * (_bezier_speed(ctrl, nodes) @ _GL3_WEIGHTS) - s
            step = np.where(speed > 0, resid / np.where(speed > 0, speed, 1.0), 0.0)
            u = np.clip(u - step, u0, u1)
        return u

    def positions_at(self, t) -> np.ndarray:
        """Positions at an array of times, shape ``t.shape + (3,)``."""
        t = np.asarray(t, dtype=float)
        s = self.distance_at(t)
        if self.kind == "static":
            return np.broadcast_to(self._ctrl[0], t.shape + (3,)).copy()
        return self._point_at_length(s.reshape(-1)).reshape(t.shape + (3,))

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "waypoints": [list(p) for p in self.waypoints],
            "speeds": list(self.speeds),
            "start_time": self.start_time,
        }

    @classmethod
    def from_description(cls, desc: dict) -> "Trajectory":
        return cls(desc["kind"], tuple(map(tuple, desc["waypoints"])),
                   tuple(desc.get("speeds", ())), desc.get("start_time", 0.0))

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.kind == other.kind and self.waypoints == other.waypoints
                and self.speeds == other.speeds and self.start_time == other.start_time)

    def __hash__(self):
        return hash((self.kind, self.waypoints, self.speeds, self.start_time))


def position_at(traj: Trajectory, t: float) -> Point3:
    """Source position at time ``t`` (seconds)."""
    return Point3(*map(float, traj.positions_at(np.asarray([t]))[0]))


# ---------------------------------------------------------------------------
# Direct and reflected paths

@dataclass(frozen=True)
class PathGeometry:
    d1: float
    d2: float
    d3: float
    reflection_point: Point3


def image_source(p) -> Point3:
    """Mirror a point across the road plane."""
    p = as_point(p)
    return Point3(p.x, p.y, -p.z)


def path_geometry(src, mic) -> PathGeometry:
    """Direct length ``d1`` and the two legs ``d2``, ``d3`` of the ground bounce."""
    s = as_point(src)
    m = as_point(mic)
    if s.z <= 0 or m.z <= 0:
        raise InvalidGeometryError("source and microphone must be above the road")
    if s == m:
        raise InvalidGeometryError("source and microphone coincide")
    d1, d2, d3, refl = path_lengths(np.asarray(s)[None], np.asarray(m))
    return PathGeometry(float(d1[0]), float(d2[0]), float(d3[0]), Point3(*map(float, refl[0])))


def path_lengths(src: np.ndarray, mic: np.ndarray):
    """Vectorized path lengths for source positions ``(n, 3)``.

    ``mic`` is one position or one per source row.

    Returns ``(d1, d2, d3, reflection_points)``.
    """
    src = np.asarray(src, dtype=float)
    mic = np.asarray(mic, dtype=float)
    zs = src[:, 2]
    zm = mic[..., 2]
    frac = (zs / (zs + zm))[:, None]
    refl = src + frac * (mic - src)
    refl[:, 2] = 0.0
    d1 = np.linalg.norm(src - mic, axis=1)
    d2 = np.linalg.norm(src - refl, axis=1)
    d3 = np.linalg.norm(refl - mic, axis=1)
    return d1, d2, d3, refl


def direction_to(src, mic) -> np.ndarray:
    """Unit vector(s) pointing from ``mic`` toward ``src``."""
    v = np.asarray(src, dtype=float) - np.asarray(mic, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def azimuth_elevation(direction) -> tuple[np.ndarray, np.ndarray]:
    """Azimuth (from +x toward +y) and elevation in degrees."""
    d = np.asarray(direction, dtype=float)
    az = np.degrees(np.arctan2(d[..., 1], d[..., 0])) % 360.0
    el = np.degrees(np.arcsin(np.clip(d[..., 2], -1.0, 1.0)))
    return az, el
