import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from roadsim.errors import InvalidGeometryError, InvalidParameterError, OutOfRangeError
from roadsim.geometry import (Trajectory, adaptive_arc_length, azimuth_elevation, image_source,
                              path_geometry, path_lengths, position_at)

coord = st.floats(-50, 50, allow_nan=False)
height = st.floats(0.05, 20, allow_nan=False)
points = st.tuples(coord, coord, height)


def dense_polyline(ctrl, n=100_000):
    """Oracle: sample a cubic Bezier densely and accumulate chord lengths."""
    ctrl = np.asarray(ctrl, float)
    u = np.linspace(0.0, 1.0, n + 1)[:, None]
    v = 1 - u
    pts = v**3 * ctrl[0] + 3 * v**2 * u * ctrl[1] + 3 * v * u**2 * ctrl[2] + u**3 * ctrl[3]
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return pts, np.concatenate([[0.0], np.cumsum(seg)])


def test_static_position_is_constant():
    traj = Trajectory.static((3, 1, 2))
    for t in (0.0, 1.0, 1e6):
        assert tuple(position_at(traj, t)) == (3, 1, 2)


def test_polyline_linear_motion():
    traj = Trajectory.polyline([(0, 0, 1), (10, 0, 1)], 1.0)
    assert np.allclose(position_at(traj, 5.0), (5, 0, 1))
    assert traj.duration == pytest.approx(10.0)


def test_polyline_per_segment_speeds():
    traj = Trajectory.polyline([(0, 0, 1), (10, 0, 1), (10, 10, 1)], [2.0, 5.0])
    assert traj.duration == pytest.approx(7.0)
    assert np.allclose(position_at(traj, 6.0), (10, 5, 1))


def test_start_time_holds_first_waypoint():
    traj = Trajectory.polyline([(0, 0, 1), (10, 0, 1)], 1.0, start_time=2.0)
    assert np.allclose(position_at(traj, 1.0), (0, 0, 1))
    assert np.allclose(position_at(traj, 3.0), (1, 0, 1))


def test_bezier_half_length_matches_dense_polyline():
    ctrl = [(0, 0, 1), (4, 8, 2), (10, -6, 1.5), (14, 2, 1)]
    traj = Trajectory.bezier(ctrl, 3.0)
    pts, cum = dense_polyline(ctrl)
    assert traj.length == pytest.approx(cum[-1], abs=1e-6)
    half = position_at(traj, traj.duration / 2)
    ref = np.array([np.interp(cum[-1] / 2, cum, pts[:, k]) for k in range(3)])
    assert np.linalg.norm(np.asarray(half) - ref) < 1e-4


def test_adaptive_arc_length_straight_line():
    ctrl = np.array([(0, 0, 1), (1, 0, 1), (2, 0, 1), (3, 0, 1)], float)
    assert adaptive_arc_length(ctrl) == pytest.approx(3.0, abs=1e-9)


def test_finite_difference_speed_matches_declared():
    traj = Trajectory.bezier([(0, 0, 1), (5, 10, 1), (15, -10, 2), (20, 0, 1),
                              (25, 10, 1), (30, 5, 1), (40, 0, 1)], [12.0, 7.0])
    delta = 1e-5
    t = np.linspace(0.1, traj.duration - 0.1, 50)
    v = np.linalg.norm(traj.positions_at(t + delta) - traj.positions_at(t), axis=1) / delta
    seg1 = t < traj.segment_lengths[0] / 12.0
    assert np.allclose(v[seg1], 12.0, rtol=0.01)
    assert np.allclose(v[~seg1 & (t > traj.segment_lengths[0] / 12.0 + 0.01)], 7.0, rtol=0.01)


def test_trajectory_validation():
    with pytest.raises(InvalidGeometryError):
        Trajectory.polyline([(0, 0, 0), (1, 0, 1)], 1.0)
    with pytest.raises(InvalidParameterError):
        Trajectory.polyline([(0, 0, 1), (1, 0, 1)], 0.0)
    with pytest.raises(InvalidGeometryError):
        Trajectory.bezier([(0, 0, 1), (1, 0, 1), (2, 0, 1)], 1.0)
    with pytest.raises(InvalidParameterError):
        Trajectory("spiral", [(0, 0, 1)])


def test_time_out_of_range():
    traj = Trajectory.polyline([(0, 0, 1), (10, 0, 1)], 1.0)
    with pytest.raises(OutOfRangeError):
        position_at(traj, 11.0)
    with pytest.raises(OutOfRangeError):
        position_at(traj, -1.0)


def test_description_round_trip():
    traj = Trajectory.bezier([(0, 0, 1), (1, 2, 1), (3, 2, 1), (4, 0, 1)], 2.0, start_time=0.5)
    assert Trajectory.from_description(traj.describe()) == traj


def test_image_source_examples():
    assert tuple(image_source((1, 0, 2))) == (1, 0, -2)
    assert tuple(image_source((5, 3, 0.5))) == (5, 3, -0.5)


@given(points)
def test_image_source_is_involution(p):
    assert tuple(image_source(image_source(p))) == tuple(map(float, p))


def test_path_geometry_reference_scene():
    g = path_geometry((1, 0, 2), (5, 0, 1.5))
    # law of reflection: 2 / (x - 1) = 1.5 / (5 - x)  ->  x = 23 / 7
    x = 23 / 7
    assert np.allclose(g.reflection_point, (x, 0, 0), atol=1e-12)
    assert g.d1 == pytest.approx(np.hypot(4, 0.5), abs=1e-12)
    assert g.d2 == pytest.approx(np.hypot(x - 1, 2), abs=1e-12)
    assert g.d3 == pytest.approx(np.hypot(5 - x, 1.5), abs=1e-12)
    assert (g.d1, g.d2, g.d3, g.d2 + g.d3) == pytest.approx((4.0311, 3.0372, 2.2779, 5.3151), abs=1e-4)


def test_symmetric_heights_reflect_at_midpoint():
    g = path_geometry((0, 0, 1), (4, 0, 1))
    assert np.allclose(g.reflection_point, (2, 0, 0))


def test_reflected_length_equals_image_distance_random():
    rng = np.random.default_rng(0)
    src = rng.uniform([-50, -50, 0.1], [50, 50, 10], (1000, 3))
    mic = rng.uniform([-50, -50, 0.1], [50, 50, 10], (1000, 3))
    d1, d2, d3, refl = path_lengths(src, mic)
    image = src * [1, 1, -1]
    assert np.allclose(d2 + d3, np.linalg.norm(image - mic, axis=1), rtol=1e-12)
    assert np.allclose(refl[:, 2], 0.0)


@settings(max_examples=200)
@given(points, points)
def test_equal_angles_and_triangle_inequality(src, mic):
    assume(np.linalg.norm(np.subtract(src, mic)) > 1e-6)
    g = path_geometry(src, mic)
    assert g.d2 + g.d3 >= g.d1 - 1e-9
    z = np.array([0, 0, 1.0])
    a = np.asarray(src) - np.asarray(g.reflection_point)
    b = np.asarray(mic) - np.asarray(g.reflection_point)
    ang_a = np.arctan2(np.linalg.norm(np.cross(a, z)), a @ z)
    ang_b = np.arctan2(np.linalg.norm(np.cross(b, z)), b @ z)
    assert abs(ang_a - ang_b) < 1e-9


def test_azimuth_convention():
    az, el = azimuth_elevation(np.array([[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0], [0, 0, 1]]))
    assert np.allclose(az[:4], [0, 90, 180, 270])
    assert el[4] == pytest.approx(90)
