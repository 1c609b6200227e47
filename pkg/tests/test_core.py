import numpy as np
import pytest

from trajkit.core import (CameraModel, ImageMotionState2, KinematicState3, Point3,
                          PointCloudFrame, Trajectory, seeded_rng, world_to_camera)
from trajkit.errors import InvalidConfig


def test_point3_roundtrip():
    p = Point3(1.0, -2.0, 3.5)
    assert np.array_equal(p.as_array(), [1.0, -2.0, 3.5])
    assert Point3.from_array(p.as_array()) == p


def test_point3_rejects_nonfinite():
    with pytest.raises(ValueError):
        Point3(1.0, np.nan, 0.0)


def test_frame_normalizes_empty_points():
    f = PointCloudFrame(0.0, "lidar0", np.empty(0))
    assert f.points.shape == (0, 3)
    assert len(f) == 0


def test_frame_rejects_bad_shape():
    with pytest.raises(ValueError):
        PointCloudFrame(0.0, "lidar0", np.zeros((4, 2)))


def test_kinematic_state_vector_roundtrip():
    s = KinematicState3(1.0, [1, 2, 3], [4, 5, 6], [7, 8, 9])
    assert np.array_equal(s.as_vector(), np.arange(1, 10, dtype=float))
    s2 = KinematicState3.from_vector(1.0, s.as_vector())
    assert np.array_equal(s2.position, s.position)
    assert np.array_equal(s2.acceleration, s.acceleration)


def test_image_state_vector_roundtrip():
    s = ImageMotionState2(0.5, [10, 20], [1, -1], [0.1, 0.2], accel_valid=False)
    v = s.as_vector()
    assert v.shape == (6,)
    s2 = ImageMotionState2.from_vector(0.5, v, accel_valid=False)
    assert not s2.accel_valid
    assert np.array_equal(s2.pixel, [10, 20])


def test_camera_pinhole_reduction_flags():
    cam = CameraModel(600, 600, 640, 360, xi=0.0, k1=0.0, k2=0.0, width=1280, height=720)
    assert cam.xi == 0.0 and cam.k1 == 0.0


def test_camera_rejects_nonorthonormal_rotation():
    with pytest.raises(ValueError):
        CameraModel(600, 600, 640, 360, xi=0, k1=0, k2=0, width=1280, height=720,
                    rotation=np.ones((3, 3)))


def test_camera_dict_roundtrip(fisheye):
    d = fisheye.to_dict()
    cam = CameraModel.from_dict(d)
    assert cam.fx == fisheye.fx and cam.xi == fisheye.xi
    assert np.array_equal(cam.rotation, fisheye.rotation)


def test_camera_from_dict_rejects_unknown_key():
    d = {"fx": 600, "fy": 600, "cx": 640, "cy": 360, "width": 1280, "height": 720,
         "focal": 1.0}
    with pytest.raises(InvalidConfig, match="camera.focal"):
        CameraModel.from_dict(d)


def test_camera_from_dict_rejects_missing_required():
    with pytest.raises(InvalidConfig, match="camera.fy"):
        CameraModel.from_dict({"fx": 600, "cx": 640, "cy": 360, "width": 1280,
                               "height": 720})


def test_trajectory_requires_increasing_times():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 3)))


def test_trajectory_linear_interpolation():
    tr = Trajectory(np.array([0.0, 1.0]), np.array([[0, 0, 0], [2, 0, 0]], float))
    assert np.allclose(tr.position_at(0.5), [1, 0, 0])


def test_trajectory_hermite_exact_on_quadratic():
    # quadratic motion with stored velocities: Hermite interpolation is exact
    t = np.linspace(0.0, 2.0, 5)
    pos = np.stack([t ** 2, t, np.zeros_like(t)], axis=1)
    vel = np.stack([2 * t, np.ones_like(t), np.zeros_like(t)], axis=1)
    tr = Trajectory(t, pos, vel)
    tq = np.linspace(0.0, 2.0, 41)
    want = np.stack([tq ** 2, tq, np.zeros_like(tq)], axis=1)
    assert np.allclose(tr.position_at(tq), want, atol=1e-12)


def test_trajectory_rejects_out_of_span_query():
    tr = Trajectory(np.array([0.0, 1.0]), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        tr.position_at(2.0)


def test_world_to_camera_identity_extrinsic(fisheye):
    p = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(world_to_camera(fisheye, p), p)


def test_world_to_camera_batch(fisheye):
    cam = fisheye.with_extrinsic(np.eye(3), [0, 0, 1])
    pts = np.zeros((4, 3))
    out = world_to_camera(cam, pts)
    assert out.shape == (4, 3)
    assert np.all(out[:, 2] == 1.0)


def test_seeded_rng_reproducible():
    a = seeded_rng(7, "lidar0").normal(size=8)
    b = seeded_rng(7, "lidar0").normal(size=8)
    assert np.array_equal(a, b)


def test_seeded_rng_streams_differ():
    a = seeded_rng(7, "lidar0").normal(size=8)
    b = seeded_rng(7, "lidar1").normal(size=8)
    c = seeded_rng(8, "lidar0").normal(size=8)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_seeded_rng_rejects_negative_stream():
    with pytest.raises(ValueError):
        seeded_rng(0, -1)
