import numpy as np
import pytest

from trajkit.core import CameraModel, KinematicState3, seeded_rng
from trajkit.errors import BehindCamera
from trajkit.projection import (PROJECTION_EPS, jacobian_time_derivative, project,
                                project_many, project_state, project_world,
                                projection_jacobian)

from conftest import random_camera, random_in_fov_point
from oracles import numeric_jacobian, scalar_project


def test_worked_example(fisheye):
    # fx=fy=600, c=(640,360), xi=1, k1=0.1, p=(3,4,12):
    # rho=13, denom=25, x'=0.12, y'=0.16, r2=0.04, delta=1.004
    pixel, inside = project(fisheye, [3.0, 4.0, 12.0])
    assert inside
    assert np.allclose(pixel, [712.288, 456.384], atol=1e-9)


def test_matches_scalar_oracle(fisheye):
    rng = seeded_rng(0, "proj-oracle")
    for _ in range(200):
        p = random_in_fov_point(fisheye, rng)
        u, v, _ = scalar_project(fisheye, p)
        pixel, _ = project(fisheye, p)
        assert np.allclose(pixel, [u, v], rtol=1e-12, atol=1e-9)


def test_pinhole_reduction_exact(pinhole):
    # xi = k1 = k2 = 0 must reduce to u = fx*x/z + cx with no residual
    rng = seeded_rng(1, "pinhole")
    for _ in range(100):
        p = np.array([rng.uniform(-5, 5), rng.uniform(-3, 3), rng.uniform(2, 40)])
        pixel, _ = project(pinhole, p)
        # same association as the chain (x/z first) so equality is bitwise
        want = [pinhole.fx * (p[0] / p[2]) + pinhole.cx,
                pinhole.fy * (p[1] / p[2]) + pinhole.cy]
        assert np.array_equal(pixel, np.asarray(want))


def test_behind_camera_raises(fisheye, pinhole):
    with pytest.raises(BehindCamera):
        project(pinhole, [0.0, 0.0, -1.0])
    # unified model: z + xi*rho <= eps even for z slightly negative only
    # when the mirror term cannot compensate
    with pytest.raises(BehindCamera):
        project(fisheye, [0.0, 0.0, 0.0])


def test_project_many_flags_invalid(pinhole):
    pts = np.array([[0, 0, 10.0], [0, 0, -5.0], [1e6, 0, 1.0]])
    pixels, valid, inside = project_many(pinhole, pts)
    assert valid[0] and not valid[1]
    assert inside[0] and not inside[1]
    assert valid[2] and not inside[2]          # projects but far off-image
    assert np.all(np.isnan(pixels[1]))


def test_project_world_applies_extrinsic(pinhole):
    cam = pinhole.with_extrinsic(np.eye(3), [0.0, 0.0, 5.0])
    pixel_world, _ = project_world(cam, [0.0, 0.0, 5.0])
    pixel_cam, _ = project(pinhole, [0.0, 0.0, 10.0])
    assert np.allclose(pixel_world, pixel_cam)


def test_jacobian_matches_fd_sweep():
    # acceptance criterion: 1000 points across xi in [0,1.2], k1 in [-0.2,0.2]
    # exercised at full scale in test_acceptance; spot-check 150 here
    rng = seeded_rng(2, "jac")
    worst = 0.0
    for _ in range(150):
        cam = random_camera(rng)
        p = random_in_fov_point(cam, rng)
        J = projection_jacobian(cam, p)
        J_fd = numeric_jacobian(cam, p)
        rel = np.linalg.norm(J - J_fd) / np.linalg.norm(J_fd)
        worst = max(worst, rel)
    assert worst < 1e-6


def test_jacobian_batch_matches_single(fisheye):
    rng = seeded_rng(3, "jac-batch")
    pts = np.stack([random_in_fov_point(fisheye, rng) for _ in range(10)])
    Jb = projection_jacobian(fisheye, pts)
    for i in range(10):
        assert np.array_equal(Jb[i], projection_jacobian(fisheye, pts[i]))


def test_jacobian_behind_camera(fisheye):
    with pytest.raises(BehindCamera):
        projection_jacobian(fisheye, [0.0, 0.0, 0.0])


def test_jdot_zero_velocity_is_exact_zero(fisheye):
    Jdot = jacobian_time_derivative(fisheye, [1.0, 2.0, 10.0], [0.0, 0.0, 0.0])
    assert np.array_equal(Jdot, np.zeros((2, 3)))


def test_jdot_matches_direct_difference(fisheye):
    # J along a moving point: compare against a coarser two-sided difference
    p = np.array([1.0, -2.0, 15.0])
    v = np.array([2.0, 1.0, -0.5])
    Jdot = jacobian_time_derivative(fisheye, p, v)
    h = 1e-4
    ref = (projection_jacobian(fisheye, p + h * v)
           - projection_jacobian(fisheye, p - h * v)) / (2 * h)
    assert np.allclose(Jdot, ref, atol=1e-4)


def test_project_state_velocity_chain_rule(fisheye):
    # pixel velocity must equal the time derivative of the projected path
    p = np.array([1.0, 1.5, 20.0])
    v = np.array([3.0, -1.0, 0.5])
    state = KinematicState3(0.0, p, v, np.zeros(3))
    img = project_state(fisheye, state)
    h = 1e-6
    up, _ = project(fisheye, p + h * v)
    dn, _ = project(fisheye, p - h * v)
    assert np.allclose(img.pixel_velocity, (up - dn) / (2 * h), atol=1e-5)


def test_project_state_acceleration_chain_rule(fisheye):
    # d2u/dt2 = J a + Jdot v, checked against a second difference of the
    # projected quadratic path
    p = np.array([0.5, -1.0, 18.0])
    v = np.array([2.0, 1.0, -0.3])
    a = np.array([0.4, -0.2, 0.1])
    state = KinematicState3(0.0, p, v, a)
    img = project_state(fisheye, state)
    h = 1e-4

    def at(t):
        pix, _ = project(fisheye, p + v * t + 0.5 * a * t * t)
        return pix

    ref = (at(h) - 2 * at(0.0) + at(-h)) / (h * h)
    assert np.allclose(img.pixel_acceleration, ref, atol=1e-3)


def test_project_state_rotates_derivatives(pinhole):
    # 90 deg yaw: world x-velocity becomes camera -z (pure depth change at
    # the principal point gives zero pixel velocity for a centered point)
    R = np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    cam = pinhole.with_extrinsic(R, [0.0, 0.0, 0.0])
    state = KinematicState3(0.0, [10.0, 0.0, 0.0], [1.0, 0.0, 0.0], np.zeros(3))
    img = project_state(cam, state)
    assert np.allclose(img.pixel, [pinhole.cx, pinhole.cy])
    assert np.allclose(img.pixel_velocity, [0.0, 0.0], atol=1e-9)


def test_projection_eps_boundary(pinhole):
    pixel, _ = project(pinhole, [0.0, 0.0, 2 * PROJECTION_EPS])
    assert np.allclose(pixel, [pinhole.cx, pinhole.cy])
    with pytest.raises(BehindCamera):
        project(pinhole, [0.0, 0.0, PROJECTION_EPS])
