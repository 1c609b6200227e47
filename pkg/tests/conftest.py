import numpy as np
import pytest

from trajkit.core import CameraModel


@pytest.fixture
def fisheye():
    """The worked-example camera: xi=1, k1=0.1."""
    return CameraModel(600.0, 600.0, 640.0, 360.0, xi=1.0, k1=0.1, k2=0.0,
                       width=1280, height=720)


@pytest.fixture
def pinhole():
    return CameraModel(600.0, 600.0, 640.0, 360.0, xi=0.0, k1=0.0, k2=0.0,
                       width=1280, height=720)


@pytest.fixture
def scene_camera():
    """Distortion-free fisheye used by the bundled scenes."""
    return CameraModel(600.0, 600.0, 640.0, 360.0, xi=1.0, k1=0.0, k2=0.0,
                       width=1280, height=720)


def random_camera(rng) -> CameraModel:
    """Camera with xi in [0, 1.2] and k1 in [-0.2, 0.2], random extrinsic-free."""
    return CameraModel(
        fx=float(rng.uniform(300, 900)), fy=float(rng.uniform(300, 900)),
        cx=float(rng.uniform(500, 700)), cy=float(rng.uniform(300, 400)),
        xi=float(rng.uniform(0.0, 1.2)),
        k1=float(rng.uniform(-0.2, 0.2)), k2=float(rng.uniform(-0.05, 0.05)),
        width=1280, height=720,
    )


def random_in_fov_point(camera: CameraModel, rng) -> np.ndarray:
    """Camera-frame point that projects inside the image, away from the rim."""
    from trajkit.projection import project

    while True:
        p = np.array([rng.uniform(-8, 8), rng.uniform(-5, 5), rng.uniform(8, 50)])
        try:
            pixel, inside = project(camera, p)
        except Exception:
            continue
        if inside and np.all(np.abs(pixel - [camera.cx, camera.cy]) <
                             [camera.width * 0.4, camera.height * 0.4]):
            return p
