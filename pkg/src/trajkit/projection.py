"""Unified fisheye projection and its derivatives.

Projection chain for a camera-frame point p = (x, y, z):

    rho   = ||p||
    denom = z + xi * rho
    x' = x / denom,  y' = y / denom          (unified-model normalization)
    r2 = x'^2 + y'^2
    delta = 1 + k1 * r2 + k2 * r2^2          (radial distortion)
    u = fx * x' * delta + cx
    v = fy * y' * delta + cy

xi = 0, k1 = k2 = 0 reduces the chain to the pinhole model exactly.

The analytic Jacobian d(u,v)/d(x,y,z) differentiates the full chain,
including the mirror term xi and the distortion polynomial. The time
derivative of the Jacobian is taken by central finite differences along the
velocity (step 1e-5 s): the analytic J-dot is a third-order tensor
contraction that buys nothing at the accuracy needed downstream.
"""

from __future__ import annotations

import numpy as np

from .core import CameraModel, ImageMotionState2, KinematicState3, world_to_camera
from .errors import BehindCamera

__all__ = [
    "PROJECTION_EPS",
    "project",
    "project_many",
    "project_world",
    "projection_jacobian",
    "jacobian_time_derivative",
    "project_state",
]

# Denominator threshold below which a point does not project.
PROJECTION_EPS = 1e-9

# Finite-difference step (seconds) for the Jacobian time derivative.
JDOT_FD_STEP = 1e-5


def _chain(camera: CameraModel, pts: np.ndarray):
    """Evaluate the projection chain on an (N, 3) batch.

    Returns (pixels (N,2), denom (N,)); rows with denom <= eps hold NaN pixels.
    """
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    rho = np.linalg.norm(pts, axis=1)
    denom = z + camera.xi * rho
    valid = denom > PROJECTION_EPS
    safe = np.where(valid, denom, 1.0)
    xn = x / safe
    yn = y / safe
    r2 = xn * xn + yn * yn
    delta = 1.0 + camera.k1 * r2 + camera.k2 * r2 * r2
    u = camera.fx * xn * delta + camera.cx
    v = camera.fy * yn * delta + camera.cy
    pixels = np.stack([u, v], axis=1)
    pixels[~valid] = np.nan
    return pixels, denom


def _in_bounds(camera: CameraModel, pixels: np.ndarray) -> np.ndarray:
    u, v = pixels[:, 0], pixels[:, 1]
    return ((u >= 0) & (u < camera.width) & (v >= 0) & (v < camera.height)
            & np.isfinite(u) & np.isfinite(v))


def project(camera: CameraModel, p) -> tuple[np.ndarray, bool]:
    """Project one camera-frame point to pixels.

    Returns (pixel (2,), in_bounds). Raises BehindCamera when the unified
    denominator z + xi*||p|| falls at or below the projection epsilon.
    """
    p = np.asarray(p, dtype=float).reshape(1, 3)
    pixels, denom = _chain(camera, p)
    if denom[0] <= PROJECTION_EPS:
        raise BehindCamera(f"denominator {denom[0]:.3e} <= {PROJECTION_EPS:.0e}")
    return pixels[0], bool(_in_bounds(camera, pixels)[0])


def project_many(camera: CameraModel, pts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project an (N, 3) batch of camera-frame points.

    Returns (pixels (N,2), valid (N,), in_bounds (N,)). Instead of raising,
    rows that fail the denominator test come back with valid=False and NaN
    pixels; in_bounds is False for those rows.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    pixels, denom = _chain(camera, pts)
    valid = denom > PROJECTION_EPS
    return pixels, valid, _in_bounds(camera, pixels) & valid


def project_world(camera: CameraModel, p) -> tuple[np.ndarray, bool]:
    """Project one world-frame point (applies the extrinsic first)."""
    return project(camera, world_to_camera(camera, p))


def projection_jacobian(camera: CameraModel, p) -> np.ndarray:
    """Analytic Jacobian d(u,v)/d(x,y,z) of the projection chain.

    Accepts a single (3,) camera-frame point or an (N, 3) batch; returns
    (2, 3) or (N, 2, 3) accordingly. Raises BehindCamera if any point fails
    the denominator test.
    """
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    pts = p.reshape(-1, 3)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    rho = np.linalg.norm(pts, axis=1)
    denom = z + camera.xi * rho
    if np.any(denom <= PROJECTION_EPS):
        bad = float(np.min(denom))
        raise BehindCamera(f"denominator {bad:.3e} <= {PROJECTION_EPS:.0e}")

    # d(denom)/dp; rho > 0 is implied by denom > eps unless xi == 0 and z > 0,
    # in which case the rho term vanishes anyway. Guard the division.
    rho_safe = np.where(rho > 0, rho, 1.0)
    dD = np.stack([camera.xi * x / rho_safe,
                   camera.xi * y / rho_safe,
                   1.0 + camera.xi * z / rho_safe], axis=1)  # (N, 3)

    inv = 1.0 / denom
    xn = x * inv
    yn = y * inv
    e0 = np.zeros((pts.shape[0], 3))
    e0[:, 0] = 1.0
    e1 = np.zeros((pts.shape[0], 3))
    e1[:, 1] = 1.0
    # d(x/denom) = (e_x * denom - x * dD) / denom^2
    dxn = (e0 - xn[:, None] * dD) * inv[:, None]
    dyn = (e1 - yn[:, None] * dD) * inv[:, None]

    r2 = xn * xn + yn * yn
    dr2 = 2.0 * (xn[:, None] * dxn + yn[:, None] * dyn)
    delta = 1.0 + camera.k1 * r2 + camera.k2 * r2 * r2
    ddelta = (camera.k1 + 2.0 * camera.k2 * r2)[:, None] * dr2

    du = camera.fx * (delta[:, None] * dxn + xn[:, None] * ddelta)
    dv = camera.fy * (delta[:, None] * dyn + yn[:, None] * ddelta)
    J = np.stack([du, dv], axis=1)  # (N, 2, 3)
    return J[0] if single else J


def jacobian_time_derivative(camera: CameraModel, p, velocity,
                             step: float = JDOT_FD_STEP) -> np.ndarray:
    """Time derivative of the projection Jacobian along a camera-frame velocity.

    Central finite difference: (J(p + h*V) - J(p - h*V)) / (2h) with
    h = 1e-5 s. Zero velocity yields an exactly zero matrix.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(velocity, dtype=float)
    if not np.any(v):
        return np.zeros(p.shape[:-1] + (2, 3)) if p.ndim > 1 else np.zeros((2, 3))
    jp = projection_jacobian(camera, p + step * v)
    jm = projection_jacobian(camera, p - step * v)
    return (jp - jm) / (2.0 * step)


def project_state(camera: CameraModel, state: KinematicState3) -> ImageMotionState2:
    """Propagate a world-frame kinematic state through the projection.

    pixel        = pi(p)
    pixel_vel    = J @ V
    pixel_accel  = J @ a + J_dot @ V

    The extrinsic is applied to the state first; velocities and accelerations
    rotate (translation does not affect derivatives).
    """
    R = camera.rotation
    p_c = world_to_camera(camera, state.position)
    v_c = R @ state.velocity
    a_c = R @ state.acceleration
    pixel, _ = project(camera, p_c)
    J = projection_jacobian(camera, p_c)
    Jdot = jacobian_time_derivative(camera, p_c, v_c)
    vel = J @ v_c
    acc = J @ a_c + Jdot @ v_c
    return ImageMotionState2(state.timestamp, pixel, vel, acc)
