"""Core domain types shared by every stage.

Coordinate conventions:
    * World frame: right-handed, meters. Trajectories and point clouds live here.
    * Camera frame: x right, y down, z forward (optical axis). The extrinsic
      maps world to camera: p_cam = R @ p_world + t.
    * Image frame: u right, v down, pixels, origin at the top-left corner.

All timestamps are seconds on a shared reference clock; individual sensors may
carry a constant offset against that clock (that is what the alignment stage
estimates).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig

__all__ = [
    "Point3",
    "PointCloudFrame",
    "KinematicState3",
    "ImageMotionState2",
    "CameraModel",
    "Trajectory",
    "world_to_camera",
    "seeded_rng",
]

# Orthonormality tolerance for extrinsic rotations.
ROTATION_TOL = 1e-9


def _as_vec(x, n, name) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


@dataclass(frozen=True)
class Point3:
    """A point in 3D space (meters). All components must be finite."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(np.isfinite([self.x, self.y, self.z])):
            raise ValueError("Point3 components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a) -> "Point3":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass
class PointCloudFrame:
    """One sensor sweep: a timestamped, ordered set of world-frame points.

    Point order is stable and meaningful; KNN ties break on the lower row
    index of this array.
    """

    timestamp: float
    sensor_id: str
    points: np.ndarray  # (N, 3) float64, world frame

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be (N, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if not np.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")
        self.points = pts

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class KinematicState3:
    """Position, velocity and acceleration in the world frame at one instant."""

    timestamp: float
    position: np.ndarray      # (3,) m
    velocity: np.ndarray      # (3,) m/s
    acceleration: np.ndarray  # (3,) m/s^2

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec(self.position, 3, "position"))
        object.__setattr__(self, "velocity", _as_vec(self.velocity, 3, "velocity"))
        object.__setattr__(self, "acceleration", _as_vec(self.acceleration, 3, "acceleration"))

    def as_vector(self) -> np.ndarray:
        """Flatten to the 9-vector [position, velocity, acceleration]."""
        return np.concatenate([self.position, self.velocity, self.acceleration])

    @classmethod
    def from_vector(cls, timestamp: float, v) -> "KinematicState3":
        v = _as_vec(v, 9, "state vector")
        return cls(timestamp, v[0:3], v[3:6], v[6:9])


@dataclass(frozen=True)
class ImageMotionState2:
    """Pixel position, velocity and acceleration of an image feature.

    ``accel_valid`` is False when the acceleration could not be estimated
    (no successor sample); the stored acceleration is then exactly zero.
    """

    timestamp: float
    pixel: np.ndarray               # (2,) px
    pixel_velocity: np.ndarray      # (2,) px/s
    pixel_acceleration: np.ndarray  # (2,) px/s^2
    accel_valid: bool = True

    def __post_init__(self):
        object.__setattr__(self, "pixel", _as_vec(self.pixel, 2, "pixel"))
        object.__setattr__(self, "pixel_velocity", _as_vec(self.pixel_velocity, 2, "pixel_velocity"))
        object.__setattr__(self, "pixel_acceleration",
                           _as_vec(self.pixel_acceleration, 2, "pixel_acceleration"))

    def as_vector(self) -> np.ndarray:
        """Flatten to the 6-vector [pixel, velocity, acceleration]."""
        return np.concatenate([self.pixel, self.pixel_velocity, self.pixel_acceleration])

    @classmethod
    def from_vector(cls, timestamp: float, v, accel_valid: bool = True) -> "ImageMotionState2":
        v = _as_vec(v, 6, "image state vector")
        return cls(timestamp, v[0:2], v[2:4], v[4:6], accel_valid)


@dataclass(frozen=True)
class CameraModel:
    """Unified fisheye camera: mirror parameter xi plus radial distortion.

    xi = 0 and k1 = k2 = 0 reduces the model to a plain pinhole camera.
    The extrinsic maps world coordinates into the camera frame.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    xi: float
    k1: float
    k2: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))     # (3,3) world->cam
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))  # (3,)

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.xi < 0:
            raise ValueError("xi must be non-negative")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        R = np.asarray(self.rotation, dtype=float)
        t = _as_vec(self.translation, 3, "translation")
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be (3, 3), got {R.shape}")
        if not np.allclose(R @ R.T, np.eye(3), atol=ROTATION_TOL):
            raise ValueError("rotation must be orthonormal")
        if np.linalg.det(R) < 0:
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    def with_extrinsic(self, rotation, translation) -> "CameraModel":
        """Return a copy with a replaced extrinsic."""
        return CameraModel(self.fx, self.fy, self.cx, self.cy, self.xi,
                           self.k1, self.k2, self.width, self.height,
                           np.asarray(rotation, dtype=float),
                           np.asarray(translation, dtype=float))

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "xi": self.xi, "k1": self.k1, "k2": self.k2,
            "width": self.width, "height": self.height,
            "extrinsic": {
                "rotation": [float(v) for v in self.rotation.reshape(-1)],
                "translation": [float(v) for v in self.translation],
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        if not isinstance(d, dict):
            raise InvalidConfig(f"camera config must be an object, got {type(d).__name__}")
        known = {"fx", "fy", "cx", "cy", "xi", "k1", "k2", "width", "height", "extrinsic"}
        for key in d:
            if key not in known:
                raise InvalidConfig(f"unknown key 'camera.{key}'")
        required = {"fx", "fy", "cx", "cy", "width", "height"}
        for key in required:
            if key not in d:
                raise InvalidConfig(f"missing key 'camera.{key}'")
        R = np.eye(3)
        t = np.zeros(3)
        if "extrinsic" in d:
            ext = d["extrinsic"]
            for key in ext:
                if key not in {"rotation", "translation"}:
                    raise InvalidConfig(f"unknown key 'camera.extrinsic.{key}'")
            if "rotation" in ext:
                rot = np.asarray(ext["rotation"], dtype=float)
                if rot.size != 9:
                    raise InvalidConfig("camera.extrinsic.rotation must hold 9 row-major values")
                R = rot.reshape(3, 3)
            if "translation" in ext:
                t = np.asarray(ext["translation"], dtype=float)
        try:
            return cls(
                fx=float(d["fx"]), fy=float(d["fy"]),
                cx=float(d["cx"]), cy=float(d["cy"]),
                xi=float(d.get("xi", 0.0)),
                k1=float(d.get("k1", 0.0)), k2=float(d.get("k2", 0.0)),
                width=int(d["width"]), height=int(d["height"]),
                rotation=R, translation=t,
            )
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad camera config: {exc}") from exc


@dataclass
class Trajectory:
    """A time-ordered sequence of 3D positions, optionally with derivatives.

    Timestamps are strictly increasing. Velocities/accelerations, when
    present, are per-sample analytic or estimated derivatives.
    """

    times: np.ndarray                      # (N,)
    positions: np.ndarray                  # (N, 3)
    velocities: np.ndarray | None = None   # (N, 3)
    accelerations: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        p = np.asarray(self.positions, dtype=float)
        if p.size == 0:
            p = p.reshape(0, 3)
        if p.shape != (t.size, 3):
            raise ValueError(f"positions shape {p.shape} does not match {t.size} timestamps")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise ValueError("trajectory samples must be finite")
        self.times = t
        self.positions = p
        for name in ("velocities", "accelerations"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != (t.size, 3):
                    raise ValueError(f"{name} shape {v.shape} does not match samples")
                setattr(self, name, v)

    def __len__(self) -> int:
        return self.times.size

    @property
    def span(self) -> tuple[float, float]:
        if len(self) == 0:
            raise ValueError("empty trajectory has no span")
        return float(self.times[0]), float(self.times[-1])

    def position_at(self, t) -> np.ndarray:
        """Interpolate position at time(s) t.

        Uses cubic Hermite interpolation when per-sample velocities are
        stored (exact for piecewise-quadratic motion), linear otherwise.
        Queries must lie within the sampled span (1e-9 s grace).
        """
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tq = np.atleast_1d(t)
        if len(self) == 0:
            raise ValueError("cannot interpolate an empty trajectory")
        lo, hi = self.span
        if np.any(tq < lo - 1e-9) or np.any(tq > hi + 1e-9):
            raise ValueError("query time outside trajectory span")
        tq = np.clip(tq, lo, hi)
        if len(self) == 1:
            out = np.repeat(self.positions, tq.size, axis=0)
            return out[0] if scalar else out
        idx = np.clip(np.searchsorted(self.times, tq, side="right") - 1, 0, len(self) - 2)
        t0 = self.times[idx]
        t1 = self.times[idx + 1]
        h = t1 - t0
        s = (tq - t0) / h
        p0 = self.positions[idx]
        p1 = self.positions[idx + 1]
        if self.velocities is not None:
            v0 = self.velocities[idx]
            v1 = self.velocities[idx + 1]
            s2 = s * s
            s3 = s2 * s
            h00 = 2 * s3 - 3 * s2 + 1
            h10 = s3 - 2 * s2 + s
            h01 = -2 * s3 + 3 * s2
            h11 = s3 - s2
            out = (h00[:, None] * p0 + h10[:, None] * (h[:, None] * v0)
                   + h01[:, None] * p1 + h11[:, None] * (h[:, None] * v1))
        else:
            out = p0 + s[:, None] * (p1 - p0)
        return out[0] if scalar else out


def world_to_camera(camera: CameraModel, p) -> np.ndarray:
    """Map world-frame point(s) into the camera frame: R @ p + t.

    Accepts a single (3,) point or an (..., 3) batch.
    """
    p = np.asarray(p, dtype=float)
    return p @ camera.rotation.T + camera.translation


def _stream_key(part) -> int:
    """Stable non-negative integer for a substream label (int or str)."""
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream parts must be non-negative")
        return int(part)
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seeded_rng(seed: int, *stream) -> np.random.Generator:
    """Deterministic PCG64 generator for (seed, substream labels).

    The same (seed, stream) always yields the same draw sequence, on any
    platform and under any thread count. String labels are hashed stably, so
    per-sensor substreams do not depend on sensor ordering.
    """
    entropy = [int(seed)] + [_stream_key(p) for p in stream]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
