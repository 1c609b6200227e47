"""Synthetic scene generator with controllable failure modes.

Produces a smooth target trajectory, asynchronous noisy point-cloud streams,
and pixel feature tracks, all from one seed. Every stochastic element draws
from a per-(seed, substream) generator in a fixed order, so identical
configs and seeds reproduce byte-identical scenes at any thread count.

Timing model per sensor: the k-th sweep happens at true time
k / rate + jitter_k, but is stamped true + time_offset. The constant offset
is the clock bias the alignment stage estimates; jitter is genuine
asynchrony shared by stamp and sample.

Clutter modes:
    resample:      clutter positions are drawn i.i.d. uniform in the scene
                   box every frame (maximally temporally inconsistent)
    static-jitter: fixed uniform base positions, re-jittered every frame
                   with clutter_sigma
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial.transform import Rotation

from .core import CameraModel, PointCloudFrame, Trajectory, seeded_rng, world_to_camera
from .errors import InvalidConfig, OutOfRegime, TargetNeverVisible
from .flow import FeatureTrack
from .projection import project_many

__all__ = [
    "TrajectoryConfig",
    "SensorConfig",
    "TrackConfig",
    "MiscalibrationSpec",
    "SceneConfig",
    "SensorTruth",
    "SceneData",
    "MiscalibrationTruth",
    "gen_trajectory",
    "sample_sensor",
    "render_tracks",
    "inject_miscalibration",
    "simulate_scene",
    "scene_manifest",
    "SIM_RATE",
]

SIM_RATE = 1000.0       # Hz, internal dense sampling of generated trajectories
MANIFEST_STRIDE = 10    # manifest stores the dense trajectory at SIM_RATE / stride
BBOX_MARGIN = 10.0      # m, default clutter box margin around the trajectory

TRAJECTORY_KINDS = ("constant-velocity", "constant-acceleration", "waypoint-spline")
CLUTTER_MODES = ("resample", "static-jitter")

# Small-perturbation regime limits for miscalibration injection.
MAX_ROT_DEG = 5.0
MAX_TRANS_M = 0.5
MAX_OFFSET_S = 0.2


@dataclass
class TrajectoryConfig:
    kind: str = "constant-velocity"
    start: tuple = (0.0, 0.0, 30.0)
    velocity: tuple | None = None       # explicit, else drawn with speed_max
    acceleration: tuple | None = None   # constant-acceleration kind only
    speed_max: float = 5.0              # bound for drawn velocity (m/s)
    accel_max: float = 0.0              # bound for drawn acceleration (m/s^2)
    waypoints: list | None = None       # [[x, y, z], ...] for waypoint-spline
    waypoint_times: list | None = None


@dataclass
class SensorConfig:
    sensor_id: str = "lidar0"
    rate: float = 10.0
    jitter_sigma: float = 0.0
    time_offset: float = 0.0
    point_sigma: float = 0.0
    dropout: float = 0.0
    clutter_density: int = 0
    clutter_sigma: float = 0.0
    clutter_mode: str = "resample"


@dataclass
class TrackConfig:
    rate: float = 100.0
    pixel_sigma: float = 0.0
    n_background: int = 0


@dataclass
class MiscalibrationSpec:
    rotation_deg: float = 0.0
    translation_m: float = 0.0
    time_offset_s: float = 0.0


@dataclass
class SceneConfig:
    duration: float = 10.0
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    sensors: list[SensorConfig] = field(default_factory=lambda: [SensorConfig()])
    tracks: TrackConfig = field(default_factory=TrackConfig)
    bbox_min: tuple | None = None   # clutter box; derived from the trajectory if None
    bbox_max: tuple | None = None
    miscalibration: MiscalibrationSpec | None = None
    seed: int = 0


@dataclass
class SensorTruth:
    """Per-frame ground truth of one emitted sensor stream."""

    sensor_id: str
    time_offset: float            # total stamp bias (sensor + injected)
    stamps: np.ndarray            # (F,)
    true_times: np.ndarray        # (F,)
    target_index: np.ndarray      # (F,) row of the target point, -1 if dropped


@dataclass
class MiscalibrationTruth:
    """Exact perturbation applied to the believed camera/timing."""

    rotation_vector: np.ndarray   # (3,) axis-angle, radians
    translation: np.ndarray       # (3,) m
    time_offset: float            # s

    def remove_from(self, camera: CameraModel) -> CameraModel:
        """Invert the perturbation (restores the original model to rounding)."""
        delta = Rotation.from_rotvec(-self.rotation_vector).as_matrix()
        return camera.with_extrinsic(delta @ camera.rotation,
                                     camera.translation - self.translation)


@dataclass
class SceneData:
    """Everything one simulated scene produces."""

    config: SceneConfig
    trajectory: Trajectory          # dense, with analytic derivatives
    frames: list[PointCloudFrame]   # all sensors, sorted by (stamp, sensor_id)
    tracks: list[FeatureTrack]
    camera_true: CameraModel
    camera_believed: CameraModel    # what downstream stages are told
    sensor_truths: list[SensorTruth]
    miscalibration: MiscalibrationTruth | None


def _unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    n = np.linalg.norm(v)
    while n < 1e-12:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
    return v / n


def _grid_times(duration: float, rate: float) -> np.ndarray:
    n = int(math.floor(duration * rate + 1e-9)) + 1
    return np.arange(n) / rate


def gen_trajectory(config: SceneConfig) -> Trajectory:
    """Closed-form target trajectory densely sampled at 1 kHz.

    Velocity/acceleration are analytic per sample, so downstream Hermite
    interpolation reproduces quadratic motion exactly. Unspecified velocity
    (or acceleration, for the constant-acceleration kind) is drawn from the
    scene seed within speed_max / accel_max.
    """
    tc = config.trajectory
    if tc.kind not in TRAJECTORY_KINDS:
        raise InvalidConfig(f"unknown trajectory kind '{tc.kind}'")
    if config.duration <= 0:
        raise InvalidConfig("duration must be > 0")
    t = _grid_times(config.duration, SIM_RATE)
    rng = seeded_rng(config.seed, "trajectory")
    start = np.asarray(tc.start, dtype=float)

    if tc.kind == "waypoint-spline":
        if tc.waypoints is None or tc.waypoint_times is None:
            raise InvalidConfig("waypoint-spline needs waypoints and waypoint_times")
        wt = np.asarray(tc.waypoint_times, dtype=float)
        wp = np.asarray(tc.waypoints, dtype=float)
        if wt.ndim != 1 or wp.shape != (wt.size, 3) or wt.size < 2:
            raise InvalidConfig("waypoints must be (M, 3) with M >= 2 matching waypoint_times")
        if not np.all(np.diff(wt) > 0):
            raise InvalidConfig("waypoint_times must be strictly increasing")
        if wt[0] > 1e-9 or wt[-1] < config.duration - 1e-9:
            raise InvalidConfig("waypoint_times must cover [0, duration]")
        spline = CubicSpline(wt, wp, bc_type="natural")
        pos = spline(t)
        vel = spline(t, 1)
        acc = spline(t, 2)
        return Trajectory(t, pos, vel, acc)

    if tc.velocity is not None:
        v = np.asarray(tc.velocity, dtype=float)
    else:
        v = _unit(rng) * rng.uniform(0.0, tc.speed_max)
    if tc.kind == "constant-velocity":
        a = np.zeros(3)
    elif tc.acceleration is not None:
        a = np.asarray(tc.acceleration, dtype=float)
    else:
        a = _unit(rng) * rng.uniform(0.0, tc.accel_max)

    pos = start + t[:, None] * v + 0.5 * t[:, None] ** 2 * a
    vel = v + t[:, None] * a
    acc = np.broadcast_to(a, pos.shape).copy()
    return Trajectory(t, pos, vel, acc)


def _default_bbox(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    return (traj.positions.min(axis=0) - BBOX_MARGIN,
            traj.positions.max(axis=0) + BBOX_MARGIN)


def _sample_sensor(traj: Trajectory, sensor: SensorConfig, seed: int,
                   bbox=None, extra_offset: float = 0.0,
                   ) -> tuple[list[PointCloudFrame], SensorTruth]:
    if sensor.rate <= 0:
        raise InvalidConfig("sensor rate must be > 0")
    if not 0.0 <= sensor.dropout <= 1.0:
        raise InvalidConfig("dropout must be in [0, 1]")
    if sensor.clutter_mode not in CLUTTER_MODES:
        raise InvalidConfig(f"unknown clutter mode '{sensor.clutter_mode}'")
    rng = seeded_rng(seed, sensor.sensor_id)
    lo_t, hi_t = traj.span
    duration = hi_t - lo_t
    nominal = _grid_times(duration, sensor.rate) + lo_t
    jitter = rng.normal(0.0, sensor.jitter_sigma, size=nominal.size)
    true_times = np.clip(nominal + jitter, lo_t, hi_t)
    offset = sensor.time_offset + extra_offset
    stamps = true_times + offset

    if bbox is None:
        bbox_lo, bbox_hi = _default_bbox(traj)
    else:
        bbox_lo, bbox_hi = (np.asarray(b, dtype=float) for b in bbox)
    m = int(sensor.clutter_density)
    static_bases = rng.uniform(bbox_lo, bbox_hi, size=(m, 3)) if (
        m > 0 and sensor.clutter_mode == "static-jitter") else None

    frames: list[PointCloudFrame] = []
    kept_stamps, kept_true, kept_target = [], [], []
    for k in range(nominal.size):
        dropped = rng.uniform() < sensor.dropout
        target = traj.position_at(true_times[k]) + rng.normal(0.0, sensor.point_sigma, size=3)
        if m > 0:
            if static_bases is None:
                clutter = rng.uniform(bbox_lo, bbox_hi, size=(m, 3))
            else:
                clutter = static_bases + rng.normal(0.0, sensor.clutter_sigma, size=(m, 3))
        else:
            clutter = np.empty((0, 3))
        if dropped:
            points = clutter
            tindex = -1
        else:
            points = np.vstack([target[None, :], clutter])
            tindex = 0
        if points.shape[0] == 0:
            continue  # nothing measured; the frame is not emitted
        frames.append(PointCloudFrame(float(stamps[k]), sensor.sensor_id, points))
        kept_stamps.append(stamps[k])
        kept_true.append(true_times[k])
        kept_target.append(tindex)
    truth = SensorTruth(sensor.sensor_id, offset, np.asarray(kept_stamps),
                        np.asarray(kept_true), np.asarray(kept_target, dtype=int))
    return frames, truth


def sample_sensor(trajectory: Trajectory, sensor: SensorConfig, seed: int,
                  bbox=None) -> list[PointCloudFrame]:
    """Sample one asynchronous, noisy point-cloud stream from a trajectory.

    Frame stamps are k/rate + time_offset + jitter; the target return sits at
    the trajectory position of the frame's true (unbiased) time plus Gaussian
    noise, dropped with probability ``dropout``. Clutter follows the
    configured mode inside ``bbox`` (default: trajectory extent + 10 m).
    Frames that end up empty are omitted. Point order: target first (when
    present), then clutter.
    """
    frames, _ = _sample_sensor(trajectory, sensor, seed, bbox)
    return frames


def render_tracks(trajectory: Trajectory, camera: CameraModel, cfg: TrackConfig,
                  seed: int) -> list[FeatureTrack]:
    """Project the target into pixel tracks plus static background tracks.

    The target track (id "0") samples the regular grid k/rate over the
    trajectory span, keeping instants whose projection lands in the image;
    raises TargetNeverVisible when fewer than 10% do. Background tracks
    (ids "1"..) are static pixels drawn uniformly in the image. All samples
    get Gaussian pixel noise.
    """
    if cfg.rate <= 0:
        raise InvalidConfig("track rate must be > 0")
    rng = seeded_rng(seed, "tracks")
    lo_t, hi_t = trajectory.span
    times = _grid_times(hi_t - lo_t, cfg.rate) + lo_t
    pos = trajectory.position_at(times)
    pixels, _, in_img = project_many(camera, world_to_camera(camera, pos))
    noise = rng.normal(0.0, cfg.pixel_sigma, size=(times.size, 2))
    if np.count_nonzero(in_img) < 0.1 * times.size:
        raise TargetNeverVisible(
            f"target projects into the image at {np.count_nonzero(in_img)} of {times.size} samples")
    tracks = [FeatureTrack("0", times[in_img], pixels[in_img] + noise[in_img])]
    for b in range(cfg.n_background):
        base = rng.uniform([0.0, 0.0], [camera.width, camera.height])
        bg_noise = rng.normal(0.0, cfg.pixel_sigma, size=(times.size, 2))
        tracks.append(FeatureTrack(str(b + 1), times, base[None, :] + bg_noise))
    return tracks


def inject_miscalibration(camera: CameraModel, rotation_deg: float, translation_m: float,
                          time_offset_s: float, seed: int = 0,
                          ) -> tuple[CameraModel, MiscalibrationTruth]:
    """Perturb a camera within the small-perturbation regime.

    Magnitudes must satisfy |rot| < 5 deg, |trans| < 0.5 m, |dt| < 0.2 s
    (OutOfRegime otherwise). Rotation axis and translation direction are
    drawn from the seed; the exact perturbation is returned so tests can
    verify recovery, and MiscalibrationTruth.remove_from inverts it.
    """
    if abs(rotation_deg) >= MAX_ROT_DEG:
        raise OutOfRegime(f"|rotation| must be < {MAX_ROT_DEG} deg")
    if abs(translation_m) >= MAX_TRANS_M:
        raise OutOfRegime(f"|translation| must be < {MAX_TRANS_M} m")
    if abs(time_offset_s) >= MAX_OFFSET_S:
        raise OutOfRegime(f"|time offset| must be < {MAX_OFFSET_S} s")
    rng = seeded_rng(seed, "miscalibration")
    rvec = _unit(rng) * math.radians(rotation_deg)
    tvec = _unit(rng) * translation_m
    delta = Rotation.from_rotvec(rvec).as_matrix()
    perturbed = camera.with_extrinsic(delta @ camera.rotation, camera.translation + tvec)
    return perturbed, MiscalibrationTruth(rvec, tvec, float(time_offset_s))


def simulate_scene(config: SceneConfig, camera: CameraModel) -> SceneData:
    """Generate a full scene: trajectory, point clouds, tracks, truth.

    Clouds and tracks are produced with the true camera and true geometry;
    when a miscalibration is configured the *believed* camera (and per-sensor
    stamp bias) carries the perturbation, which is what downstream stages
    must then correct.
    """
    traj = gen_trajectory(config)
    truth = None
    believed = camera
    extra_offset = 0.0
    if config.miscalibration is not None:
        mc = config.miscalibration
        believed, truth = inject_miscalibration(
            camera, mc.rotation_deg, mc.translation_m, mc.time_offset_s, seed=config.seed)
        extra_offset = truth.time_offset
    bbox = None
    if config.bbox_min is not None and config.bbox_max is not None:
        bbox = (config.bbox_min, config.bbox_max)
    frames: list[PointCloudFrame] = []
    sensor_truths: list[SensorTruth] = []
    for sensor in config.sensors:
        f, st = _sample_sensor(traj, sensor, config.seed, bbox, extra_offset)
        frames.extend(f)
        sensor_truths.append(st)
    frames.sort(key=lambda fr: (fr.timestamp, fr.sensor_id))
    tracks = render_tracks(traj, camera, config.tracks, config.seed)
    return SceneData(config, traj, frames, tracks, camera, believed, sensor_truths, truth)


def scene_manifest(scene: SceneData) -> dict:
    """JSON-ready ground-truth record of a simulated scene.

    The dense trajectory is stored at SIM_RATE / MANIFEST_STRIDE with
    velocities and accelerations, enough for exact Hermite reconstruction of
    quadratic motion.
    """
    traj = scene.trajectory
    s = slice(None, None, MANIFEST_STRIDE)
    mc = scene.miscalibration
    return {
        "seed": scene.config.seed,
        "duration": scene.config.duration,
        "trajectory": {
            "times": traj.times[s].tolist(),
            "positions": traj.positions[s].tolist(),
            "velocities": traj.velocities[s].tolist(),
            "accelerations": traj.accelerations[s].tolist(),
        },
        "sensors": [
            {
                "sensor_id": st.sensor_id,
                "time_offset": st.time_offset,
                "stamps": st.stamps.tolist(),
                "true_times": st.true_times.tolist(),
                "target_index": st.target_index.tolist(),
            }
            for st in scene.sensor_truths
        ],
        "tracks": {
            "target_id": "0",
            "n_background": scene.config.tracks.n_background,
            "rate": scene.config.tracks.rate,
            "pixel_sigma": scene.config.tracks.pixel_sigma,
        },
        "camera_true": scene.camera_true.to_dict(),
        "camera_believed": scene.camera_believed.to_dict(),
        "miscalibration": None if mc is None else {
            "rotation_vector": mc.rotation_vector.tolist(),
            "translation": mc.translation.tolist(),
            "time_offset": mc.time_offset,
        },
    }
