import numpy as np
import pytest

from trajkit.errors import InvalidConfig, OutOfRegime, TargetNeverVisible
from trajkit.projection import project
from trajkit.sim import (MiscalibrationSpec, SceneConfig, SensorConfig, TrackConfig,
                         TrajectoryConfig, gen_trajectory, inject_miscalibration,
                         render_tracks, sample_sensor, scene_manifest, simulate_scene)


def cv_config(**kw):
    base = dict(duration=10.0,
                trajectory=TrajectoryConfig(kind="constant-velocity",
                                            start=(0.0, 0.0, 30.0),
                                            velocity=(1.0, 0.0, 0.0)),
                sensors=(SensorConfig(),), tracks=TrackConfig(), seed=0)
    base.update(kw)
    return SceneConfig(**base)


# -------------------------------------------------------------- gen_trajectory

def test_constant_velocity_displacement():
    traj = gen_trajectory(cv_config())
    assert np.allclose(traj.positions[-1] - traj.positions[0], [10.0, 0.0, 0.0])
    assert np.allclose(traj.velocities, [1.0, 0.0, 0.0])


def test_constant_acceleration_second_difference():
    cfg = cv_config(trajectory=TrajectoryConfig(kind="constant-acceleration",
                                                velocity=(1.0, 0.0, 0.0),
                                                acceleration=(0.2, -0.1, 0.05)))
    traj = gen_trajectory(cfg)
    dt = traj.times[1] - traj.times[0]
    dd = np.diff(traj.positions, n=2, axis=0) / dt ** 2
    assert np.allclose(dd, [0.2, -0.1, 0.05], atol=1e-6)
    assert np.allclose(traj.accelerations, [0.2, -0.1, 0.05])


def test_spline_passes_through_waypoints():
    wp = [[0, 0, 30], [5, 2, 32], [8, -1, 35], [10, 0, 30]]
    cfg = cv_config(trajectory=TrajectoryConfig(kind="waypoint-spline",
                                                waypoints=wp,
                                                waypoint_times=[0.0, 3.0, 7.0, 10.0]))
    traj = gen_trajectory(cfg)
    for t, p in zip([0.0, 3.0, 7.0, 10.0], wp):
        i = int(np.argmin(np.abs(traj.times - t)))
        assert np.linalg.norm(traj.positions[i] - p) < 1e-9


def test_unknown_kind_rejected():
    with pytest.raises(InvalidConfig):
        gen_trajectory(cv_config(trajectory=TrajectoryConfig(kind="warp-drive")))


def test_spline_requires_increasing_times():
    cfg = cv_config(trajectory=TrajectoryConfig(
        kind="waypoint-spline", waypoints=[[0, 0, 30], [1, 0, 30], [2, 0, 30]],
        waypoint_times=[0.0, 5.0, 4.0]))
    with pytest.raises(InvalidConfig):
        gen_trajectory(cfg)


def test_drawn_velocity_respects_speed_bound():
    for seed in range(5):
        cfg = cv_config(trajectory=TrajectoryConfig(kind="constant-velocity",
                                                    speed_max=2.0), seed=seed)
        traj = gen_trajectory(cfg)
        assert np.linalg.norm(traj.velocities[0]) <= 2.0 + 1e-12


# --------------------------------------------------------------- sample_sensor

def test_zero_noise_target_on_trajectory():
    traj = gen_trajectory(cv_config())
    frames = sample_sensor(traj, SensorConfig(rate=10.0), seed=0)
    for f in frames:
        want = traj.position_at(f.timestamp)
        assert np.allclose(f.points[0], want, atol=1e-12)


def test_offset_shifts_stamp_not_position():
    traj = gen_trajectory(cv_config())
    offset = 0.05
    frames = sample_sensor(traj, SensorConfig(rate=10.0, time_offset=offset), seed=0)
    for f in frames[:-1]:
        # stamped time differs from the sampled instant by exactly the offset
        true_t = f.timestamp - offset
        assert np.allclose(f.points[0], traj.position_at(true_t), atol=1e-12)


def test_clutter_count_deterministic():
    traj = gen_trajectory(cv_config())
    sensor = SensorConfig(rate=10.0, clutter_density=200, dropout=0.0)
    frames = sample_sensor(traj, sensor, seed=3)
    total = sum(len(f) - 1 for f in frames)  # minus the target point
    assert total == 200 * len(frames)


def test_dropout_removes_target():
    traj = gen_trajectory(cv_config())
    sensor = SensorConfig(rate=100.0, dropout=0.4, clutter_density=5)
    frames, truth = (sample_sensor(traj, sensor, seed=1),
                     None)
    # frames with a dropped target carry only clutter
    sizes = {len(f) for f in frames}
    assert sizes == {5, 6}


def test_sample_sensor_deterministic():
    traj = gen_trajectory(cv_config())
    sensor = SensorConfig(rate=10.0, point_sigma=0.05, clutter_density=20,
                          jitter_sigma=0.002, dropout=0.1)
    a = sample_sensor(traj, sensor, seed=9)
    b = sample_sensor(traj, sensor, seed=9)
    assert len(a) == len(b)
    for fa, fb in zip(a, b):
        assert fa.timestamp == fb.timestamp
        assert np.array_equal(fa.points, fb.points)


def test_sensor_rate_validation():
    traj = gen_trajectory(cv_config())
    with pytest.raises(InvalidConfig):
        sample_sensor(traj, SensorConfig(rate=0.0), seed=0)
    with pytest.raises(InvalidConfig):
        sample_sensor(traj, SensorConfig(dropout=1.5), seed=0)
    with pytest.raises(InvalidConfig):
        sample_sensor(traj, SensorConfig(clutter_mode="sparkles"), seed=0)


# --------------------------------------------------------------- render_tracks

def scene_cam():
    from trajkit.core import CameraModel
    return CameraModel(600, 600, 640, 360, xi=1.0, k1=0.0, k2=0.0,
                       width=1280, height=720)


def test_tracks_exact_projection_when_noise_free():
    cfg = cv_config(trajectory=TrajectoryConfig(kind="constant-velocity",
                                                start=(-3.0, 0.0, 30.0),
                                                velocity=(1.0, 0.1, 0.0)))
    traj = gen_trajectory(cfg)
    cam = scene_cam()
    tracks = render_tracks(traj, cam, TrackConfig(rate=50.0, pixel_sigma=0.0), seed=0)
    target = next(tr for tr in tracks if tr.track_id == "0")
    for t, px in zip(target.times, target.pixels):
        want, _ = project(cam, traj.position_at(t))
        assert np.allclose(px, want, atol=1e-12)


def test_background_tracks_static_zero_mean_displacement():
    traj = gen_trajectory(cv_config())
    cam = scene_cam()
    sigma = 1.0
    tracks = render_tracks(traj, cam, TrackConfig(rate=50.0, pixel_sigma=sigma,
                                                  n_background=8), seed=4)
    for tr in tracks:
        if tr.track_id == "0":
            continue
        disp = tr.pixels - tr.pixels.mean(axis=0)
        n = len(tr)
        assert np.all(np.abs(tr.pixels.mean(axis=0) - tr.pixels[0])
                      < 6 * sigma)  # static base: samples cluster around it
        assert np.all(np.abs(disp.mean(axis=0)) < 3 * sigma / np.sqrt(n) + 1e-9)


def test_track_noise_level_matches_sigma():
    cfg = cv_config(duration=10.0)
    traj = gen_trajectory(cfg)
    cam = scene_cam()
    tracks = render_tracks(traj, cam, TrackConfig(rate=50.0, pixel_sigma=1.0),
                           seed=5)
    target = next(tr for tr in tracks if tr.track_id == "0")
    clean = np.stack([project(cam, traj.position_at(t))[0] for t in target.times])
    noise = target.pixels - clean
    assert len(noise) >= 500
    assert 0.9 <= noise.std() <= 1.1


def test_target_never_visible():
    cfg = cv_config(trajectory=TrajectoryConfig(kind="constant-velocity",
                                                start=(0.0, 0.0, -50.0),
                                                velocity=(0.0, 0.0, 0.0)))
    traj = gen_trajectory(cfg)
    with pytest.raises(TargetNeverVisible):
        render_tracks(traj, scene_cam(), TrackConfig(rate=10.0), seed=0)


# -------------------------------------------------------- inject_miscalibration

def test_zero_perturbation_identity():
    cam = scene_cam()
    out, truth = inject_miscalibration(cam, 0.0, 0.0, 0.0, seed=0)
    assert np.array_equal(out.rotation, cam.rotation)
    assert np.array_equal(out.translation, cam.translation)
    assert truth.time_offset == 0.0


def test_apply_then_remove_restores():
    cam = scene_cam()
    out, truth = inject_miscalibration(cam, 2.0, 0.3, 0.1, seed=7)
    back = truth.remove_from(out)
    assert np.allclose(back.rotation, cam.rotation, atol=1e-12)
    assert np.allclose(back.translation, cam.translation, atol=1e-12)


def test_out_of_regime_limits():
    cam = scene_cam()
    with pytest.raises(OutOfRegime):
        inject_miscalibration(cam, 5.0, 0.0, 0.0)
    with pytest.raises(OutOfRegime):
        inject_miscalibration(cam, 0.0, 0.5, 0.0)
    with pytest.raises(OutOfRegime):
        inject_miscalibration(cam, 0.0, 0.0, 0.2)


def test_recorded_magnitudes_match_request():
    cam = scene_cam()
    _, truth = inject_miscalibration(cam, 1.5, 0.2, 0.05, seed=3)
    assert np.linalg.norm(truth.rotation_vector) == pytest.approx(np.radians(1.5))
    assert np.linalg.norm(truth.translation) == pytest.approx(0.2)
    assert truth.time_offset == 0.05


# ---------------------------------------------------------------- simulate_scene

def test_scene_frames_sorted():
    cfg = cv_config(sensors=(SensorConfig(sensor_id="lidar1", rate=10.0),
                             SensorConfig(sensor_id="lidar0", rate=7.0)))
    scene = simulate_scene(cfg, scene_cam())
    keys = [(f.timestamp, f.sensor_id) for f in scene.frames]
    assert keys == sorted(keys)


def test_scene_miscalibration_biases_stamps():
    cfg = cv_config(miscalibration=MiscalibrationSpec(time_offset_s=0.05))
    scene = simulate_scene(cfg, scene_cam())
    st = scene.sensor_truths[0]
    assert st.time_offset == pytest.approx(0.05)
    assert np.allclose(st.stamps - st.true_times, 0.05)


def test_scene_believed_camera_carries_rotation():
    cfg = cv_config(miscalibration=MiscalibrationSpec(rotation_deg=1.0))
    scene = simulate_scene(cfg, scene_cam())
    assert not np.allclose(scene.camera_believed.rotation, scene.camera_true.rotation)
    assert np.allclose(scene.camera_true.rotation, np.eye(3))


def test_manifest_roundtrips_to_json():
    import json

    scene = simulate_scene(cv_config(), scene_cam())
    m = scene_manifest(scene)
    text = json.dumps(m)
    back = json.loads(text)
    assert back["seed"] == 0
    assert len(back["trajectory"]["times"]) == len(back["trajectory"]["positions"])
    assert back["sensors"][0]["sensor_id"] == "lidar0"
    assert back["miscalibration"] is None


def test_manifest_supports_hermite_reconstruction():
    cfg = cv_config(trajectory=TrajectoryConfig(kind="constant-acceleration",
                                                velocity=(1.0, 0.0, 0.0),
                                                acceleration=(0.1, 0.2, -0.05)))
    scene = simulate_scene(cfg, scene_cam())
    m = scene_manifest(scene)
    from trajkit.core import Trajectory
    tr = Trajectory(np.asarray(m["trajectory"]["times"]),
                    np.asarray(m["trajectory"]["positions"]),
                    np.asarray(m["trajectory"]["velocities"]))
    t = 3.456789
    want = scene.trajectory.position_at(t)
    assert np.linalg.norm(tr.position_at(t) - want) < 1e-9
