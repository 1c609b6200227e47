import numpy as np
import pytest

from trajkit.errors import InsufficientSamples, NonMonotoneTimestamps, ParseError
from trajkit.flow import FeatureTrack, load_tracks, orb_motion_state, save_tracks


def track(times, pixels, tid="0"):
    return FeatureTrack(tid, np.asarray(times, float), np.asarray(pixels, float))


def grid_track(f, n=10, dt=1.0, tid="0"):
    t = np.arange(n) * dt
    return FeatureTrack(tid, t, np.stack([f(t), np.zeros_like(t)], axis=1))


# ------------------------------------------------------------------- loading

def test_empty_file_gives_empty_list(tmp_path):
    p = tmp_path / "tracks.csv"
    p.write_text("id,t,u,v\n")
    assert load_tracks(p) == []


def test_rows_group_into_one_track(tmp_path):
    p = tmp_path / "tracks.csv"
    p.write_text("id,t,u,v\n7,0.0,1.0,2.0\n7,0.1,1.5,2.5\n")
    tracks = load_tracks(p)
    assert len(tracks) == 1
    assert tracks[0].track_id == "7"
    assert len(tracks[0]) == 2
    assert np.allclose(tracks[0].pixels[1], [1.5, 2.5])


def test_rows_sorted_by_time(tmp_path):
    p = tmp_path / "tracks.csv"
    p.write_text("id,t,u,v\n0,0.2,3.0,0.0\n0,0.1,2.0,0.0\n")
    tr = load_tracks(p)[0]
    assert np.array_equal(tr.times, [0.1, 0.2])


def test_bad_header_raises_with_line(tmp_path):
    p = tmp_path / "tracks.csv"
    p.write_text("t,u,v\n")
    with pytest.raises(ParseError, match=":1"):
        load_tracks(p)


def test_bad_field_count_reports_line(tmp_path):
    p = tmp_path / "tracks.csv"
    p.write_text("id,t,u,v\n0,0.0,1.0,2.0\n0,0.1,3.0\n")
    with pytest.raises(ParseError, match=":3"):
        load_tracks(p)


def test_duplicate_timestamps_rejected(tmp_path):
    p = tmp_path / "tracks.csv"
    p.write_text("id,t,u,v\n0,0.1,1.0,2.0\n0,0.1,1.5,2.0\n")
    with pytest.raises(NonMonotoneTimestamps):
        load_tracks(p)


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    tracks = [track(np.sort(rng.uniform(0, 10, 20)), rng.normal(size=(20, 2)), tid=str(i))
              for i in range(3)]
    p = tmp_path / "tracks.csv"
    save_tracks(p, tracks)
    back = load_tracks(p)
    assert len(back) == 3
    for a, b in zip(tracks, back):
        assert a.track_id == b.track_id
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.pixels, b.pixels)


# ---------------------------------------------------------- orb_motion_state

def test_static_keypoint_zero_motion():
    tr = grid_track(lambda t: np.full_like(t, 5.0))
    s = orb_motion_state(tr, 2.0, 1.0)
    assert np.array_equal(s.pixel_velocity, [0.0, 0.0])
    assert np.array_equal(s.pixel_acceleration, [0.0, 0.0])


def test_linear_motion_matches_difference_quotient():
    # pixels (0,0),(1,0),(2,0) at dt=1: velocity (1,0), acceleration (0,0)
    tr = track([0.0, 1.0, 2.0], [[0, 0], [1, 0], [2, 0]])
    s = orb_motion_state(tr, 0.0, 1.0)
    assert np.allclose(s.pixel, [0, 0])
    assert np.allclose(s.pixel_velocity, [1.0, 0.0])
    assert np.array_equal(s.pixel_acceleration, [0.0, 0.0])


def test_second_difference_units():
    # pixels (0,0),(1,0),(3,0) at dt=0.5: velocity 2 px/s, acceleration 4 px/s^2
    tr = track([0.0, 0.5, 1.0], [[0, 0], [1, 0], [3, 0]])
    s = orb_motion_state(tr, 0.0, 0.5)
    assert np.allclose(s.pixel_velocity, [2.0, 0.0])
    assert np.allclose(s.pixel_acceleration, [4.0, 0.0])


def test_linear_track_exactly_zero_acceleration():
    tr = grid_track(lambda t: 3.0 * t + 1.0, n=20, dt=0.25)
    for t in (0.0, 1.0, 3.0):
        s = orb_motion_state(tr, t, 0.25)
        assert np.array_equal(s.pixel_acceleration, [0.0, 0.0])


def test_constant_offset_shifts_only_position():
    tr = grid_track(lambda t: t ** 2, n=12)
    shifted = FeatureTrack("0", tr.times, tr.pixels + np.array([7.0, -3.0]))
    a = orb_motion_state(tr, 2.0, 1.0)
    b = orb_motion_state(shifted, 2.0, 1.0)
    assert np.allclose(b.pixel - a.pixel, [7.0, -3.0])
    assert np.array_equal(a.pixel_velocity, b.pixel_velocity)
    assert np.array_equal(a.pixel_acceleration, b.pixel_acceleration)


def test_time_reversal_negates_velocity():
    # constant-velocity track: reversing sample order in time flips the sign
    tr = grid_track(lambda t: 4.0 * t, n=10)
    T = tr.times[-1]
    rev = FeatureTrack("0", T - tr.times[::-1], tr.pixels[::-1])
    a = orb_motion_state(tr, 2.0, 1.0)
    b = orb_motion_state(rev, 2.0, 1.0)
    assert np.allclose(b.pixel_velocity, -a.pixel_velocity)


def test_time_reversal_preserves_acceleration():
    tr = grid_track(lambda t: t ** 2, n=10)
    T = tr.times[-1]
    rev = FeatureTrack("0", T - tr.times[::-1], tr.pixels[::-1])
    # compare the window [t, t+2dt] against its mirror [T-t-2dt, ...]
    a = orb_motion_state(tr, 3.0, 1.0)
    b = orb_motion_state(rev, T - 3.0 - 2.0, 1.0)
    assert np.allclose(b.pixel_acceleration, a.pixel_acceleration)


def test_snapping_tolerance_quarter_dt():
    tr = track([0.0, 1.2, 2.0], [[0, 0], [1, 0], [2, 0]])
    # sample at 1.2 is 0.2 from the nominal 1.0 grid point: within dt/4
    s = orb_motion_state(tr, 0.0, 1.0)
    assert s is not None
    # at dt=0.5 the tolerance shrinks to 0.125 and the snap fails
    with pytest.raises(InsufficientSamples):
        orb_motion_state(tr, 0.0, 0.5)


def test_missing_future_sample_raises():
    tr = track([0.0, 1.0], [[0, 0], [1, 0]])
    with pytest.raises(InsufficientSamples):
        orb_motion_state(tr, 0.0, 1.0)


def test_requested_dt_stays_in_denominator():
    # samples sit at 0, 0.9, 2.1 but dt=1 is what divides
    tr = track([0.0, 0.9, 2.1], [[0, 0], [2, 0], [2, 0]])
    s = orb_motion_state(tr, 0.0, 1.0)
    assert np.allclose(s.pixel_velocity, [2.0, 0.0])
    assert np.allclose(s.pixel_acceleration, [-2.0, 0.0])
