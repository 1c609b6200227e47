"""Image feature tracks and finite-difference motion states.

Tracks are (t, u, v) samples per feature id, the output of an external
keypoint tracker. This module turns a track into an ImageMotionState2 at a
requested time by nearest-sample lookup (no interpolation): samples at t,
t + dt and t + 2*dt are required, each within eps_t = dt / 4 of the request.

    velocity     = (o(t + dt) - o(t)) / dt            px/s
    acceleration = (o(t+2dt) - 2 o(t+dt) + o(t)) / dt^2

The requested dt stays in the denominators even when the snapped samples sit
slightly off the nominal grid; the tolerance bounds that error.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import ImageMotionState2
from .errors import InsufficientSamples, NonMonotoneTimestamps, ParseError

__all__ = ["FeatureTrack", "load_tracks", "save_tracks", "orb_motion_state"]


@dataclass
class FeatureTrack:
    """One feature's pixel samples over time, strictly increasing timestamps."""

    track_id: str
    times: np.ndarray   # (N,)
    pixels: np.ndarray  # (N, 2)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        p = np.asarray(self.pixels, dtype=float)
        if p.size == 0:
            p = p.reshape(0, 2)
        if p.shape != (t.size, 2):
            raise ValueError(f"pixels shape {p.shape} does not match {t.size} timestamps")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise NonMonotoneTimestamps(f"track '{self.track_id}' has duplicate timestamps")
        self.times = t
        self.pixels = p

    def __len__(self) -> int:
        return self.times.size


def load_tracks(path) -> list[FeatureTrack]:
    """Read feature tracks from a CSV file with header ``id,t,u,v``.

    Rows group by id and sort by time; duplicate timestamps within a track
    raise NonMonotoneTimestamps. Tracks are returned in order of first
    appearance in the file.
    """
    rows: dict[str, list[tuple[float, float, float]]] = {}
    order: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["id", "t", "u", "v"]:
            raise ParseError(f"{path}:1: expected header 'id,t,u,v'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            tid = row[0].strip()
            try:
                t, u, v = float(row[1]), float(row[2]), float(row[3])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if tid not in rows:
                rows[tid] = []
                order.append(tid)
            rows[tid].append((t, u, v))
    tracks = []
    for tid in order:
        data = sorted(rows[tid], key=lambda r: r[0])
        arr = np.asarray(data, dtype=float)
        tracks.append(FeatureTrack(tid, arr[:, 0], arr[:, 1:3]))
    return tracks


def save_tracks(path, tracks: list[FeatureTrack]) -> None:
    """Write tracks as CSV ``id,t,u,v``; floats keep full round-trip precision."""
    from .io import atomic_write

    lines = ["id,t,u,v"]
    for tr in tracks:
        for t, (u, v) in zip(tr.times, tr.pixels):
            lines.append(f"{tr.track_id},{float(t)!r},{float(u)!r},{float(v)!r}")
    atomic_write(path, "\n".join(lines) + "\n")


def _snap(track: FeatureTrack, t: float, eps: float) -> int | None:
    """Index of the track sample nearest to t if within eps, else None."""
    if len(track) == 0:
        return None
    i = int(np.searchsorted(track.times, t))
    best, gap = None, eps
    for j in (i - 1, i):
        if 0 <= j < len(track):
            d = abs(track.times[j] - t)
            if d <= gap:
                best, gap = j, d
    return best


def orb_motion_state(track: FeatureTrack, t: float, dt: float) -> ImageMotionState2:
    """Finite-difference pixel state of a track at time t with step dt.

    Needs samples within dt/4 of t, t+dt and t+2dt; raises
    InsufficientSamples otherwise.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    eps = dt / 4.0
    idx = [_snap(track, t + k * dt, eps) for k in range(3)]
    if any(i is None for i in idx):
        missing = [f"t+{k}*dt" for k, i in enumerate(idx) if i is None]
        raise InsufficientSamples(
            f"track '{track.track_id}' lacks samples within {eps:.4g}s of {', '.join(missing)}")
    o0, o1, o2 = (track.pixels[i] for i in idx)
    vel = (o1 - o0) / dt
    acc = (o2 - 2.0 * o1 + o0) / (dt * dt)
    return ImageMotionState2(t, o0, vel, acc)
