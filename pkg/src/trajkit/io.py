"""File formats: point clouds, labels, vectors, metrics, model heads.

All writers are atomic (temp file + rename in the target directory) and
format floats with repr(), so a save/load round trip reproduces values
bit-for-bit. Loaders reject malformed input with ParseError carrying
path:line context.

Cloud CSV: header ``t,sensor_id,x,y,z``; a frame is a maximal run of
consecutive rows sharing (t, sensor_id), preserving point order.

Cloud binary: magic ``ATPC0001``, little-endian. A sensor-name table
(u32 count, then u32 byte-length + UTF-8 per name), u64 row count, then
rows of five f64: t, sensor index, x, y, z.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .align import CalibrationCorrection, PseudoLabel
from .core import ImageMotionState2, KinematicState3, PointCloudFrame, Trajectory
from .errors import ParseError
from .tknn import TemporalVector

__all__ = [
    "atomic_write",
    "save_json",
    "load_json",
    "save_clouds",
    "load_clouds",
    "save_labels",
    "load_labels",
    "save_vectors",
    "load_vectors",
    "save_trajectory",
    "load_trajectory",
    "save_metrics_csv",
    "save_metrics_json",
    "load_metrics_csv",
    "save_correction",
    "load_correction",
    "save_head",
    "load_head",
    "CLOUD_MAGIC",
]

CLOUD_MAGIC = b"ATPC0001"

LABEL_HEADER = "t,u,v,du,dv,ddu,ddv,x,y,z,vx,vy,vz,ax,ay,az,residual"
VECTOR_HEADER = ("origin_frame,origin_index,origin_time,ox,oy,oz,"
                 "target_frame,target_index,target_time,tx,ty,tz,rank,gradient")


def atomic_write(path: str, data) -> None:
    """Write bytes or text to path via a temp file and atomic rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save_json(path: str, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2) + "\n")


def load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_float(tok: str, path: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: not a number: {tok!r}") from None


def _read_csv_rows(path: str, header: str):
    """Yield (lineno, fields) after validating the header line."""
    ncols = header.count(",") + 1
    with open(path) as fh:
        first = fh.readline()
        if first.strip() != header:
            raise ParseError(f"{path}:1: expected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != ncols:
                raise ParseError(f"{path}:{lineno}: expected {ncols} fields, got {len(fields)}")
            yield lineno, fields


# ---------------------------------------------------------------- clouds

def _frames_to_rows(frames):
    for f in frames:
        for p in f.points:
            yield f.timestamp, f.sensor_id, p[0], p[1], p[2]


def _rows_to_frames(rows) -> list[PointCloudFrame]:
    frames: list[PointCloudFrame] = []
    key = None
    buf: list = []
    for t, sid, x, y, z in rows:
        k = (t, sid)
        if k != key:
            if buf:
                frames.append(PointCloudFrame(key[0], key[1], np.asarray(buf)))
            key, buf = k, []
        buf.append((x, y, z))
    if buf:
        frames.append(PointCloudFrame(key[0], key[1], np.asarray(buf)))
    return frames


def save_clouds(path: str, frames: list[PointCloudFrame]) -> None:
    """Write frames as CSV or binary depending on the path extension."""
    if path.endswith(".bin"):
        sensors: list[str] = []
        index = {}
        for f in frames:
            if f.sensor_id not in index:
                index[f.sensor_id] = len(sensors)
                sensors.append(f.sensor_id)
        parts = [CLOUD_MAGIC, struct.pack("<I", len(sensors))]
        for name in sensors:
            raw = name.encode("utf-8")
            parts.append(struct.pack("<I", len(raw)) + raw)
        rows = list(_frames_to_rows(frames))
        parts.append(struct.pack("<Q", len(rows)))
        arr = np.array([(t, float(index[sid]), x, y, z) for t, sid, x, y, z in rows],
                       dtype="<f8").reshape(-1, 5)
        parts.append(arr.tobytes())
        atomic_write(path, b"".join(parts))
        return
    lines = ["t,sensor_id,x,y,z"]
    for t, sid, x, y, z in _frames_to_rows(frames):
        lines.append(f"{_fmt(t)},{sid},{_fmt(x)},{_fmt(y)},{_fmt(z)}")
    atomic_write(path, "\n".join(lines) + "\n")


def load_clouds(path: str) -> list[PointCloudFrame]:
    if path.endswith(".bin"):
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[:8] != CLOUD_MAGIC:
            raise ParseError(f"{path}: bad magic, not a cloud file")
        off = 8
        try:
            (nsens,) = struct.unpack_from("<I", blob, off)
            off += 4
            sensors = []
            for _ in range(nsens):
                (ln,) = struct.unpack_from("<I", blob, off)
                off += 4
                sensors.append(blob[off:off + ln].decode("utf-8"))
                off += ln
            (nrows,) = struct.unpack_from("<Q", blob, off)
            off += 8
            arr = np.frombuffer(blob, dtype="<f8", count=nrows * 5, offset=off).reshape(-1, 5)
        except (struct.error, ValueError) as exc:
            raise ParseError(f"{path}: truncated cloud file: {exc}") from exc
        rows = ((float(r[0]), sensors[int(r[1])], r[2], r[3], r[4]) for r in arr)
        return _rows_to_frames(rows)
    rows = []
    for lineno, f in _read_csv_rows(path, "t,sensor_id,x,y,z"):
        t = _parse_float(f[0], path, lineno)
        x = _parse_float(f[2], path, lineno)
        y = _parse_float(f[3], path, lineno)
        z = _parse_float(f[4], path, lineno)
        rows.append((t, f[1], x, y, z))
    return _rows_to_frames(rows)


# ---------------------------------------------------------------- labels

def save_labels(path: str, labels: list[PseudoLabel]) -> None:
    lines = [LABEL_HEADER]
    for lb in labels:
        img, w = lb.image_state, lb.world_state
        vals = [lb.timestamp, img.pixel[0], img.pixel[1],
                img.pixel_velocity[0], img.pixel_velocity[1],
                img.pixel_acceleration[0], img.pixel_acceleration[1],
                *w.position, *w.velocity, *w.acceleration, lb.residual]
        lines.append(",".join(_fmt(v) for v in vals))
    atomic_write(path, "\n".join(lines) + "\n")


def load_labels(path: str) -> list[PseudoLabel]:
    labels = []
    for lineno, f in _read_csv_rows(path, LABEL_HEADER):
        v = [_parse_float(tok, path, lineno) for tok in f]
        img = ImageMotionState2(v[0], np.array(v[1:3]), np.array(v[3:5]), np.array(v[5:7]))
        world = KinematicState3(v[0], np.array(v[7:10]), np.array(v[10:13]), np.array(v[13:16]))
        labels.append(PseudoLabel(v[0], np.array(v[1:3]), img, world, v[16]))
    return labels


# ---------------------------------------------------------------- vectors

def save_vectors(path: str, vectors: list[TemporalVector]) -> None:
    lines = [VECTOR_HEADER]
    for tv in vectors:
        vals = [str(tv.origin_frame), str(tv.origin_index), _fmt(tv.origin_time),
                _fmt(tv.origin[0]), _fmt(tv.origin[1]), _fmt(tv.origin[2]),
                str(tv.target_frame), str(tv.target_index), _fmt(tv.target_time),
                _fmt(tv.target[0]), _fmt(tv.target[1]), _fmt(tv.target[2]),
                str(tv.rank), _fmt(tv.gradient)]
        lines.append(",".join(vals))
    atomic_write(path, "\n".join(lines) + "\n")


def _parse_int(tok: str, path: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: not an integer: {tok!r}") from None


def load_vectors(path: str) -> list[TemporalVector]:
    out = []
    for lineno, f in _read_csv_rows(path, VECTOR_HEADER):
        of = _parse_int(f[0], path, lineno)
        oi = _parse_int(f[1], path, lineno)
        ot = _parse_float(f[2], path, lineno)
        origin = np.array([_parse_float(t, path, lineno) for t in f[3:6]])
        tf = _parse_int(f[6], path, lineno)
        ti = _parse_int(f[7], path, lineno)
        tt = _parse_float(f[8], path, lineno)
        target = np.array([_parse_float(t, path, lineno) for t in f[9:12]])
        rank = _parse_int(f[12], path, lineno)
        grad = _parse_float(f[13], path, lineno)
        out.append(TemporalVector(ot, origin, tt, target, target - origin, grad,
                                  origin_frame=of, origin_index=oi,
                                  target_frame=tf, target_index=ti, rank=rank))
    return out


# ------------------------------------------------------------- trajectory

def save_trajectory(path: str, traj: Trajectory) -> None:
    """CSV with t,x,y,z plus velocity/acceleration columns when stored."""
    cols = ["t,x,y,z"]
    have_v = traj.velocities is not None
    have_a = traj.accelerations is not None
    if have_v:
        cols.append("vx,vy,vz")
    if have_a:
        cols.append("ax,ay,az")
    lines = [",".join(cols)]
    for i in range(len(traj.times)):
        vals = [traj.times[i], *traj.positions[i]]
        if have_v:
            vals.extend(traj.velocities[i])
        if have_a:
            vals.extend(traj.accelerations[i])
        lines.append(",".join(_fmt(v) for v in vals))
    atomic_write(path, "\n".join(lines) + "\n")


def load_trajectory(path: str) -> Trajectory:
    with open(path) as fh:
        header = fh.readline().strip()
    widths = {
        "t,x,y,z": (4, False, False),
        "t,x,y,z,vx,vy,vz": (7, True, False),
        "t,x,y,z,vx,vy,vz,ax,ay,az": (10, True, True),
    }
    if header not in widths:
        raise ParseError(f"{path}:1: unrecognized trajectory header {header!r}")
    ncols, have_v, have_a = widths[header]
    rows = []
    for lineno, f in _read_csv_rows(path, header):
        rows.append([_parse_float(tok, path, lineno) for tok in f])
    arr = np.asarray(rows, dtype=float).reshape(-1, ncols)
    vel = arr[:, 4:7] if have_v else None
    acc = arr[:, 7:10] if have_a else None
    return Trajectory(arr[:, 0], arr[:, 1:4], vel, acc)


# ---------------------------------------------------------------- metrics

def _metric_rows(metrics: dict):
    for name in ("D_x", "D_y", "D_z"):
        yield name, "", metrics[name]
    for h in sorted(metrics["E"]):
        yield "E", h, metrics["E"][h]


def save_metrics_csv(path: str, metrics: dict) -> None:
    lines = ["metric,horizon,value"]
    for name, h, v in _metric_rows(metrics):
        lines.append(f"{name},{_fmt(h) if h != '' else ''},{_fmt(v)}")
    atomic_write(path, "\n".join(lines) + "\n")


def save_metrics_json(path: str, metrics: dict) -> None:
    obj = {name: metrics[name] for name in ("D_x", "D_y", "D_z")}
    for h in sorted(metrics["E"]):
        obj[f"E_{h:g}s"] = metrics["E"][h]
    save_json(path, obj)


def load_metrics_csv(path: str) -> dict:
    out: dict = {"E": {}}
    for lineno, f in _read_csv_rows(path, "metric,horizon,value"):
        name, h, v = f
        value = _parse_float(v, path, lineno)
        if name == "E":
            out["E"][_parse_float(h, path, lineno)] = value
        elif name in ("D_x", "D_y", "D_z"):
            out[name] = value
        else:
            raise ParseError(f"{path}:{lineno}: unknown metric {name!r}")
    return out


# ------------------------------------------------------------- correction

def save_correction(path: str, corr: CalibrationCorrection) -> None:
    save_json(path, {
        "time_offset": corr.time_offset,
        "rotation": list(map(float, corr.rotation)),
        "translation": list(map(float, corr.translation)),
    })


def load_correction(path: str) -> CalibrationCorrection:
    obj = load_json(path)
    extra = set(obj) - {"time_offset", "rotation", "translation"}
    if extra:
        raise ParseError(f"{path}: unknown keys {sorted(extra)}")
    try:
        return CalibrationCorrection(float(obj["time_offset"]),
                                     np.asarray(obj["rotation"], dtype=float),
                                     np.asarray(obj["translation"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad correction record: {exc}") from exc


# ------------------------------------------------------------------ head

def save_head(path: str, head) -> None:
    """Store an MLP head as a flat little-endian f64 blob + JSON descriptor.

    The blob concatenates every weight matrix (row-major), every bias, then
    the four normalization vectors. The descriptor at ``path + '.json'``
    records layer sizes so the blob can be sliced back.
    """
    chunks = [w.astype("<f8").tobytes() for w in head.weights]
    chunks += [b.astype("<f8").tobytes() for b in head.biases]
    for v in (head.feature_offset, head.feature_scale, head.target_offset, head.target_scale):
        chunks.append(np.asarray(v, dtype="<f8").tobytes())
    atomic_write(path, b"".join(chunks))
    save_json(path + ".json", {"layer_sizes": list(head.layer_sizes)})


def load_head(path: str):
    from .forecast import MlpHead

    desc = load_json(path + ".json")
    extra = set(desc) - {"layer_sizes"}
    if extra:
        raise ParseError(f"{path}.json: unknown keys {sorted(extra)}")
    sizes = [int(s) for s in desc["layer_sizes"]]
    if len(sizes) < 2:
        raise ParseError(f"{path}.json: layer_sizes must list input and output dims")
    with open(path, "rb") as fh:
        flat = np.frombuffer(fh.read(), dtype="<f8")
    need = sum(a * b for a, b in zip(sizes[1:], sizes[:-1]))
    need += sum(sizes[1:]) + 2 * sizes[0] + 2 * sizes[-1]
    if flat.size != need:
        raise ParseError(f"{path}: blob holds {flat.size} floats, descriptor implies {need}")
    weights, biases = [], []
    off = 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(flat[off:off + n_in * n_out].reshape(n_out, n_in).copy())
        off += n_in * n_out
    for n_out in sizes[1:]:
        biases.append(flat[off:off + n_out].copy())
        off += n_out
    fo = flat[off:off + sizes[0]].copy(); off += sizes[0]
    fs = flat[off:off + sizes[0]].copy(); off += sizes[0]
    to = flat[off:off + sizes[-1]].copy(); off += sizes[-1]
    ts = flat[off:off + sizes[-1]].copy()
    return MlpHead(weights, biases, fo, fs, to, ts)
