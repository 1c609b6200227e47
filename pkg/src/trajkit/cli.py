"""Command-line pipeline driver.

Stages communicate through files in the --out directory, so running
``pipeline`` once is equivalent to running simulate, extract, align,
forecast, eval, and plot in sequence against the same directory.

Exit codes: 0 success, 2 bad config/usage, 3 I/O or parse failure,
4 any other pipeline error. Failures print a single ``ERROR <code>: <msg>``
line to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import io as tio
from .align import emit_pseudo_labels, refine_calibration
from .config import (AlignConfig, ForecastConfig, IoConfig, RunConfig, SceneConfig,
                     TknnConfig, config_keys, load_config)
from .core import Trajectory
from .errors import InsufficientSamples, InvalidConfig, ParseError, TooFewLabels, TrajkitError
from .flow import load_tracks, save_tracks
from .forecast import (MlpHead, extrapolate, fit_state, label_features, predict,
                       rmse_eval, train_head)
from .sim import scene_manifest, simulate_scene
from .tknn import build_temporal_vectors, chain_trajectory

__all__ = ["main"]

PREDICTION_HEADER = "horizon,t0,t,x,y,z"


def _p(out: str, name: str) -> str:
    return os.path.join(out, name)


# ------------------------------------------------------------------ stages

def cmd_simulate(cfg: RunConfig, out: str, threads: int) -> None:
    scene = simulate_scene(cfg.sim, cfg.camera)
    ext = "bin" if cfg.io.cloud_format == "bin" else "csv"
    tio.save_clouds(_p(out, f"clouds.{ext}"), scene.frames)
    save_tracks(_p(out, "tracks.csv"), scene.tracks)
    tio.save_json(_p(out, "camera.json"), scene.camera_believed.to_dict())
    tio.save_json(_p(out, "manifest.json"), scene_manifest(scene))
    print(f"simulate: {len(scene.frames)} frames, {len(scene.tracks)} tracks -> {out}")


def _load_clouds_any(out: str):
    for name in ("clouds.csv", "clouds.bin"):
        path = _p(out, name)
        if os.path.exists(path):
            return tio.load_clouds(path)
    raise FileNotFoundError(f"no clouds.csv or clouds.bin in {out}")


def cmd_extract(cfg: RunConfig, out: str, threads: int) -> None:
    frames = _load_clouds_any(out)
    params = cfg.tknn.to_params()
    workers = -1 if threads == 0 else threads
    # Filter each sensor's stream on its own, then remap per-sensor frame
    # indices onto the merged (timestamp, sensor_id) timeline so chains and
    # saved vectors reference one global frame order.
    merged = sorted(range(len(frames)), key=lambda i: (frames[i].timestamp, frames[i].sensor_id))
    merged_pos = {idx: pos for pos, idx in enumerate(merged)}
    by_sensor: dict[str, list[int]] = {}
    for i, f in enumerate(frames):
        by_sensor.setdefault(f.sensor_id, []).append(i)
    vectors = []
    for sid in sorted(by_sensor):
        idxs = sorted(by_sensor[sid], key=lambda i: frames[i].timestamp)
        local = [frames[i] for i in idxs]
        vs = build_temporal_vectors(local, params, workers=workers)
        for v in vs:
            vectors.append(dataclasses.replace(
                v, origin_frame=merged_pos[idxs[v.origin_frame]],
                target_frame=merged_pos[idxs[v.target_frame]]))
    vectors.sort(key=lambda v: (v.origin_frame, v.origin_index, v.rank))
    traj = chain_trajectory(vectors, cfg.tknn.chain_gap_max)
    tio.save_vectors(_p(out, "vectors.csv"), vectors)
    tio.save_trajectory(_p(out, "trajectory.csv"), traj)
    print(f"extract: {len(vectors)} vectors, chain of {len(traj)} -> {out}")


def cmd_align(cfg: RunConfig, out: str, threads: int) -> None:
    from .core import CameraModel

    vectors = tio.load_vectors(_p(out, "vectors.csv"))
    tracks = load_tracks(_p(out, "tracks.csv"))
    camera = CameraModel.from_dict(tio.load_json(_p(out, "camera.json")))
    params = cfg.align.to_params()
    result = refine_calibration(vectors, tracks, camera, params,
                                chain_gap_max=cfg.tknn.chain_gap_max)
    corr = result.correction
    tio.save_correction(_p(out, "correction.json"), corr)
    tio.save_json(_p(out, "camera_corrected.json"), corr.apply_to(camera).to_dict())
    labels = emit_pseudo_labels(result.pairs, camera, corr, params)
    tio.save_labels(_p(out, "labels.csv"), labels)
    print(f"align: {len(result.pairs)} pairs, loss {result.total_loss:.6g}, "
          f"offset {corr.time_offset:+.4f}s, {len(labels)} labels -> {out}")


def _label_trajectory(labels) -> Trajectory:
    seen = {}
    for lb in labels:
        seen.setdefault(lb.timestamp, lb.world_state.position)
    times = np.array(sorted(seen))
    pos = np.stack([seen[t] for t in times])
    return Trajectory(times, pos)


def _analytic_predictions(labels, cfg: ForecastConfig):
    traj = _label_trajectory(labels)
    rows = []
    n_fit = 0
    for t0 in traj.times:
        try:
            state = fit_state(traj, float(t0), cfg.window)
        except InsufficientSamples:
            continue
        n_fit += 1
        for h in (0.0, *cfg.horizons):
            p = extrapolate(state, h)
            rows.append((h, float(t0), float(t0) + h, p[0], p[1], p[2]))
    if n_fit == 0:
        raise InsufficientSamples("no label time has enough trailing history to fit a state")
    return rows, None


def _mlp_predictions(labels, cfg: ForecastConfig, seed: int):
    head = MlpHead.initialize(sizes=(23, *cfg.hidden, 3), seed=seed)
    head, curve = train_head(head, labels, horizons=cfg.horizons, epochs=cfg.epochs,
                             lr=cfg.learning_rate, batch_size=cfg.batch_size, seed=seed)
    rows = []
    for lb in labels:
        rows.append((0.0, lb.timestamp, lb.timestamp, *lb.world_state.position))
        for h in cfg.horizons:
            p = predict(head, label_features(lb, h))
            rows.append((float(h), lb.timestamp, lb.timestamp + h, p[0], p[1], p[2]))
    return rows, (head, curve)


def cmd_forecast(cfg: RunConfig, out: str, threads: int) -> None:
    labels = tio.load_labels(_p(out, "labels.csv"))
    if not labels:
        raise TooFewLabels("labels.csv holds no labels")
    if cfg.forecast.method == "mlp":
        rows, trained = _mlp_predictions(labels, cfg.forecast, cfg.seed)
    else:
        rows, trained = _analytic_predictions(labels, cfg.forecast)
    lines = [PREDICTION_HEADER]
    for r in rows:
        lines.append(",".join(repr(float(v)) for v in r))
    tio.atomic_write(_p(out, "predictions.csv"), "\n".join(lines) + "\n")
    if trained is not None:
        head, curve = trained
        tio.save_head(_p(out, "head.bin"), head)
        tio.save_json(_p(out, "training_curve.json"), [float(v) for v in curve])
    print(f"forecast[{cfg.forecast.method}]: {len(rows)} predictions -> {out}")


def load_predictions(path: str) -> dict[float, Trajectory]:
    by_h: dict[float, list] = {}
    for lineno, f in tio._read_csv_rows(path, PREDICTION_HEADER):
        vals = [tio._parse_float(tok, path, lineno) for tok in f]
        by_h.setdefault(vals[0], []).append(vals[1:])
    out = {}
    for h, rows in by_h.items():
        rows.sort(key=lambda r: r[1])
        arr = np.asarray(rows)
        out[h] = Trajectory(arr[:, 1], arr[:, 2:5])
    return out


def _manifest_trajectory(out: str) -> Trajectory:
    man = tio.load_json(_p(out, "manifest.json"))
    tr = man["trajectory"]
    return Trajectory(np.asarray(tr["times"]), np.asarray(tr["positions"]),
                      np.asarray(tr["velocities"]), np.asarray(tr["accelerations"]))


def cmd_eval(cfg: RunConfig, out: str, threads: int) -> None:
    pred = load_predictions(_p(out, "predictions.csv"))
    gt = _manifest_trajectory(out)
    metrics = rmse_eval(pred, gt)
    tio.save_metrics_csv(_p(out, "metrics.csv"), metrics)
    tio.save_metrics_json(_p(out, "metrics.json"), metrics)
    parts = [f"E[{h:g}s]={metrics['E'][h]:.4g}" for h in sorted(metrics["E"])]
    print("eval: " + " ".join(parts) + f" -> {out}")


def cmd_plot(cfg: RunConfig, out: str, threads: int) -> None:
    from .plotting import plot_error_vs_horizon, plot_trajectory

    metrics = tio.load_metrics_csv(_p(out, "metrics.csv"))
    plot_error_vs_horizon(metrics, _p(out, "error_vs_horizon.svg"))
    traj = tio.load_trajectory(_p(out, "trajectory.csv"))
    reference = None
    if os.path.exists(_p(out, "manifest.json")):
        reference = _manifest_trajectory(out)
    predictions = None
    if os.path.exists(_p(out, "predictions.csv")):
        predictions = load_predictions(_p(out, "predictions.csv"))
    plot_trajectory(traj, _p(out, "trajectory.svg"), predictions, reference)
    print(f"plot: error_vs_horizon.svg, trajectory.svg -> {out}")


def cmd_pipeline(cfg: RunConfig, out: str, threads: int) -> None:
    cmd_simulate(cfg, out, threads)
    cmd_extract(cfg, out, threads)
    cmd_align(cfg, out, threads)
    cmd_forecast(cfg, out, threads)
    cmd_eval(cfg, out, threads)
    cmd_plot(cfg, out, threads)


# -------------------------------------------------------------------- main

COMMANDS = {
    "simulate": (cmd_simulate, "generate a synthetic scene (clouds, tracks, truth)",
                 [("sim", SceneConfig), ("io", IoConfig)]),
    "extract": (cmd_extract, "filter point clouds into temporal vectors + chained trajectory",
                [("tknn", TknnConfig)]),
    "align": (cmd_align, "recover calibration correction and emit pseudo-labels",
              [("align", AlignConfig)]),
    "forecast": (cmd_forecast, "predict future positions from pseudo-labels",
                 [("forecast", ForecastConfig)]),
    "eval": (cmd_eval, "score predictions against simulated ground truth", []),
    "plot": (cmd_plot, "render SVG summaries of metrics and trajectories", []),
    "pipeline": (cmd_pipeline, "run every stage in order against one directory",
                 [("sim", SceneConfig), ("tknn", TknnConfig), ("align", AlignConfig),
                  ("forecast", ForecastConfig)]),
}


def _epilog(blocks) -> str | None:
    if not blocks:
        return None
    lines = ["config keys:"]
    for name, cls in blocks:
        lines.append(f"  {name}: " + ", ".join(config_keys(cls)))
    lines.append("  camera: fx, fy, cx, cy, xi, k1, k2, width, height, extrinsic")
    lines.append("  top level: seed")
    return "\n".join(lines)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajkit",
        description="point-cloud to pixel-track trajectory pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text, blocks) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, epilog=_epilog(blocks),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="JSON run config (default: all defaults)")
        p.add_argument("--out", default="out", help="working directory (default: ./out)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for neighbor queries, 0 = all cores")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.threads < 0:
            raise InvalidConfig("--threads must be >= 0")
        os.makedirs(args.out, exist_ok=True)
        args.func(cfg, args.out, args.threads)
    except InvalidConfig as exc:
        print(f"ERROR 2: {exc}", file=sys.stderr)
        return 2
    except (OSError, ParseError) as exc:
        print(f"ERROR 3: {exc}", file=sys.stderr)
        return 3
    except TrajkitError as exc:
        print(f"ERROR 4: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
