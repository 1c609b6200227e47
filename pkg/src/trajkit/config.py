"""Run configuration: one JSON object covering every pipeline stage.

Every block is optional and fully defaulted, so ``{}`` is a valid config.
Unknown keys are rejected at every nesting level with the offending key
path, which catches typos like "taus" before a long run burns time on
defaults the user thought they had overridden.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .align import AlignParams
from .core import CameraModel
from .errors import InvalidConfig
from .sim import (MiscalibrationSpec, SceneConfig, SensorConfig, TrackConfig,
                  TrajectoryConfig)
from .tknn import TknnParams

__all__ = [
    "TknnConfig",
    "AlignConfig",
    "ForecastConfig",
    "IoConfig",
    "RunConfig",
    "load_config",
    "config_keys",
    "DEFAULT_CAMERA",
]

FORECAST_METHODS = ("analytic", "mlp")

DEFAULT_CAMERA = CameraModel(fx=600.0, fy=600.0, cx=640.0, cy=360.0,
                             xi=1.0, k1=0.0, k2=0.0, width=1280, height=720)


@dataclass
class TknnConfig:
    k: int = 4
    frame_offset: int = 1
    tau: float = 1.5
    max_neighbor_distance: float = float("inf")
    chain_gap_max: int = 3

    def to_params(self) -> TknnParams:
        return TknnParams(k=self.k, frame_offset=self.frame_offset, tau=self.tau,
                          max_neighbor_distance=self.max_neighbor_distance)


@dataclass
class AlignConfig:
    lambda_weight: float = 0.1
    match_radius: float = 20.0
    time_offset_bounds: float = 0.2
    rotation_bounds: float = 0.05
    translation_bounds: float = 0.5
    max_iters: int = 5
    convergence_tol: float = 1e-8

    def to_params(self) -> AlignParams:
        return AlignParams(lambda_weight=self.lambda_weight,
                           match_radius=self.match_radius,
                           time_offset_bounds=self.time_offset_bounds,
                           rotation_bounds=self.rotation_bounds,
                           translation_bounds=self.translation_bounds,
                           max_iters=self.max_iters,
                           convergence_tol=self.convergence_tol)


@dataclass
class ForecastConfig:
    method: str = "analytic"        # "analytic" | "mlp"
    horizons: tuple = (1.0, 2.0, 3.0, 5.0)
    window: float = 1.0             # s of trailing history for the state fit
    epochs: int = 200
    learning_rate: float = 1e-2
    batch_size: int = 32
    hidden: tuple = (128, 64)


@dataclass
class IoConfig:
    cloud_format: str = "csv"       # "csv" | "bin"


@dataclass
class RunConfig:
    camera: CameraModel = field(default_factory=lambda: DEFAULT_CAMERA)
    tknn: TknnConfig = field(default_factory=TknnConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    sim: SceneConfig = field(default_factory=SceneConfig)
    io: IoConfig = field(default_factory=IoConfig)
    seed: int = 0

    def with_seed(self, seed: int) -> "RunConfig":
        """Override both the run seed and the scene seed (CLI --seed)."""
        sim = dataclasses.replace(self.sim, seed=seed)
        return dataclasses.replace(self, seed=seed, sim=sim)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise InvalidConfig(f"config must be an object, got {type(d).__name__}")
        _check_keys(d, {"camera", "tknn", "align", "forecast", "sim", "io", "seed"}, "")
        kwargs = {}
        if "camera" in d:
            kwargs["camera"] = CameraModel.from_dict(d["camera"])
        if "tknn" in d:
            kwargs["tknn"] = _build_flat(TknnConfig, d["tknn"], "tknn")
        if "align" in d:
            kwargs["align"] = _build_flat(AlignConfig, d["align"], "align")
        if "forecast" in d:
            fc = _build_flat(ForecastConfig, d["forecast"], "forecast")
            if fc.method not in FORECAST_METHODS:
                raise InvalidConfig(f"forecast.method must be one of {FORECAST_METHODS}")
            kwargs["forecast"] = fc
        if "sim" in d:
            kwargs["sim"] = _build_scene(d["sim"], "sim")
        if "io" in d:
            io = _build_flat(IoConfig, d["io"], "io")
            if io.cloud_format not in ("csv", "bin"):
                raise InvalidConfig("io.cloud_format must be 'csv' or 'bin'")
            kwargs["io"] = io
        if "seed" in d:
            kwargs["seed"] = _as_int(d["seed"], "seed")
        return cls(**kwargs)


def _check_keys(d: dict, allowed: set, path: str) -> None:
    if not isinstance(d, dict):
        raise InvalidConfig(f"'{path or 'config'}' must be an object, got {type(d).__name__}")
    extra = sorted(set(d) - allowed)
    if extra:
        where = f"{path}." if path else ""
        raise InvalidConfig("unknown config key(s): " + ", ".join(f"'{where}{k}'" for k in extra))


def _as_int(v, path: str) -> int:
    # bool is an int subclass; a config saying "seed": true is a mistake
    if isinstance(v, bool) or not isinstance(v, int):
        raise InvalidConfig(f"'{path}' must be an integer")
    return v


def _build_flat(cls, d: dict, path: str):
    """Construct a flat dataclass from a dict, rejecting unknown keys.

    Sequence values are tuplified so configs stay hashable/immutable.
    """
    names = {f.name for f in dataclasses.fields(cls)}
    _check_keys(d, names, path)
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad '{path}' block: {exc}") from exc


def _build_scene(d: dict, path: str) -> SceneConfig:
    names = {f.name for f in dataclasses.fields(SceneConfig)}
    _check_keys(d, names, path)
    kwargs: dict = {}
    for key, value in d.items():
        if key == "trajectory":
            kwargs[key] = _build_flat(TrajectoryConfig, value, f"{path}.trajectory")
        elif key == "sensors":
            if not isinstance(value, list):
                raise InvalidConfig(f"'{path}.sensors' must be a list")
            kwargs[key] = [_build_flat(SensorConfig, s, f"{path}.sensors[{i}]")
                           for i, s in enumerate(value)]
        elif key == "tracks":
            kwargs[key] = _build_flat(TrackConfig, value, f"{path}.tracks")
        elif key == "miscalibration":
            kwargs[key] = None if value is None else _build_flat(
                MiscalibrationSpec, value, f"{path}.miscalibration")
        elif key in ("bbox_min", "bbox_max"):
            kwargs[key] = None if value is None else tuple(value)
        else:
            kwargs[key] = value
    try:
        return SceneConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad '{path}' block: {exc}") from exc


def load_config(path: str) -> RunConfig:
    """Load and validate a JSON run config."""
    from .io import load_json

    return RunConfig.from_dict(load_json(path))


def config_keys(block) -> list[str]:
    """Field names of a config block, for CLI help text."""
    return [f.name for f in dataclasses.fields(block)]
