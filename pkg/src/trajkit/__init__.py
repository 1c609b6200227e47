"""trajkit: recover and forecast 3D trajectories from sparse point clouds.

The pipeline takes asynchronous, cluttered point-cloud frames plus pixel
feature tracks from a wide-FOV camera and produces:

  1. temporal vectors that isolate temporally consistent motion (tknn),
  2. a chained 3D trajectory for the moving target,
  3. a calibration correction (time offset, rotation, translation) that
     aligns projected cloud motion with observed pixel tracks (align),
  4. pseudo-labels pairing 3D kinematic states with image motion states,
  5. position forecasts at configurable horizons, scored by RMSE (forecast).

A deterministic scene simulator (sim) plus CSV/binary file formats (io) and
a CLI (cli) wrap the pieces into a reproducible end-to-end pipeline.
"""

from .align import (AlignmentResult, AlignParams, CalibrationCorrection, MatchedPair,
                    MatchResult, PseudoLabel, cosine_similarity, emit_pseudo_labels,
                    full_state_loss, match_and_score, project_temporal_vector,
                    refine_calibration)
from .core import (CameraModel, ImageMotionState2, KinematicState3, Point3,
                   PointCloudFrame, Trajectory, seeded_rng, world_to_camera)
from .errors import (BehindCamera, DegenerateDt, DegenerateVector, DimensionMismatch,
                     EmptyFrame, InsufficientSamples, InvalidConfig, NonMonotoneTimestamps,
                     NoOverlap, OutOfRegime, ParseError, TargetNeverVisible, TooFewFrames,
                     TooFewLabels, TooFewMatches, TrajkitError)
from .flow import FeatureTrack, load_tracks, orb_motion_state, save_tracks
from .forecast import (MlpHead, extrapolate, fit_state, label_features, mlp_backward,
                       mlp_forward, predict, rmse_eval, train_head)
from .projection import (jacobian_time_derivative, project, project_many, project_state,
                         project_world, projection_jacobian)
from .sim import (MiscalibrationSpec, MiscalibrationTruth, SceneConfig, SceneData,
                  SensorConfig, TrackConfig, TrajectoryConfig, gen_trajectory,
                  inject_miscalibration, render_tracks, sample_sensor, scene_manifest,
                  simulate_scene)
from .tknn import (TemporalVector, TknnParams, build_temporal_vectors, chain_trajectory,
                   knn_query, mean_gradient)

__version__ = "0.1.0"

__all__ = [
    "AlignParams", "AlignmentResult", "BehindCamera", "CalibrationCorrection",
    "CameraModel", "DegenerateDt", "DegenerateVector", "DimensionMismatch",
    "EmptyFrame", "FeatureTrack", "ImageMotionState2", "InsufficientSamples",
    "InvalidConfig", "KinematicState3", "MatchResult", "MatchedPair",
    "MiscalibrationSpec", "MiscalibrationTruth", "MlpHead", "NoOverlap",
    "NonMonotoneTimestamps", "OutOfRegime", "ParseError", "Point3",
    "PointCloudFrame", "PseudoLabel", "SceneConfig", "SceneData", "SensorConfig",
    "TargetNeverVisible", "TemporalVector", "TknnParams", "TooFewFrames",
    "TooFewLabels", "TooFewMatches", "TrackConfig", "Trajectory",
    "TrajectoryConfig", "TrajkitError", "build_temporal_vectors",
    "chain_trajectory", "cosine_similarity", "emit_pseudo_labels", "extrapolate",
    "fit_state", "full_state_loss", "gen_trajectory", "inject_miscalibration",
    "jacobian_time_derivative", "knn_query", "label_features", "load_tracks",
    "match_and_score", "mean_gradient", "mlp_backward", "mlp_forward",
    "orb_motion_state", "predict", "project", "project_many", "project_state",
    "project_temporal_vector", "project_world", "projection_jacobian",
    "refine_calibration", "render_tracks", "rmse_eval", "sample_sensor",
    "save_tracks", "scene_manifest", "seeded_rng", "simulate_scene", "train_head",
    "world_to_camera", "__version__",
]
