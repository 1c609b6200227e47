"""Cross-modal alignment of cloud-derived motion against image feature tracks.

Each surviving temporal vector projects to a 2D motion hypothesis; image
feature tracks provide observed pixel motion. A matched (prediction,
observation) pair scores

    loss = (1 - cos(v_pred, v_obs)) + lambda * || X2_pred - X2_obs ||^2

where the X2 are the 6-dim pixel/velocity/acceleration states. Calibration
refinement does coordinate descent with golden-section line searches over a
7-dim correction (time offset, axis-angle rotation, translation), accepting
only strictly improving steps, so the recorded objective never increases.

Time-offset convention: a sensor whose stamps run ahead of the reference
clock by o (stamp = true time + o) is corrected by time_offset = o; corrected
event time = stamp - time_offset. Track data is never rewritten; candidate
offsets only move the times at which observations are read.

The per-pair loss summed over matched pairs is degenerate under optimization
(emptying the match set drives it to zero), so the descent objective adds a
fixed penalty per unmatched/unprojectable/degenerate prediction:

    cap = 2 + lambda * match_radius^2

which is at least the typical loss of a pair at the matching radius.
Velocity and acceleration noise can push an individual matched loss above
any fixed cap, which would flip the incentive back toward unmatching, so
the descent objective also truncates each matched contribution at the cap
(noisy pairs become uninformative, never repulsive). The reported alignment
loss remains the plain untruncated sum over matched pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .core import CameraModel, ImageMotionState2, KinematicState3, world_to_camera
from .errors import BehindCamera, DegenerateVector, TooFewMatches
from .flow import FeatureTrack
from .projection import project, project_many
from .tknn import TemporalVector, chain_trajectory

__all__ = [
    "AlignParams",
    "CalibrationCorrection",
    "MatchedPair",
    "MatchResult",
    "AlignmentResult",
    "PseudoLabel",
    "project_temporal_vector",
    "cosine_similarity",
    "full_state_loss",
    "match_and_score",
    "refine_calibration",
    "emit_pseudo_labels",
]

# Vector-norm threshold below which a direction is undefined (pixels).
VEC_EPS = 1e-9

# Minimum matched pairs for calibration refinement.
MIN_MATCHED_PAIRS = 10


@dataclass(frozen=True)
class AlignParams:
    """Alignment weights, gates and optimizer bounds.

    lambda_weight:      weight of the state-distance term in the pair loss
    match_radius:       max pixel distance for prediction->observation matching
    time_offset_bounds: |time offset| search bound (s)
    rotation_bounds:    |axis-angle component| bound (rad)
    translation_bounds: |translation component| bound (m)
    max_iters:          maximum coordinate-descent sweeps
    convergence_tol:    stop when a full sweep improves less than this
    """

    lambda_weight: float = 0.1
    match_radius: float = 20.0
    time_offset_bounds: float = 0.2
    rotation_bounds: float = 0.05
    translation_bounds: float = 0.5
    max_iters: int = 5
    convergence_tol: float = 1e-8

    def __post_init__(self):
        if self.lambda_weight < 0:
            raise ValueError("lambda_weight must be >= 0")
        if self.match_radius <= 0:
            raise ValueError("match_radius must be > 0")
        for name in ("time_offset_bounds", "rotation_bounds", "translation_bounds"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    @property
    def unmatched_penalty(self) -> float:
        return 2.0 + self.lambda_weight * self.match_radius ** 2


@dataclass(frozen=True)
class CalibrationCorrection:
    """Correction applied on top of the believed camera/timing.

    rotation is an axis-angle vector; the corrected extrinsic is
    exp([rotation]x) @ R, t + translation. Corrected event time of a cloud
    stamp is stamp - time_offset.
    """

    time_offset: float = 0.0
    rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    def apply_to(self, camera: CameraModel) -> CameraModel:
        delta = Rotation.from_rotvec(self.rotation).as_matrix()
        return camera.with_extrinsic(delta @ camera.rotation,
                                     camera.translation + self.translation)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.time_offset], self.rotation, self.translation])

    @classmethod
    def from_vector(cls, v) -> "CalibrationCorrection":
        v = np.asarray(v, dtype=float).reshape(7)
        return cls(float(v[0]), v[1:4], v[4:7])


@dataclass
class MatchedPair:
    """One aligned (cloud prediction, track observation) pair."""

    vector: TemporalVector
    world_state: KinematicState3       # chain kinematics at the origin frame, raw stamps
    pred_state: ImageMotionState2      # projection under the final correction
    obs_state: ImageMotionState2
    obs_track_id: str
    loss: float
    succ_target: np.ndarray | None = None  # successor vector endpoint for the accel stencil
    succ_time: float = math.nan


@dataclass
class MatchResult:
    pairs: list[tuple[int, int, float]]  # (pred index, obs index, pair loss)
    total_loss: float
    n_unmatched: int
    n_degenerate: int


@dataclass
class AlignmentResult:
    correction: CalibrationCorrection
    pairs: list[MatchedPair]
    total_loss: float                 # sum of matched pair losses at the final correction
    objective_history: list[float]    # penalized objective at accepted steps, non-increasing
    n_unmatched: int
    n_degenerate: int
    initial_total_loss: float
    initial_matched: int


@dataclass(frozen=True)
class PseudoLabel:
    """A cross-modally verified training sample."""

    timestamp: float
    pixel: np.ndarray                # (2,)
    image_state: ImageMotionState2   # X2 of the projected cloud motion
    world_state: KinematicState3     # X3 from the chained trajectory
    residual: float                  # pair loss, >= 0

    def __post_init__(self):
        object.__setattr__(self, "pixel", np.asarray(self.pixel, dtype=float).reshape(2))
        if not self.residual >= 0:
            raise ValueError("residual must be >= 0")


def cosine_similarity(a, b, eps: float = VEC_EPS) -> float:
    """Cosine of the angle between two vectors; raises DegenerateVector below eps."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na2 = float(np.dot(a, a))
    nb2 = float(np.dot(b, b))
    if na2 < eps * eps or nb2 < eps * eps:
        raise DegenerateVector(f"vector norm below {eps:g}")
    # single sqrt of the norm product keeps exact cases (antiparallel integer
    # vectors) exact; clip because rounding can still push |cos| past 1
    return float(np.clip(np.dot(a, b) / np.sqrt(na2 * nb2), -1.0, 1.0))


def full_state_loss(a: ImageMotionState2, b: ImageMotionState2) -> float:
    """Squared Euclidean distance between two 6-dim image motion states.

    When either side carries accel_valid=False its acceleration is a
    placeholder, not a measurement, so the comparison drops to the four
    pixel + velocity dimensions instead of punishing the placeholder.
    """
    d = a.as_vector() - b.as_vector()
    if not (a.accel_valid and b.accel_valid):
        d = d[:4]
    return float(np.dot(d, d))


def _pair_loss(pred: ImageMotionState2, obs: ImageMotionState2, lam: float) -> float:
    cos = cosine_similarity(pred.pixel_velocity, obs.pixel_velocity)
    return (1.0 - cos) + lam * full_state_loss(pred, obs)


def _second_diff_uneven(p0, p1, p2, h1, h2):
    """Three-point second derivative with uneven spacing; exact for quadratics."""
    return 2.0 * (h2 * p0 - (h1 + h2) * p1 + h1 * p2) / (h1 * h2 * (h1 + h2))


def project_temporal_vector(camera: CameraModel, vec: TemporalVector,
                            successor: TemporalVector | None = None,
                            ) -> tuple[np.ndarray, ImageMotionState2]:
    """Project a temporal vector's endpoints and form its image motion state.

    The 3D endpoints project individually (never the 3D vector itself);
    the 2D motion vector is their pixel difference. Velocity divides by the
    actual endpoint gap. Acceleration uses a three-point stencil through the
    successor vector's endpoint when one sharing this vector's target point
    is supplied; otherwise it is zero with accel_valid=False.
    """
    u0, _ = project(camera, world_to_camera(camera, vec.origin))
    u1, _ = project(camera, world_to_camera(camera, vec.target))
    gap = vec.target_time - vec.origin_time
    v2d = u1 - u0
    vel = v2d / gap
    if successor is not None:
        if (successor.origin_frame != vec.target_frame
                or successor.origin_index != vec.target_index):
            raise ValueError("successor must originate at this vector's target point")
        u2, _ = project(camera, world_to_camera(camera, successor.target))
        acc = _second_diff_uneven(u0, u1, u2, gap, successor.target_time - vec.target_time)
        state = ImageMotionState2(vec.origin_time, u0, vel, acc, accel_valid=True)
    else:
        state = ImageMotionState2(vec.origin_time, u0, vel, np.zeros(2), accel_valid=False)
    return v2d, state


def match_and_score(pred_states: list[ImageMotionState2],
                    obs_states: list[ImageMotionState2],
                    params: AlignParams) -> MatchResult:
    """Match each prediction to its nearest observation in pixel space.

    Duplicate observations are allowed. Predictions with no observation
    within match_radius are skipped and counted; pairs where either velocity
    is degenerate are skipped and counted separately. Total is the plain sum
    of matched pair losses.
    """
    if not obs_states:
        return MatchResult([], 0.0, len(pred_states), 0)
    obs_px = np.stack([o.pixel for o in obs_states])
    pairs = []
    total = 0.0
    n_unmatched = 0
    n_degenerate = 0
    for i, pred in enumerate(pred_states):
        d = np.linalg.norm(obs_px - pred.pixel, axis=1)
        j = int(np.argmin(d))
        if d[j] > params.match_radius:
            n_unmatched += 1
            continue
        try:
            loss = _pair_loss(pred, obs_states[j], params.lambda_weight)
        except DegenerateVector:
            n_degenerate += 1
            continue
        pairs.append((i, j, loss))
        total += loss
    return MatchResult(pairs, total, n_unmatched, n_degenerate)


# ---------------------------------------------------------------------------
# Calibration refinement internals: a vectorized evaluation of the matching
# objective over all temporal vectors at once.


class _Bundle:
    """Correction-independent arrays precomputed from the vector set."""

    def __init__(self, vectors: list[TemporalVector], chain_gap_max: int = 3):
        chain = chain_trajectory(vectors, chain_gap_max)
        self.chain = chain
        kin = _chain_kinematics(chain)

        succ: dict[tuple[int, int], TemporalVector] = {}
        for v in vectors:
            succ.setdefault((v.origin_frame, v.origin_index), v)

        keep: list[TemporalVector] = []
        times = chain.times
        for v in vectors:
            i = np.searchsorted(times, v.origin_time)
            on_chain = (i < times.size and abs(times[i] - v.origin_time) < 1e-9) or (
                i > 0 and abs(times[i - 1] - v.origin_time) < 1e-9)
            if on_chain:
                keep.append(v)
        self.vectors = keep
        self.n_offchain = len(vectors) - len(keep)

        n = len(keep)
        self.o_pts = np.zeros((n, 3))
        self.o_t = np.zeros(n)
        self.tg_pts = np.zeros((n, 3))
        self.tg_t = np.zeros(n)
        self.succ_pts = np.zeros((n, 3))
        self.succ_t = np.zeros(n)
        self.has_succ = np.zeros(n, bool)
        self.world_states: list[KinematicState3] = []
        self.successors: list[TemporalVector | None] = []
        for i, v in enumerate(keep):
            self.o_pts[i] = v.origin
            self.o_t[i] = v.origin_time
            self.tg_pts[i] = v.target
            self.tg_t[i] = v.target_time
            s = succ.get((v.target_frame, v.target_index))
            self.successors.append(s)
            if s is not None:
                self.succ_pts[i] = s.target
                self.succ_t[i] = s.target_time
                self.has_succ[i] = True
            self.world_states.append(kin(v.origin_time))


def _chain_kinematics(chain):
    """Finite-difference kinematics lookup over the chained trajectory.

    Velocity: central difference at interior samples, one-sided at the ends.
    Acceleration: uneven three-point stencil at interior samples, zero at the
    ends (and for chains shorter than 3).
    """
    t = chain.times
    p = chain.positions
    n = t.size
    vel = np.zeros((n, 3))
    acc = np.zeros((n, 3))
    if n >= 2:
        vel[0] = (p[1] - p[0]) / (t[1] - t[0])
        vel[-1] = (p[-1] - p[-2]) / (t[-1] - t[-2])
    for i in range(1, n - 1):
        vel[i] = (p[i + 1] - p[i - 1]) / (t[i + 1] - t[i - 1])
        acc[i] = _second_diff_uneven(p[i - 1], p[i], p[i + 1], t[i] - t[i - 1], t[i + 1] - t[i])

    def lookup(time: float) -> KinematicState3:
        i = int(np.searchsorted(t, time))
        if i < n and abs(t[i] - time) < 1e-9:
            j = i
        elif i > 0 and abs(t[i - 1] - time) < 1e-9:
            j = i - 1
        else:
            raise KeyError(f"time {time} not on chain")
        return KinematicState3(time, p[j], vel[j], acc[j])

    return lookup


class _Objective:
    """Penalized matching objective as a function of the 7-dim correction."""

    def __init__(self, bundle: _Bundle, tracks: list[FeatureTrack],
                 camera: CameraModel, params: AlignParams):
        self.b = bundle
        self.tracks = tracks
        self.camera = camera
        self.params = params
        self.cap = params.unmatched_penalty

    def evaluate(self, x: np.ndarray, want_pairs: bool = False):
        b = self.b
        params = self.params
        n = len(b.vectors)
        corr = CalibrationCorrection.from_vector(x)
        cam = corr.apply_to(self.camera)

        u0, v0, _ = project_many(cam, world_to_camera(cam, b.o_pts))
        u1, v1, _ = project_many(cam, world_to_camera(cam, b.tg_pts))
        u2, v2, _ = project_many(cam, world_to_camera(cam, b.succ_pts))
        gap = b.tg_t - b.o_t
        pred_vel = (u1 - u0) / gap[:, None]
        acc_ok = b.has_succ & v2
        pred_acc = np.zeros((n, 2))
        if np.any(acc_ok):
            h1 = gap[acc_ok, None]
            h2 = (b.succ_t - b.tg_t)[acc_ok, None]
            pred_acc[acc_ok] = 2.0 * (h2 * u0[acc_ok] - (h1 + h2) * u1[acc_ok]
                                      + h1 * u2[acc_ok]) / (h1 * h2 * (h1 + h2))
        valid = v0 & v1

        # Observed states at the corrected event times, one block per track.
        s = b.o_t - corr.time_offset
        eps = gap / 4.0
        T = len(self.tracks)
        obs_px = np.zeros((T, n, 2))
        obs_vel = np.zeros((T, n, 2))
        obs_acc = np.zeros((T, n, 2))
        obs_ok = np.zeros((T, n), bool)
        for ti, tr in enumerate(self.tracks):
            p0, ok0 = _snap_tol(tr, s, eps)
            p1, ok1 = _snap_tol(tr, s + gap, eps)
            p2, ok2 = _snap_tol(tr, s + 2.0 * gap, eps)
            obs_px[ti] = p0
            obs_vel[ti] = (p1 - p0) / gap[:, None]
            obs_acc[ti] = (p2 - 2.0 * p1 + p0) / (gap * gap)[:, None]
            obs_ok[ti] = ok0 & ok1 & ok2

        diff = obs_px - u0[None, :, :]
        dist = np.sqrt(np.einsum("tnj,tnj->tn", diff, diff))
        dist[~obs_ok] = np.inf
        dist[:, ~valid] = np.inf
        best = np.argmin(dist, axis=0)
        best_d = dist[best, np.arange(n)]
        matched = best_d <= params.match_radius

        bp = obs_px[best, np.arange(n)]
        bv = obs_vel[best, np.arange(n)]
        ba = obs_acc[best, np.arange(n)]

        pn2 = np.einsum("nj,nj->n", pred_vel, pred_vel)
        on2 = np.einsum("nj,nj->n", bv, bv)
        nondeg = (pn2 >= VEC_EPS * VEC_EPS) & (on2 >= VEC_EPS * VEC_EPS)
        use = matched & nondeg

        cos = np.zeros(n)
        cos[use] = np.clip(
            np.einsum("nj,nj->n", pred_vel[use], bv[use])
            / np.sqrt(pn2[use] * on2[use]), -1.0, 1.0)
        sd = np.zeros(n)
        # accel contributes only where the prediction has a real stencil
        for a_pred, a_obs, mask in ((u0, bp, use), (pred_vel, bv, use),
                                    (pred_acc, ba, use & acc_ok)):
            d = a_pred - a_obs
            sd += np.einsum("nj,nj->n", d, d) * mask
        pair_losses = (1.0 - cos) + params.lambda_weight * sd

        total = float(np.sum(pair_losses[use]))
        n_matched = int(np.sum(use))
        truncated = float(np.sum(np.minimum(pair_losses[use], self.cap)))
        objective = truncated + self.cap * (n - n_matched)
        n_degenerate = int(np.sum(matched & ~nondeg))
        n_unmatched = n - n_matched - n_degenerate

        if not want_pairs:
            return objective, total, n_matched, n_unmatched, n_degenerate

        pairs: list[MatchedPair] = []
        for i in np.flatnonzero(use):
            vec = self.b.vectors[i]
            pred_state = ImageMotionState2(vec.origin_time, u0[i], pred_vel[i],
                                           pred_acc[i], accel_valid=bool(acc_ok[i]))
            obs_state = ImageMotionState2(vec.origin_time, bp[i], bv[i], ba[i])
            succ = self.b.successors[i]
            pairs.append(MatchedPair(
                vector=vec, world_state=self.b.world_states[i],
                pred_state=pred_state, obs_state=obs_state,
                obs_track_id=self.tracks[best[i]].track_id,
                loss=float(pair_losses[i]),
                succ_target=None if succ is None else np.asarray(succ.target, float),
                succ_time=math.nan if succ is None else succ.target_time,
            ))
        return objective, total, n_matched, n_unmatched, n_degenerate, pairs


def _snap_tol(track: FeatureTrack, times: np.ndarray, eps: np.ndarray):
    """Nearest-sample pixels with a per-query tolerance."""
    if len(track) == 0:
        z = np.zeros((times.size, 2))
        return z, np.zeros(times.size, bool)
    i = np.searchsorted(track.times, times)
    left = np.clip(i - 1, 0, len(track) - 1)
    right = np.clip(i, 0, len(track) - 1)
    dl = np.abs(track.times[left] - times)
    dr = np.abs(track.times[right] - times)
    pick = np.where(dl <= dr, left, right)
    ok = np.minimum(dl, dr) <= eps
    return track.pixels[pick], ok


def _golden_section(f, lo: float, hi: float, xtol: float, max_iter: int = 80):
    """Golden-section minimization of f on [lo, hi]; returns (x, f(x))."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


GRID_POINTS = 21       # coarse bracketing scan per coordinate
FINE_GRID_POINTS = 41  # refinement scan inside one coarse step


def refine_calibration(vectors: list[TemporalVector], tracks: list[FeatureTrack],
                       camera: CameraModel, params: AlignParams,
                       chain_gap_max: int = 3) -> AlignmentResult:
    """Estimate the calibration correction minimizing the matching objective.

    Coordinate descent over (time offset, rotation x3, translation x3): each
    coordinate is scanned on a coarse grid within its bounds to bracket the
    basin, then refined by golden-section search. Only strictly improving
    steps are accepted, so the recorded objective history is non-increasing
    and a scene with nothing to correct returns the exact zero correction.

    Raises TooFewMatches when fewer than 10 pairs match at the identity
    correction.
    """
    bundle = _Bundle(vectors, chain_gap_max)
    obj = _Objective(bundle, tracks, camera, params)

    x = np.zeros(7)
    f_cur, total0, matched0, unmatched0, degenerate0 = obj.evaluate(x)
    if matched0 < MIN_MATCHED_PAIRS:
        raise TooFewMatches(
            f"{matched0} matched pairs at identity correction, need {MIN_MATCHED_PAIRS}")
    history = [f_cur]

    bnds = [params.time_offset_bounds] + [params.rotation_bounds] * 3 \
        + [params.translation_bounds] * 3
    for _ in range(params.max_iters):
        f_sweep_start = f_cur
        for ci in range(7):
            bound = bnds[ci]
            if bound <= 0:
                continue

            def f1d(val, _ci=ci):
                xx = x.copy()
                xx[_ci] = val
                return obj.evaluate(xx)[0]

            grid = np.linspace(-bound, bound, GRID_POINTS)
            fg = np.array([f1d(g) for g in grid])
            gi = int(np.argmin(fg))
            step = grid[1] - grid[0]
            lo = max(-bound, grid[gi] - step)
            hi = min(bound, grid[gi] + step)
            fine = np.linspace(lo, hi, FINE_GRID_POINTS)
            ff = np.array([f1d(g) for g in fine])
            fi = int(np.argmin(ff))
            # Track snapping makes the objective piecewise constant along
            # the time-offset axis; inside a flat basin the midpoint of the
            # tied run is the unbiased pick, not its left edge.
            j0 = fi
            while j0 > 0 and ff[j0 - 1] == ff[fi]:
                j0 -= 1
            j1 = fi
            while j1 + 1 < ff.size and ff[j1 + 1] == ff[fi]:
                j1 += 1
            fi = (j0 + j1) // 2
            fstep = fine[1] - fine[0]
            glo = max(lo, fine[fi] - fstep)
            ghi = min(hi, fine[fi] + fstep)
            xs, fs = _golden_section(f1d, glo, ghi, xtol=max(fstep * 1e-3, 1e-12))
            cand, f_cand = (xs, fs) if fs <= ff[fi] else (float(fine[fi]), ff[fi])
            if f_cand < f_cur:
                x[ci] = cand
                f_cur = f_cand
                history.append(f_cur)
        if f_sweep_start - f_cur < params.convergence_tol:
            break

    final = obj.evaluate(x, want_pairs=True)
    _, total, n_matched, n_unmatched, n_degenerate, pairs = final
    return AlignmentResult(
        correction=CalibrationCorrection.from_vector(x),
        pairs=pairs,
        total_loss=total,
        objective_history=history,
        n_unmatched=n_unmatched,
        n_degenerate=n_degenerate,
        initial_total_loss=total0,
        initial_matched=matched0,
    )


def emit_pseudo_labels(pairs: list[MatchedPair], camera: CameraModel,
                       correction: CalibrationCorrection,
                       params: AlignParams | None = None) -> list[PseudoLabel]:
    """Build pseudo-labels from aligned pairs under a calibration correction.

    One label per pair: the projected cloud state under the corrected camera,
    the chained-trajectory world kinematics, and the pair loss against the
    stored observation as the residual. Label timestamps are the corrected
    event times (stamp - time_offset), sorted ascending. Pairs whose
    projection fails or degenerates under this correction are dropped.
    """
    if params is None:
        params = AlignParams()
    cam = correction.apply_to(camera)
    labels: list[PseudoLabel] = []
    for pair in pairs:
        vec = pair.vector
        try:
            u0, _ = project(cam, world_to_camera(cam, vec.origin))
            u1, _ = project(cam, world_to_camera(cam, vec.target))
        except BehindCamera:
            continue
        gap = vec.target_time - vec.origin_time
        vel = (u1 - u0) / gap
        accel_valid = False
        acc = np.zeros(2)
        if pair.succ_target is not None:
            try:
                u2, _ = project(cam, world_to_camera(cam, pair.succ_target))
                acc = _second_diff_uneven(u0, u1, u2, gap, pair.succ_time - vec.target_time)
                accel_valid = True
            except BehindCamera:
                pass
        t_corr = vec.origin_time - correction.time_offset
        image_state = ImageMotionState2(t_corr, u0, vel, acc, accel_valid)
        try:
            residual = _pair_loss(image_state, pair.obs_state, params.lambda_weight)
        except DegenerateVector:
            continue
        world = KinematicState3(t_corr, pair.world_state.position,
                                pair.world_state.velocity, pair.world_state.acceleration)
        labels.append(PseudoLabel(t_corr, u0, image_state, world, max(residual, 0.0)))
    labels.sort(key=lambda lb: lb.timestamp)
    return labels
