"""Trajectory forecasting: quadratic state fits, extrapolation, and a
learned correction head.

The analytic route fits position/velocity/acceleration by per-axis
least-squares quadratics over a trailing window and extrapolates with

    x(t + dt) = x + V dt + 0.5 a dt^2

The learned route is a small fully connected network (ReLU hidden layers,
identity output) trained on pseudo-labels to predict the future position
directly. Forward and backward passes are written out explicitly; gradients
are verified against finite differences in the test suite. Training is plain
mini-batch gradient descent with a seeded shuffle, bit-reproducible for a
fixed seed.

Head input features (23 dims):

    X3 (9) | X2 (6) | X2_obs (6) | t (1) | horizon / 5 s (1)

Persisted pseudo-labels carry no separate observed image state, so the
X2_obs slot repeats X2 when training from files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .align import PseudoLabel
from .core import KinematicState3, Trajectory, seeded_rng
from .errors import DimensionMismatch, InsufficientSamples, NoOverlap, TooFewLabels

__all__ = [
    "MlpHead",
    "fit_state",
    "extrapolate",
    "mlp_forward",
    "mlp_backward",
    "train_head",
    "predict",
    "label_features",
    "rmse_eval",
    "HORIZON_NORM",
    "MIN_LABELS",
]

HORIZON_NORM = 5.0   # seconds; horizons are fed to the head as dt / 5 s
MIN_LABELS = 50
FEATURE_DIM = 23
DEFAULT_HIDDEN = (128, 64)


def fit_state(traj: Trajectory, t: float, window: float) -> KinematicState3:
    """Least-squares quadratic state estimate at time t.

    Fits each axis over samples with t - window <= t_i <= t and reads off
    position, velocity and acceleration at t. Needs at least 3 samples in the
    window; exact (to rounding) when the motion is a polynomial of degree
    <= 2.
    """
    if window <= 0:
        raise ValueError("window must be > 0")
    mask = (traj.times >= t - window - 1e-12) & (traj.times <= t + 1e-12)
    ts = traj.times[mask]
    ps = traj.positions[mask]
    if ts.size < 3:
        raise InsufficientSamples(f"{ts.size} samples in [{t - window}, {t}], need 3")
    # centered times keep the normal equations well conditioned
    tau = ts - t
    coeffs = np.polynomial.polynomial.polyfit(tau, ps, deg=2)  # (3, 3): [c0, c1, c2] per axis
    return KinematicState3(t, coeffs[0], coeffs[1], 2.0 * coeffs[2])


def extrapolate(state: KinematicState3, horizon: float) -> np.ndarray:
    """Constant-acceleration extrapolation: x + V dt + 0.5 a dt^2."""
    dt = float(horizon)
    return state.position + state.velocity * dt + 0.5 * state.acceleration * dt * dt


# ---------------------------------------------------------------------------
# The learned head.


@dataclass
class MlpHead:
    """Fully connected network plus the feature/target scaling fitted at
    training time (identity until trained).

    weights[i] has shape (fan_out, fan_in); hidden layers are ReLU, the
    output layer is linear.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    feature_offset: np.ndarray = field(default=None)
    feature_scale: np.ndarray = field(default=None)
    target_offset: np.ndarray = field(default=None)
    target_scale: np.ndarray = field(default=None)

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be parallel, non-empty lists")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError(f"layer {i}: weight {W.shape} / bias {b.shape} mismatch")
            if i > 0 and W.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: fan-in {W.shape[1]} does not chain")
        if self.feature_offset is None:
            self.feature_offset = np.zeros(self.input_dim)
            self.feature_scale = np.ones(self.input_dim)
        if self.target_offset is None:
            self.target_offset = np.zeros(self.output_dim)
            self.target_scale = np.ones(self.output_dim)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [W.shape[0] for W in self.weights]

    def copy(self) -> "MlpHead":
        return MlpHead([W.copy() for W in self.weights], [b.copy() for b in self.biases],
                       self.feature_offset.copy(), self.feature_scale.copy(),
                       self.target_offset.copy(), self.target_scale.copy())

    @classmethod
    def initialize(cls, sizes=(FEATURE_DIM, *DEFAULT_HIDDEN, 3), seed: int = 0) -> "MlpHead":
        """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases."""
        rng = seeded_rng(seed, "mlp-init")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)


def _forward_cached(head: MlpHead, x: np.ndarray):
    """Forward pass keeping pre-activations for the backward pass."""
    a = x
    pre = []
    acts = [a]
    last = len(head.weights) - 1
    for i, (W, b) in enumerate(zip(head.weights, head.biases)):
        z = a @ W.T + b
        pre.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    return a, pre, acts


def _check_input(head: MlpHead, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x.reshape(1, -1) if single else x
    if xb.ndim != 2 or xb.shape[1] != head.input_dim:
        raise DimensionMismatch(f"input dim {x.shape} does not match head input {head.input_dim}")
    return xb, single


def mlp_forward(head: MlpHead, x) -> np.ndarray:
    """Raw network output for a single (in,) feature vector or a (B, in) batch.

    No feature/target scaling is applied here; see predict().
    """
    xb, single = _check_input(head, x)
    y, _, _ = _forward_cached(head, xb)
    return y[0] if single else y


def mlp_backward(head: MlpHead, x, target, frozen=()):
    """Gradients of the mean-squared-error loss w.r.t. every weight and bias.

    loss = mean over batch and output dims of (y - target)^2. Layers listed
    in ``frozen`` get exactly-zero gradients. Returns
    (grad_weights, grad_biases, loss).
    """
    xb, single = _check_input(head, x)
    tb = np.asarray(target, dtype=float)
    tb = tb.reshape(1, -1) if single else tb
    if tb.shape != (xb.shape[0], head.output_dim):
        raise DimensionMismatch(f"target shape {tb.shape} does not match "
                                f"({xb.shape[0]}, {head.output_dim})")
    y, pre, acts = _forward_cached(head, xb)
    err = y - tb
    loss = float(np.mean(err * err))
    # d loss / d y
    g = 2.0 * err / err.size
    frozen = set(frozen)
    grad_w = [None] * len(head.weights)
    grad_b = [None] * len(head.weights)
    for i in range(len(head.weights) - 1, -1, -1):
        if i < len(head.weights) - 1:
            g = g * (pre[i] > 0)  # ReLU mask
        grad_w[i] = g.T @ acts[i]
        grad_b[i] = np.sum(g, axis=0)
        if i in frozen:
            grad_w[i] = np.zeros_like(head.weights[i])
            grad_b[i] = np.zeros_like(head.biases[i])
        if i > 0:
            g = g @ head.weights[i]
    return grad_w, grad_b, loss


def predict(head: MlpHead, features) -> np.ndarray:
    """Network prediction in raw target units (applies the stored scaling)."""
    f = np.asarray(features, dtype=float)
    z = (f - head.feature_offset) / head.feature_scale
    y = mlp_forward(head, z)
    return y * head.target_scale + head.target_offset


def label_features(label: PseudoLabel, horizon: float,
                   obs_state=None) -> np.ndarray:
    """Assemble the 23-dim head input for one label and horizon."""
    x2 = label.image_state.as_vector()
    x2_obs = x2 if obs_state is None else obs_state.as_vector()
    return np.concatenate([
        label.world_state.as_vector(), x2, x2_obs,
        [label.timestamp], [horizon / HORIZON_NORM],
    ])


def _label_dataset(labels: list[PseudoLabel], horizons) -> tuple[np.ndarray, np.ndarray]:
    """Feature/target matrices from a pseudo-label sequence.

    Targets are label positions linearly interpolated at t + horizon; samples
    whose target time falls past the last label are dropped. Duplicate
    timestamps (several vectors per frame) collapse to their first label.
    """
    seen = set()
    uniq: list[PseudoLabel] = []
    for lb in labels:
        if lb.timestamp not in seen:
            seen.add(lb.timestamp)
            uniq.append(lb)
    times = np.array([lb.timestamp for lb in uniq])
    pos = np.stack([lb.world_state.position for lb in uniq])
    feats, targets = [], []
    for lb in uniq:
        for h in horizons:
            tq = lb.timestamp + h
            if tq > times[-1] + 1e-9:
                continue
            j = np.clip(np.searchsorted(times, tq, side="right") - 1, 0, times.size - 2)
            w = (tq - times[j]) / (times[j + 1] - times[j])
            target = pos[j] * (1.0 - w) + pos[j + 1] * w
            feats.append(label_features(lb, h))
            targets.append(target)
    if not feats:
        raise TooFewLabels("no (label, horizon) pair has a target inside the label span")
    return np.stack(feats), np.stack(targets)


def train_head(head: MlpHead, labels: list[PseudoLabel], horizons=(1.0, 2.0, 3.0, 5.0),
               epochs: int = 200, lr: float = 1e-2, batch_size: int = 32,
               seed: int = 0) -> tuple[MlpHead, list[float]]:
    """Mini-batch gradient descent on pseudo-labels.

    Returns a trained copy of the head (the input head is untouched) and the
    loss curve: raw-unit MSE over the full dataset, entry 0 before training
    and one entry after each epoch. Feature/target standardization is fitted
    on the dataset and stored on the returned head; with lr = 0 the weights
    come back bit-identical and the curve is flat. Deterministic for a fixed
    seed. Raises TooFewLabels below 50 labels.
    """
    if len(labels) < MIN_LABELS:
        raise TooFewLabels(f"{len(labels)} labels, need {MIN_LABELS}")
    X, Y = _label_dataset(labels, horizons)
    out = head.copy()
    out.feature_offset = X.mean(axis=0)
    out.feature_scale = np.where(X.std(axis=0) > 1e-12, X.std(axis=0), 1.0)
    out.target_offset = Y.mean(axis=0)
    out.target_scale = np.where(Y.std(axis=0) > 1e-12, Y.std(axis=0), 1.0)
    Xn = (X - out.feature_offset) / out.feature_scale
    Yn = (Y - out.target_offset) / out.target_scale

    def raw_mse() -> float:
        pred = mlp_forward(out, Xn) * out.target_scale + out.target_offset
        return float(np.mean((pred - Y) ** 2))

    rng = seeded_rng(seed, "mlp-train")
    curve = [raw_mse()]
    n = Xn.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            gw, gb, _ = mlp_backward(out, Xn[idx], Yn[idx])
            if lr != 0.0:
                for W, g in zip(out.weights, gw):
                    W -= lr * g
                for b, g in zip(out.biases, gb):
                    b -= lr * g
        curve.append(raw_mse())
    return out, curve


# ---------------------------------------------------------------------------
# Metrics.


def rmse_eval(pred: dict[float, Trajectory], gt: Trajectory,
              horizons=None) -> dict:
    """Per-axis and Euclidean RMSE of predictions against ground truth.

    pred maps horizon (s) -> Trajectory of predicted positions (timestamps
    are the instants being predicted). Ground truth is interpolated at those
    instants (cubic Hermite when it stores velocities); predictions outside
    the ground-truth span are dropped. E_h is the RMSE of the Euclidean
    error at horizon h; D_x/D_y/D_z are per-axis RMSE at the smallest
    available horizon (0 = current-pose error when present). Raises
    NoOverlap when any requested horizon has no aligned samples. numpy's
    pairwise summation keeps the reductions reproducible.
    """
    if horizons is None:
        horizons = sorted(pred)
    horizons = [float(h) for h in horizons]
    if not horizons:
        raise ValueError("no horizons to evaluate")
    lo, hi = gt.span
    errors: dict[float, np.ndarray] = {}
    for h in horizons:
        if h not in pred:
            raise KeyError(f"missing prediction series for horizon {h}")
        series = pred[h]
        mask = (series.times >= lo - 1e-9) & (series.times <= hi + 1e-9)
        if not np.any(mask):
            raise NoOverlap(f"horizon {h}: no predictions inside ground-truth span")
        truth = gt.position_at(series.times[mask])
        errors[h] = series.positions[mask] - truth

    base = errors[min(horizons)]
    rms = np.sqrt(np.mean(base * base, axis=0))
    metrics = {"D_x": float(rms[0]), "D_y": float(rms[1]), "D_z": float(rms[2]), "E": {}}
    for h in horizons:
        e = errors[h]
        metrics["E"][h] = float(np.sqrt(np.mean(np.sum(e * e, axis=1))))
    return metrics
