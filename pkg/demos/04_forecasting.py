"""Forecast future positions two ways: quadratic fit and a trained head.

The quadratic route fits position/velocity/acceleration over a trailing
window and extrapolates analytically; it is exact on constant-acceleration
motion. The learned route trains a small network on pseudo-label features
and is compared against the do-nothing baseline that predicts the current
position.
"""

import numpy as np

from trajkit.align import PseudoLabel
from trajkit.core import ImageMotionState2, KinematicState3, Trajectory
from trajkit.forecast import (MlpHead, extrapolate, fit_state, label_features,
                              predict, train_head)


def quadratic_demo():
    times = np.arange(0.0, 10.0 + 1e-9, 0.05)
    accel = np.array([-0.1, 0.4, 0.2])
    vel0 = np.array([3.0, 0.5, 0.0])
    start = np.array([-12.0, 2.0, 30.0])
    pos = start + vel0 * times[:, None] + 0.5 * accel * times[:, None] ** 2
    traj = Trajectory(times, pos)

    print("constant-acceleration motion, fit at t=4.0 s:")
    state = fit_state(traj, 4.0, window=1.0)
    for h in (1.0, 3.0, 5.0):
        truth = start + vel0 * (4.0 + h) + 0.5 * accel * (4.0 + h) ** 2
        err = np.linalg.norm(extrapolate(state, h) - truth)
        print(f"  horizon {h:.0f} s: extrapolation error {err:.2e} m")

    rng = np.random.default_rng(4)
    noisy = Trajectory(times, pos + rng.normal(0.0, 0.05, pos.shape))
    print("same motion with 5 cm sample noise:")
    for h in (1.0, 3.0, 5.0):
        errs = []
        for t0 in np.arange(1.5, 5.0, 0.1):
            state = fit_state(noisy, float(t0), window=1.0)
            truth = start + vel0 * (t0 + h) + 0.5 * accel * (t0 + h) ** 2
            errs.append(np.sum((extrapolate(state, h) - truth) ** 2))
        print(f"  horizon {h:.0f} s: rms error {np.sqrt(np.mean(errs)):.3f} m")


def learned_demo():
    velocity = np.array([2.0, -1.0, 0.5])
    labels = []
    for i in range(150):
        t = 0.1 * i
        p = np.array([0.0, 0.0, 30.0]) + velocity * t
        img = ImageMotionState2(t, np.array([640.0, 360.0]), np.zeros(2), np.zeros(2))
        world = KinematicState3(t, p, velocity.copy(), np.zeros(3))
        labels.append(PseudoLabel(t, img.pixel.copy(), img, world, 0.0))

    horizons = (1.0, 2.0, 3.0, 5.0)
    head = MlpHead.initialize(sizes=(23, 128, 64, 3), seed=0)
    trained, curve = train_head(head, labels, horizons=horizons, epochs=200,
                                lr=1e-2, batch_size=32, seed=0)
    print(f"\ntrained head on {len(labels)} constant-velocity labels")
    print(f"  loss {curve[0]:.3f} -> {curve[-1]:.5f} over {len(curve)-1} epochs")

    base, model = [], []
    for lb in labels:
        for h in horizons:
            truth = lb.world_state.position + velocity * h
            base.append(np.sum((lb.world_state.position - truth) ** 2))
            model.append(np.sum((predict(trained, label_features(lb, h)) - truth) ** 2))
    print(f"  MSE {np.mean(model):.4f} vs zero-motion baseline {np.mean(base):.2f} "
          f"({1 - np.mean(model)/np.mean(base):.1%} reduction)")


if __name__ == "__main__":
    quadratic_demo()
    learned_demo()
