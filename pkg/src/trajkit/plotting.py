"""SVG plots of forecast error and recovered trajectories.

Rendering is forced onto the Agg backend with a fixed svg.hashsalt and no
embedded creation date, so the same inputs produce byte-identical SVG files
(the determinism contract the rest of the pipeline honors).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .core import Trajectory  # noqa: E402

__all__ = ["plot_error_vs_horizon", "plot_trajectory"]

matplotlib.rcParams["svg.hashsalt"] = "trajkit"

_SAVE_OPTS = {"format": "svg", "metadata": {"Date": None}}


def plot_error_vs_horizon(metrics: dict, path: str) -> None:
    """Line plot of the aggregate error E against forecast horizon."""
    horizons = sorted(metrics["E"])
    values = [metrics["E"][h] for h in horizons]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(horizons, values, marker="o")
    ax.set_xlabel("horizon [s]")
    ax.set_ylabel("E [m]")
    ax.set_title("forecast error vs horizon")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def plot_trajectory(traj: Trajectory, path: str,
                    predictions: dict | None = None,
                    reference: Trajectory | None = None) -> None:
    """Top-down path and altitude profile, with optional forecast overlays.

    predictions maps horizon (s) -> Trajectory of forecast positions;
    reference is ground truth when available.
    """
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.8))
    if reference is not None:
        ax1.plot(reference.positions[:, 0], reference.positions[:, 1],
                 color="0.6", lw=1, label="truth")
        ax2.plot(reference.times, reference.positions[:, 2], color="0.6", lw=1)
    ax1.plot(traj.positions[:, 0], traj.positions[:, 1], "k.-", ms=3, lw=0.8,
             label="recovered")
    ax2.plot(traj.times, traj.positions[:, 2], "k.-", ms=3, lw=0.8)
    if predictions:
        for h in sorted(predictions):
            p = predictions[h]
            if len(p) == 0:
                continue
            ax1.plot(p.positions[:, 0], p.positions[:, 1], ".", ms=2,
                     label=f"+{h:g}s")
            ax2.plot(p.times, p.positions[:, 2], ".", ms=2)
    ax1.set_xlabel("x [m]")
    ax1.set_ylabel("y [m]")
    ax1.set_aspect("equal", adjustable="datalim")
    ax1.legend(fontsize=7, loc="best")
    ax2.set_xlabel("t [s]")
    ax2.set_ylabel("z [m]")
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
