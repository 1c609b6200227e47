"""Temporal vector extraction with gradient filtering.

For each point p_i in frame t, query its K nearest neighbors in frames
t + offset and t + offset + 1, pair the two neighbor lists by distance rank,
and score temporal consistency as the mean paired displacement per frame
step:

    g_i = (1 / (K' * offset)) * sum_j || p_j^(2) - p_j^(1) ||

A smooth mover's own return appears near rank 1 in both future frames, so
its g_i equals its per-frame displacement; clutter that is resampled or
jittered frame-to-frame pairs unrelated positions and scores high. Points
with g_i <= tau keep their vectors, everything else is dropped.

Note the denominator is the frame offset (a count of frame steps), not the
wall-clock gap, so tau is a displacement-per-frame-step threshold in meters.

Surviving vectors chain into a trajectory by linking per-frame centroids of
surviving origin points across frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import PointCloudFrame, Trajectory
from .errors import DegenerateDt, EmptyFrame, TooFewFrames

__all__ = [
    "TknnParams",
    "TemporalVector",
    "knn_query",
    "mean_gradient",
    "build_temporal_vectors",
    "chain_trajectory",
]


@dataclass(frozen=True)
class TknnParams:
    """Parameters of the temporal-vector filter.

    k:                     neighbors per future frame (>= 1)
    frame_offset:          frame gap between origin and first neighbor frame (>= 1)
    tau:                   retention threshold on g_i (meters per frame step)
    max_neighbor_distance: first-future-frame neighbors farther than this
                           from the origin are discarded before pairing
                           (second-frame partners follow by rank); inf keeps
                           the raw KNN sets.
    """

    k: int = 4
    frame_offset: int = 1
    tau: float = 1.5
    max_neighbor_distance: float = np.inf

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.frame_offset < 1:
            raise ValueError("frame_offset must be >= 1")
        if not self.tau >= 0:
            raise ValueError("tau must be >= 0")
        if not self.max_neighbor_distance > 0:
            raise ValueError("max_neighbor_distance must be > 0")


@dataclass(frozen=True)
class TemporalVector:
    """A motion hypothesis from one origin point to one future neighbor.

    Frame/point indices identify the endpoints inside the frame sequence the
    vector was built from; chaining and successor lookup rely on them.
    """

    origin_time: float
    origin: np.ndarray   # (3,)
    target_time: float
    target: np.ndarray   # (3,)
    vector: np.ndarray   # (3,) target - origin
    gradient: float      # g of the origin point, m per frame step
    origin_frame: int
    origin_index: int
    target_frame: int
    target_index: int
    rank: int            # neighbor rank within the origin's paired KNN list

    def __post_init__(self):
        for name in ("origin", "target", "vector"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not self.target_time > self.origin_time:
            raise ValueError("target_time must exceed origin_time")


def _pair_distances(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    d = points - q
    return np.sqrt(np.einsum("ij,ij->i", d, d))


def knn_query(frame: PointCloudFrame, q, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and distances of the k nearest frame points to q.

    Returns exactly min(k, len(frame)) entries sorted by (distance, index):
    equal distances break toward the lower point index. A query coinciding
    with a frame point returns that point at distance zero.
    """
    if len(frame) == 0:
        raise EmptyFrame(f"frame at t={frame.timestamp} has no points")
    q = np.asarray(q, dtype=float).reshape(3)
    n = len(frame)
    kk = min(int(k), n)
    if kk < 1:
        raise ValueError("k must be >= 1")
    dists = _pair_distances(frame.points, q)
    # lexsort: secondary key first. Sorting the full frame costs O(n log n),
    # fine at the frame sizes this path serves; the batch path below uses a
    # k-d tree.
    order = np.lexsort((np.arange(n), dists))[:kk]
    return order, dists[order]


def _batch_knn(tree: cKDTree, points: np.ndarray, queries: np.ndarray, k: int,
               workers: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank-ordered KNN for many queries with stable tie-breaking.

    Returns (indices (Q, kk), distances (Q, kk), kk) where kk = min(k, n).
    Ties are resolved by recomputing exact distances and lexsorting on
    (distance, index), which also repairs any boundary tie the tree cut
    arbitrarily.
    """
    n = points.shape[0]
    kk = min(k, n)
    probe = min(kk + 1, n)
    d, idx = tree.query(queries, k=probe, workers=workers)
    if probe == 1:
        d = d[:, None]
        idx = idx[:, None]
    # Exact distances, recomputed the same way the brute-force path computes
    # them so float comparisons agree bit-for-bit.
    diff = points[idx] - queries[:, None, :]
    d = np.sqrt(np.einsum("qkj,qkj->qk", diff, diff))
    order = np.lexsort((idx, d), axis=1)
    idx = np.take_along_axis(idx, order, axis=1)
    d = np.take_along_axis(d, order, axis=1)

    if probe > kk:
        # A tie spanning the cut boundary needs the full tie group to decide
        # membership by index. Rare: only exact float-equal distances.
        boundary = d[:, kk - 1] == d[:, kk]
        for qi in np.flatnonzero(boundary):
            tied = d[qi, kk - 1]
            cand = tree.query_ball_point(queries[qi], tied + 1e-12)
            cand = np.asarray(sorted(cand))
            dc = _pair_distances(points[cand], queries[qi])
            keep = np.lexsort((cand, dc))[:kk]
            idx[qi, :kk] = cand[keep]
            d[qi, :kk] = dc[keep]
    return idx[:, :kk], d[:, :kk], kk


def mean_gradient(p, knn1: np.ndarray, knn2: np.ndarray, dt: float) -> float:
    """Mean paired-displacement gradient of one origin point.

    knn1 and knn2 are (K', 3) neighbor positions from the two future frames,
    already paired by distance rank. dt is the temporal gap between the two
    neighbor frames in the unit tau is expressed per (frame steps in the
    standard pipeline). The result does not depend on p: the origin point
    cancels out of the difference of the two vectors.
    """
    if dt <= 0:
        raise DegenerateDt(f"dt must be > 0, got {dt}")
    a = np.asarray(knn1, dtype=float).reshape(-1, 3)
    b = np.asarray(knn2, dtype=float).reshape(-1, 3)
    if a.shape != b.shape or a.shape[0] < 1:
        raise ValueError("knn1 and knn2 must be equal-length, non-empty (K', 3) arrays")
    return float(np.mean(np.linalg.norm(b - a, axis=1)) / dt)


def build_temporal_vectors(frames: list[PointCloudFrame], params: TknnParams,
                           workers: int = 1) -> list[TemporalVector]:
    """Run the temporal-vector filter over a frame sequence.

    Frames are sorted by timestamp; indices in the output refer to that
    order. For origin frame t the neighbor frames are t + frame_offset and
    t + frame_offset + 1. Origins whose g_i <= tau emit one vector per paired
    neighbor, ordered by (frame index, point index, neighbor rank). Empty
    origin or neighbor frames are skipped.
    """
    off = params.frame_offset
    if len(frames) < off + 2:
        raise TooFewFrames(f"need at least frame_offset + 2 = {off + 2} frames, got {len(frames)}")
    frames = sorted(frames, key=lambda f: f.timestamp)

    trees: dict[int, cKDTree] = {}

    def tree_for(i: int) -> cKDTree:
        if i not in trees:
            trees[i] = cKDTree(frames[i].points)
        return trees[i]

    out: list[TemporalVector] = []
    for t in range(len(frames) - off - 1):
        f0, f1, f2 = frames[t], frames[t + off], frames[t + off + 1]
        if len(f0) == 0 or len(f1) == 0 or len(f2) == 0:
            continue
        q = f0.points
        i1, d1, _ = _batch_knn(tree_for(t + off), f1.points, q, params.k, workers)
        i2, _, _ = _batch_knn(tree_for(t + off + 1), f2.points, q, params.k, workers)

        # The distance gate defines the neighborhood in the first future
        # frame only. Gating the second list by distance-to-origin would
        # reject any origin moving faster than gate/2 per frame, because its
        # own return sits ~2x the per-frame displacement away by then. The
        # second frame contributes pairing targets by rank.
        c1 = np.sum(d1 <= params.max_neighbor_distance, axis=1)
        kprime = np.minimum(c1, i2.shape[1])

        for pi in range(q.shape[0]):
            kp = int(kprime[pi])
            if kp == 0:
                continue
            pts1 = f1.points[i1[pi, :kp]]
            pts2 = f2.points[i2[pi, :kp]]
            g = mean_gradient(q[pi], pts1, pts2, float(off))
            if g <= params.tau:
                for rank in range(kp):
                    j = int(i1[pi, rank])
                    out.append(TemporalVector(
                        origin_time=f0.timestamp, origin=q[pi],
                        target_time=f1.timestamp, target=f1.points[j],
                        vector=f1.points[j] - q[pi], gradient=g,
                        origin_frame=t, origin_index=pi,
                        target_frame=t + off, target_index=j, rank=rank,
                    ))
    return out


def chain_trajectory(vectors: list[TemporalVector], chain_gap_max: int = 3) -> Trajectory:
    """Link surviving vector origins into the longest consistent trajectory.

    Per origin frame, surviving origin points (deduplicated per point index)
    average into a centroid. Consecutive centroids link when fewer than
    chain_gap_max frames are wholly missing between them; the longest chain
    is returned as a Trajectory of (frame timestamp, centroid).
    """
    if chain_gap_max < 1:
        raise ValueError("chain_gap_max must be >= 1")
    by_frame: dict[int, dict[int, np.ndarray]] = {}
    stamp: dict[int, float] = {}
    for v in vectors:
        by_frame.setdefault(v.origin_frame, {})[v.origin_index] = v.origin
        stamp[v.origin_frame] = v.origin_time
    if not by_frame:
        return Trajectory(np.empty(0), np.empty((0, 3)))

    frames = sorted(by_frame)
    centroids = {f: np.mean(np.stack(list(by_frame[f].values())), axis=0) for f in frames}

    chains: list[list[int]] = [[frames[0]]]
    for prev, cur in zip(frames, frames[1:]):
        missing = cur - prev - 1
        if missing < chain_gap_max:
            chains[-1].append(cur)
        else:
            chains.append([cur])
    best = max(chains, key=len)
    times = np.array([stamp[f] for f in best])
    positions = np.stack([centroids[f] for f in best])
    return Trajectory(times, positions)
