"""k-NN graph and per-point candidate quads."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .geometry import FilterThresholds, NORMAL_SIGN_TOL
from .mesh import PointCloud

log = logging.getLogger(__name__)

RANK_DECIMALS = 12


@dataclass(frozen=True)
class NeighborGraph:
    neighbors: np.ndarray  # (N, k), ascending distance, ties by index

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]

    def __len__(self):
        return self.neighbors.shape[0]


@dataclass(frozen=True)
class CandidateConfig:
    k: int = 12
    max_per_point: int = 12
    thresholds: FilterThresholds = field(default_factory=FilterThresholds)


def _sqdist_rows(points, i, cols):
    d = points[cols] - points[i]
    return (d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1]) + d[..., 2] * d[..., 2]


def knn_graph(cloud, k: int, extra: int = 8) -> NeighborGraph:
    """Exact k nearest neighbors of every point (excluding itself).

    Uses a KD-tree for the search; distances are recomputed directly and
    rows whose k-th distance ties with the search horizon are redone by brute
    force, so ties are always broken by the smaller index.
    """
    points = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, float)
    n = len(points)
    if k < 1:
        raise ValueError("k must be positive")
    if n <= k:
        raise ValueError(f"need more than k={k} points for a k-NN graph, got {n}; lower k")
    m = min(n, k + 1 + extra)
    _, cand = cKDTree(points).query(points, k=m)
    cand = np.asarray(cand, dtype=np.int64).reshape(n, m)
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        cols = cand[i][cand[i] != i]
        d2 = _sqdist_rows(points, i, cols)
        order = np.lexsort((cols, d2))
        cols, d2 = cols[order], d2[order]
        kth = d2[k - 1]
        if m < n and d2[-1] <= kth * (1 + 1e-9):
            cols = np.delete(np.arange(n), i)
            d2 = _sqdist_rows(points, i, cols)
            order = np.lexsort((cols, d2))
            cols = cols[order]
        out[i] = cols[:k]
    return NeighborGraph(out)


def local_frames(points, graph: NeighborGraph):
    """PCA of each point together with its neighbors.

    Returns ``(normals, eigenvalues)``; eigenvalues are descending per row and
    normals are signed to point away from the cloud centroid (with a fixed
    fallback when that direction is tangent).
    """
    points = np.asarray(points, dtype=np.float64)
    nbhd = np.concatenate([points[:, None, :], points[graph.neighbors]], axis=1)
    d = nbhd - nbhd.mean(axis=1, keepdims=True)
    cov = np.einsum("nji,njk->nik", d, d)
    w, V = np.linalg.eigh(cov)
    normals = V[:, :, 0].copy()
    ref = points - points.mean(axis=0)
    s = np.einsum("ni,ni->n", normals, ref)
    rn = np.linalg.norm(ref, axis=1)
    j = np.argmax(np.abs(normals), axis=1)
    fallback = np.where(normals[np.arange(len(normals)), j] < 0, -1.0, 1.0)
    sign = np.where(np.abs(s) > 1e-6 * np.maximum(rn, NORMAL_SIGN_TOL),
                    np.where(s < 0, -1.0, 1.0), fallback)
    return normals * sign[:, None], w[:, ::-1].copy()


@dataclass(frozen=True)
class CandidateFace:
    center: int
    ring: tuple
    quality: float


@dataclass(frozen=True)
class CandidateSet:
    """Column store of candidates: ``centers`` (M,), ``rings`` (M, 4), ``quality`` (M,)."""

    centers: np.ndarray
    rings: np.ndarray
    quality: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=np.int64).reshape(-1))
        object.__setattr__(self, "rings", np.asarray(self.rings, dtype=np.int64).reshape(-1, 4))
        object.__setattr__(self, "quality", np.asarray(self.quality, dtype=np.float64).reshape(-1))
        if not (len(self.centers) == len(self.rings) == len(self.quality)):
            raise ValueError("candidate columns have different lengths")

    def __len__(self):
        return len(self.centers)

    def __getitem__(self, i) -> CandidateFace:
        return CandidateFace(int(self.centers[i]), tuple(int(v) for v in self.rings[i]),
                             float(self.quality[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, mask) -> "CandidateSet":
        return CandidateSet(self.centers[mask], self.rings[mask], self.quality[mask])

    @classmethod
    def from_faces(cls, faces) -> "CandidateSet":
        faces = list(faces)
        if not faces:
            return cls(np.empty(0), np.empty((0, 4)), np.empty(0))
        return cls([f.center for f in faces], [f.ring for f in faces], [f.quality for f in faces])


def neighbor_triples(k: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(k), 3)), dtype=np.int64).reshape(-1, 3)


def rank_and_truncate(centers, rings, quality, max_per_point) -> CandidateSet:
    """Per center: J_s descending (rounded for tie stability), then ring tuple."""
    if len(centers) == 0:
        return CandidateSet(np.empty(0), np.empty((0, 4)), np.empty(0))
    qkey = -np.round(quality, RANK_DECIMALS)
    order = np.lexsort((rings[:, 3], rings[:, 2], rings[:, 1], rings[:, 0], qkey, centers))
    centers, rings, quality = centers[order], rings[order], quality[order]
    starts = np.r_[0, np.flatnonzero(np.diff(centers)) + 1]
    rank = np.arange(len(centers)) - np.repeat(starts, np.diff(np.r_[starts, len(centers)]))
    keep = rank < max_per_point
    return CandidateSet(centers[keep], rings[keep], quality[keep])


def propose_candidates(cloud: PointCloud, graph: NeighborGraph,
                       config: CandidateConfig = CandidateConfig(), backend=None) -> CandidateSet:
    """Evaluate all C(k, 3) neighbor triples of every point and keep the best.

    Each triple plus its center is ordered counter-clockwise, run through the
    geometric filters, and the survivors are ranked by scaled Jacobian.
    Output is sorted by center, then rank.
    """
    points = cloud.points
    normals, _ = local_frames(points, graph)
    triples = neighbor_triples(graph.k)
    rings, status, jac = _kernels.eval_triples(points, graph.neighbors, normals, triples,
                                               config.thresholds, backend=backend)
    ok = status == _kernels.PASS
    ci, _ = np.nonzero(ok)
    cands = rank_and_truncate(ci.astype(np.int64), rings[ok], jac[ok], config.max_per_point)
    log.debug("proposed %d candidates for %d points", len(cands), len(points))
    return cands


def generate(cloud: PointCloud, config: CandidateConfig = CandidateConfig(), backend=None):
    """knn_graph + propose_candidates in one call; returns ``(graph, candidates)``."""
    graph = knn_graph(cloud, config.k)
    return graph, propose_candidates(cloud, graph, config, backend=backend)
