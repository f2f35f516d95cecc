"""Quad mesh containers and edge-incidence bookkeeping."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateFaceError
from .geometry import corner_normal  # noqa: F401  (re-export)

log = logging.getLogger(__name__)


def _as_points(a) -> np.ndarray:
    pts = np.array(a, dtype=np.float64)  # own copy: it is frozen below
    if pts.ndim != 2 or (pts.size and pts.shape[1] != 3):
        pts = pts.reshape(-1, 3)
    return pts


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    noise_flag: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = _as_points(self.points)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.noise_flag is not None:
            flags = np.array(self.noise_flag, dtype=bool).reshape(-1)
            if flags.shape[0] != pts.shape[0]:
                raise ValueError("noise_flag length does not match point count")
            flags.setflags(write=False)
            object.__setattr__(self, "noise_flag", flags)

    def __len__(self):
        return self.points.shape[0]

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def noise_mask(self) -> np.ndarray:
        if self.noise_flag is None:
            return np.zeros(len(self), dtype=bool)
        return self.noise_flag


@dataclass(frozen=True)
class QuadMesh:
    """Vertices plus cyclic quad faces. Immutable; edits build a new mesh."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        verts = _as_points(self.vertices)
        faces = np.array(self.faces, dtype=np.int64).reshape(-1, 4)
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(verts):
                raise ValueError("face index out of range")
        verts.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def face_points(self, i: int) -> np.ndarray:
        return self.vertices[self.faces[i]]

    def face_keys(self) -> list:
        return [frozenset(int(v) for v in f) for f in self.faces]

    def validate(self):
        """Check the quad invariants: distinct corners and no duplicate quads."""
        seen = {}
        for i, f in enumerate(self.faces):
            if len(set(f.tolist())) != 4:
                raise DegenerateFaceError(f"face {i} has a repeated vertex: {f.tolist()}")
            key = frozenset(f.tolist())
            if key in seen:
                raise ValueError(f"face {i} duplicates face {seen[key]}")
            seen[key] = i

    def with_faces(self, faces) -> "QuadMesh":
        return QuadMesh(self.vertices, np.asarray(faces, dtype=np.int64).reshape(-1, 4))


def face_edges(face):
    """The 4 undirected edges of a quad, as sorted index pairs."""
    a, b, c, d = (int(v) for v in face)
    return [tuple(sorted(e)) for e in ((a, b), (b, c), (c, d), (d, a))]


@dataclass(frozen=True)
class EdgeStats:
    incidence: dict = field(repr=False)
    n_boundary: int  # #E1
    n_manifold: int  # #E2
    n_edges: int  # #E_all

    @property
    def n_nonmanifold(self) -> int:
        return sum(1 for c in self.incidence.values() if c >= 3)


def edge_incidence(faces) -> Counter:
    counts = Counter()
    for i, f in enumerate(np.asarray(faces).reshape(-1, 4)):
        if len(set(int(v) for v in f)) != 4:
            raise DegenerateFaceError(f"face {i} has a repeated vertex: {list(map(int, f))}")
        counts.update(face_edges(f))
    return counts


def edge_stats(mesh: QuadMesh) -> EdgeStats:
    inc = edge_incidence(mesh.faces)
    e1 = sum(1 for c in inc.values() if c == 1)
    e2 = sum(1 for c in inc.values() if c == 2)
    return EdgeStats(dict(inc), e1, e2, len(inc))


def manifold_watertight_scores(stats: EdgeStats):
    """Return ``(manifoldness, watertightness)``.

    manifoldness = (#E1 + #E2) / #E_all and watertightness = #E2 / #E_all.
    An edgeless mesh scores (1, 1) so batch reports never abort on it.
    """
    if stats.n_edges == 0:
        log.warning("mesh has no edges; reporting manifoldness = watertightness = 1")
        return 1.0, 1.0
    manifold = (stats.n_boundary + stats.n_manifold) / stats.n_edges
    water = stats.n_manifold / stats.n_edges
    return manifold, water
