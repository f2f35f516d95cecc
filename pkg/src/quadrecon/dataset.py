"""Synthetic quad meshes, noisy clouds and candidate labels."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .candidates import CandidateConfig, CandidateSet, generate
from .mesh import PointCloud, QuadMesh

log = logging.getLogger(__name__)

KINDS = ("plane-grid", "cylinder", "torus", "cube-shell", "wavy-grid")


@dataclass(frozen=True)
class ShapeSpec:
    """Recipe for one synthetic shape.

    ``res`` means: grid vertex counts (nx, ny) for the grids, (around, along)
    vertex counts for the open cylinder, (major, minor) segment counts for the
    torus and segments per edge (n,) for the cube shell. ``spacing`` is the
    target edge length and ``jitter`` a uniform vertex perturbation given as a
    fraction of it.
    """

    kind: str = "plane-grid"
    res: tuple = (8, 8)
    noise_ratio: float = 0.10
    noise_amplitude: float = 0.2
    seed: int = 0
    spacing: float = 1.0
    jitter: float = 0.0
    wave_amplitude: float = 0.35
    wave_length: float = 6.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}; choose from {KINDS}")
        res = tuple(int(r) for r in np.atleast_1d(self.res))
        object.__setattr__(self, "res", res)
        need = 1 if self.kind == "cube-shell" else 2
        if len(res) < need:
            raise ValueError(f"{self.kind} needs {need} resolution values")
        lo = 1 if self.kind == "cube-shell" else 2
        if self.kind in ("cylinder", "torus"):
            lo = 3
        if min(res) < lo:
            raise ValueError(f"resolution {res} too small for {self.kind}")
        if not 0.0 <= self.noise_ratio < 0.5:
            raise ValueError("noise_ratio must be in [0, 0.5)")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")


def _grid(nx, ny, h):
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    verts = np.stack([ii.ravel() * h, jj.ravel() * h, np.zeros(nx * ny)], axis=1)
    vid = np.arange(nx * ny).reshape(nx, ny)
    faces = np.stack([vid[:-1, :-1].ravel(), vid[1:, :-1].ravel(),
                      vid[1:, 1:].ravel(), vid[:-1, 1:].ravel()], axis=1)
    return verts, faces


def _cylinder(n_around, n_along, h):
    radius = n_around * h / (2 * math.pi)
    t = 2 * math.pi * np.arange(n_around) / n_around
    verts = np.array([[radius * math.cos(a), radius * math.sin(a), j * h]
                      for j in range(n_along) for a in t])
    faces = []
    for j in range(n_along - 1):
        for i in range(n_around):
            i2 = (i + 1) % n_around
            faces.append([j * n_around + i, j * n_around + i2,
                          (j + 1) * n_around + i2, (j + 1) * n_around + i])
    return verts, np.array(faces)


def _torus(nu, nv, h):
    r = nv * h / (2 * math.pi)
    R = max(nu * h / (2 * math.pi), 2 * r)
    verts = []
    for i in range(nu):
        u = 2 * math.pi * i / nu
        for j in range(nv):
            v = 2 * math.pi * j / nv
            verts.append([(R + r * math.cos(v)) * math.cos(u),
                          (R + r * math.cos(v)) * math.sin(u),
                          r * math.sin(v)])
    faces = []
    for i in range(nu):
        for j in range(nv):
            i2, j2 = (i + 1) % nu, (j + 1) % nv
            faces.append([i * nv + j, i2 * nv + j, i2 * nv + j2, i * nv + j2])
    return np.array(verts), np.array(faces)


def _cube_shell(n, h):
    """Surface of an n x n x n block of cubes, outward-wound."""
    index = {}
    verts = []

    def vid(p):
        if p not in index:
            index[p] = len(verts)
            verts.append(p)
        return index[p]

    faces = []
    for axis in range(3):
        a1, a2 = (axis + 1) % 3, (axis + 2) % 3
        for side in (0, n):
            for i in range(n):
                for j in range(n):
                    corners = []
                    for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = [0, 0, 0]
                        p[axis] = side
                        p[a1] = i + di
                        p[a2] = j + dj
                        corners.append(vid(tuple(p)))
                    if side == 0:
                        corners = corners[::-1]
                    faces.append(corners)
    return np.array(verts, dtype=np.float64) * h, np.array(faces)


def synth_quad_mesh(spec: ShapeSpec) -> QuadMesh:
    h = spec.spacing
    if spec.kind in ("plane-grid", "wavy-grid"):
        verts, faces = _grid(spec.res[0], spec.res[1], h)
        if spec.kind == "wavy-grid":
            k = 2 * math.pi / (spec.wave_length * h)
            verts[:, 2] = spec.wave_amplitude * h * np.sin(k * verts[:, 0]) * np.cos(k * verts[:, 1])
    elif spec.kind == "cylinder":
        verts, faces = _cylinder(spec.res[0], spec.res[1], h)
    elif spec.kind == "torus":
        verts, faces = _torus(spec.res[0], spec.res[1], h)
    else:
        verts, faces = _cube_shell(spec.res[0], h)
    if spec.jitter > 0:
        rng = np.random.default_rng([spec.seed, 1])
        verts = verts + rng.uniform(-spec.jitter * h, spec.jitter * h, verts.shape)
    return QuadMesh(verts, faces)


def face_areas(vertices, faces) -> np.ndarray:
    """Mean of the two diagonal triangulations' areas of each quad."""
    Q = np.asarray(vertices)[np.asarray(faces)]
    a = 0.5 * np.linalg.norm(np.cross(Q[:, 1] - Q[:, 0], Q[:, 2] - Q[:, 0]), axis=1) \
        + 0.5 * np.linalg.norm(np.cross(Q[:, 2] - Q[:, 0], Q[:, 3] - Q[:, 0]), axis=1)
    b = 0.5 * np.linalg.norm(np.cross(Q[:, 2] - Q[:, 1], Q[:, 3] - Q[:, 1]), axis=1) \
        + 0.5 * np.linalg.norm(np.cross(Q[:, 3] - Q[:, 1], Q[:, 0] - Q[:, 1]), axis=1)
    return 0.5 * (a + b)


def bilinear(Q, s, t):
    """Points on quads ``Q`` (M, 4, 3) at parameters ``s, t`` in [0, 1]."""
    s = np.asarray(s)[:, None]
    t = np.asarray(t)[:, None]
    return ((1 - s) * (1 - t) * Q[:, 0] + s * (1 - t) * Q[:, 1]
            + s * t * Q[:, 2] + (1 - s) * t * Q[:, 3])


def mean_edge_length(mesh: QuadMesh) -> float:
    Q = mesh.vertices[mesh.faces]
    return float(np.linalg.norm(np.roll(Q, -1, axis=1) - Q, axis=2).mean())


def inject_noise(mesh: QuadMesh, spec: ShapeSpec, return_details: bool = False):
    """Mesh vertices plus ``round(noise_ratio * V)`` off-surface noise points.

    Noise faces are drawn with probability proportional to area; each point is
    a uniform bilinear sample of its face pushed along the face normal by a
    scalar uniform in [-A, A], A = noise_amplitude * mean edge length.
    """
    V = mesh.n_vertices
    n_noise = int(round(spec.noise_ratio * V))
    rng = np.random.default_rng([spec.seed, 2])
    details = {"faces": np.empty(0, np.int64), "st": np.empty((0, 2)),
               "offsets": np.empty(0), "amplitude": 0.0}
    if n_noise == 0 or mesh.n_faces == 0:
        cloud = PointCloud(mesh.vertices.copy(), np.zeros(V, dtype=bool))
        return (cloud, details) if return_details else cloud
    areas = face_areas(mesh.vertices, mesh.faces)
    chosen = rng.choice(mesh.n_faces, size=n_noise, p=areas / areas.sum())
    st = rng.uniform(0.0, 1.0, size=(n_noise, 2))
    amp = spec.noise_amplitude * mean_edge_length(mesh)
    offsets = rng.uniform(-amp, amp, size=n_noise)
    Q = mesh.vertices[mesh.faces[chosen]]
    base = bilinear(Q, st[:, 0], st[:, 1])
    nrm = np.cross(Q[:, 2] - Q[:, 0], Q[:, 3] - Q[:, 1])
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    noise = base + offsets[:, None] * nrm
    cloud = PointCloud(np.vstack([mesh.vertices, noise]),
                       np.r_[np.zeros(V, dtype=bool), np.ones(n_noise, dtype=bool)])
    details = {"faces": chosen, "st": st, "offsets": offsets, "amplitude": amp}
    return (cloud, details) if return_details else cloud


def label_candidates(cands: CandidateSet, reference: QuadMesh, noise_mask=None) -> np.ndarray:
    """1 where a candidate's vertex set equals some reference face's, else 0."""
    truth = set(reference.face_keys())
    labels = np.fromiter((frozenset(r) in truth for r in cands.rings.tolist()),
                         dtype=np.int64, count=len(cands))
    if noise_mask is not None and len(cands):
        labels[np.asarray(noise_mask)[cands.rings].any(axis=1)] = 0
    return labels


def class_weight(labels, multiplier: float = 1.1) -> float:
    """Positive-class weight: ``multiplier * #negatives / #positives``."""
    labels = np.asarray(labels)
    pos = int((labels == 1).sum())
    if pos == 0:
        raise ValueError("no positive labels; sample cannot be used for training")
    return multiplier * (len(labels) - pos) / pos


@dataclass
class LabeledSample:
    cloud: PointCloud
    candidates: CandidateSet
    labels: np.ndarray
    reference: QuadMesh
    name: str = ""
    spec: Optional[ShapeSpec] = None
    graph: Optional[object] = field(default=None, repr=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.labels) != len(self.candidates):
            raise ValueError("labels and candidates differ in length")


def make_sample(spec: ShapeSpec, config: CandidateConfig = CandidateConfig(),
                name: str = "") -> LabeledSample:
    mesh = synth_quad_mesh(spec)
    cloud = inject_noise(mesh, spec)
    graph, cands = generate(cloud, config)
    labels = label_candidates(cands, mesh, cloud.noise_mask())
    return LabeledSample(cloud, cands, labels, mesh, name or spec.kind, spec, graph)


def default_corpus(seed: int = 0, noise_ratio: float = 0.10):
    """The 8 training + 2 held-out shapes used by the end-to-end checks.

    Held-out shapes are new instances (own seed, jitter and noise draw) whose
    resolutions lie between those of same-kind training shapes.
    """
    def s(kind, res, i, **kw):
        return ShapeSpec(kind, res, noise_ratio=noise_ratio, seed=seed * 100 + i,
                         jitter=0.03, **kw)
    train = [
        s("plane-grid", (12, 10), 0),
        s("wavy-grid", (14, 12), 1),
        s("cylinder", (16, 9), 2),
        s("torus", (18, 8), 3),
        s("cube-shell", (4,), 4),
        s("wavy-grid", (11, 13), 5, wave_length=5.0),
        s("torus", (20, 9), 6),
        s("cube-shell", (6,), 7),
    ]
    test = [s("torus", (19, 8), 8), s("cube-shell", (5,), 9)]
    return train, test


def with_seed(spec: ShapeSpec, seed: int) -> ShapeSpec:
    return replace(spec, seed=seed)
