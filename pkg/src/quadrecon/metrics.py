"""Mesh-quality and surface-fit metrics, and the report that bundles them."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.spatial import cKDTree

from . import geometry
from .dataset import bilinear, face_areas
from .errors import DegenerateFaceError
from .mesh import PointCloud, QuadMesh, edge_stats, manifold_watertight_scores

log = logging.getLogger(__name__)


def max_min_edge_ratio(face_points) -> float:
    """Longest over shortest edge of one quad (>= 1)."""
    return geometry.max_min_edge_ratio(face_points)


def mean_edge_ratio(mesh: QuadMesh) -> float:
    if mesh.n_faces == 0:
        return float("nan")
    return float(np.mean([max_min_edge_ratio(mesh.vertices[f]) for f in mesh.faces]))


def mean_scaled_jacobian(mesh: QuadMesh) -> float:
    if mesh.n_faces == 0:
        return float("nan")
    return float(np.mean([geometry.scaled_jacobian(mesh.vertices[f]) for f in mesh.faces]))


@dataclass
class AngleDistortion:
    rmse: float  # degrees, in [0, 90]
    mse: float  # squared degrees
    n_corners: int
    n_degenerate: int


def angle_distortion(mesh: QuadMesh) -> AngleDistortion:
    """Deviation of all interior corner angles from 90 degrees.

    Corners with a zero-length adjacent edge are skipped and counted.
    """
    dev = []
    skipped = 0
    for f in mesh.faces:
        q = mesh.vertices[f]
        L = np.roll(q, -1, axis=0) - q
        lengths = np.linalg.norm(L, axis=1)
        for i in range(4):
            la, lb = lengths[i - 1], lengths[i]
            if la == 0 or lb == 0:
                skipped += 1
                continue
            c = float(-L[i - 1] @ L[i]) / (la * lb)
            dev.append(math.degrees(math.acos(min(1.0, max(-1.0, c)))) - 90.0)
    if skipped:
        log.warning("angle distortion: skipped %d degenerate corners", skipped)
    if not dev:
        return AngleDistortion(float("nan"), float("nan"), 0, skipped)
    mse = float(np.mean(np.square(dev)))
    return AngleDistortion(math.sqrt(mse), mse, len(dev), skipped)


def sample_mesh(mesh: QuadMesh, n_samples: int = 10000, seed: int = 0) -> np.ndarray:
    """Area-weighted uniform-parameter bilinear samples on the quads."""
    rng = np.random.default_rng(seed)
    areas = face_areas(mesh.vertices, mesh.faces)
    total = areas.sum()
    if not total > 0:
        raise DegenerateFaceError("mesh has zero total area")
    chosen = rng.choice(mesh.n_faces, size=n_samples, p=areas / total)
    st = rng.uniform(0.0, 1.0, size=(n_samples, 2))
    return bilinear(mesh.vertices[mesh.faces[chosen]], st[:, 0], st[:, 1])


def point_set_chamfer(a, b) -> float:
    """Mean nearest-neighbor distance a->b plus b->a."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        return float("inf")
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(d_ab.mean() + d_ba.mean())


def chamfer_distance(target, mesh: QuadMesh, n_samples: int = 10000, seed: int = 0) -> float:
    """Symmetric Chamfer distance between ``target`` points and samples on ``mesh``."""
    pts = target.points if isinstance(target, PointCloud) else np.asarray(target)
    if mesh.n_faces == 0:
        log.warning("chamfer distance of an empty mesh is infinite")
        return float("inf")
    return point_set_chamfer(pts, sample_mesh(mesh, n_samples, seed))


def precision_recall(predicted, truth):
    predicted = np.asarray(predicted).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if predicted.shape != truth.shape:
        raise ValueError("predicted and true labels differ in length")
    tp = int(np.sum(predicted & truth))
    n_pred, n_true = int(predicted.sum()), int(truth.sum())
    if n_pred == 0:
        log.warning("no positive predictions; precision reported as 0")
    if n_true == 0:
        log.warning("no positive labels; recall reported as 0")
    return (tp / n_pred if n_pred else 0.0), (tp / n_true if n_true else 0.0)


@dataclass
class MetricsReport:
    mean_scaled_jacobian: float = float("nan")
    mean_max_min_edge_ratio: float = float("nan")
    angle_distortion: float = float("nan")
    angle_distortion_mse: float = float("nan")
    watertightness: float = float("nan")
    manifoldness: float = float("nan")
    chamfer_distance: float = float("nan")
    precision: float = float("nan")
    recall: float = float("nan")
    n_faces: int = 0
    n_vertices_used: int = 0
    warnings: list = field(default_factory=list)

    def values(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "warnings"}

    def to_text(self) -> str:
        vals = self.values()
        width = max(len(k) for k in vals)
        lines = [f"{k.ljust(width)}  {_fmt(v)}" for k, v in vals.items()]
        lines += [f"# warning: {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"

    def to_kv(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.values().items())

    def to_json(self) -> str:
        d = {k: (v if not isinstance(v, float) or math.isfinite(v) else str(v))
             for k, v in asdict(self).items()}
        return json.dumps(d, indent=2, sort_keys=True)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def evaluate(mesh: QuadMesh, target=None, predicted_labels=None, true_labels=None,
             n_samples: int = 10000, seed: int = 0) -> MetricsReport:
    """Fill every applicable field; a failing metric becomes a warning, not an exception."""
    rep = MetricsReport(n_faces=mesh.n_faces,
                        n_vertices_used=int(np.unique(mesh.faces).size))

    def attempt(name, fn):
        try:
            fn()
        except (DegenerateFaceError, ValueError) as exc:
            rep.warnings.append(f"{name}: {exc}")
            log.warning("%s: %s", name, exc)

    if mesh.n_faces == 0:
        rep.warnings.append("empty mesh")

    def quality():
        if mesh.n_faces:
            rep.mean_scaled_jacobian = mean_scaled_jacobian(mesh)
            rep.mean_max_min_edge_ratio = mean_edge_ratio(mesh)

    def angles():
        ad = angle_distortion(mesh)
        rep.angle_distortion, rep.angle_distortion_mse = ad.rmse, ad.mse
        if ad.n_degenerate:
            rep.warnings.append(f"angle distortion skipped {ad.n_degenerate} degenerate corners")

    def topology():
        rep.manifoldness, rep.watertightness = manifold_watertight_scores(edge_stats(mesh))

    def chamfer():
        rep.chamfer_distance = chamfer_distance(target, mesh, n_samples, seed)

    attempt("quality", quality)
    attempt("angle distortion", angles)
    attempt("topology", topology)
    if target is not None:
        attempt("chamfer distance", chamfer)
    if predicted_labels is not None and true_labels is not None:
        def pr():
            rep.precision, rep.recall = precision_recall(predicted_labels, true_labels)
        attempt("precision/recall", pr)
    return rep
