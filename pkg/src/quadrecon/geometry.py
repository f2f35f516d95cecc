"""Per-quad geometry: corner normals, sines, scaled Jacobian, CCW ordering, filters.

Conventions for a quad ``q0 q1 q2 q3`` (cyclic):

* edge ``L_i = q_{i+1} - q_i``
* corner ``i`` sits at ``q_i``; its incoming edge is ``L_{i-1}`` and its
  outgoing edge is ``L_i``
* the corner normal is ``normalize(L_{i-1} x L_i)``

These scalar functions are the reference path. The batched kernels in
``_kernels`` repeat the same arithmetic in the same order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateFaceError

COLLINEAR_TOL = 1e-12
PLANE_TOL = 1e-12
NORMAL_SIGN_TOL = 1e-9


def _quad(face_points) -> np.ndarray:
    q = np.asarray(face_points, dtype=np.float64)
    if q.shape != (4, 3):
        raise ValueError(f"expected 4x3 quad coordinates, got shape {q.shape}")
    return q


def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def quad_edges(face_points) -> np.ndarray:
    q = _quad(face_points)
    return np.array([q[(i + 1) % 4] - q[i] for i in range(4)])


def _corner_data(q):
    """Edges, edge lengths, corner cross products and their norms.

    Raises DegenerateFaceError on a zero-length edge or a collinear corner.
    """
    L = np.array([q[(i + 1) % 4] - q[i] for i in range(4)])
    lengths = np.array([math.sqrt(_dot(L[i], L[i])) for i in range(4)])
    if lengths.min() == 0.0:
        raise DegenerateFaceError("zero-length edge")
    cross = np.array([_cross(L[(i + 3) % 4], L[i]) for i in range(4)])
    cnorm = np.array([math.sqrt(_dot(cross[i], cross[i])) for i in range(4)])
    for i in range(4):
        if cnorm[i] <= COLLINEAR_TOL * lengths[(i + 3) % 4] * lengths[i]:
            raise DegenerateFaceError(f"collinear edges at corner {i}")
    return L, lengths, cross, cnorm


def corner_normal(face_vertices, corner: int) -> np.ndarray:
    """Unit normal at ``corner``: incoming edge x outgoing edge, normalized."""
    q = _quad(face_vertices)
    if corner not in (0, 1, 2, 3):
        raise ValueError("corner must be in 0..3")
    a = q[corner] - q[(corner + 3) % 4]
    b = q[(corner + 1) % 4] - q[corner]
    c = _cross(a, b)
    n = math.sqrt(_dot(c, c))
    la = math.sqrt(_dot(a, a))
    lb = math.sqrt(_dot(b, b))
    if la == 0.0 or lb == 0.0 or n <= COLLINEAR_TOL * la * lb:
        raise DegenerateFaceError(f"degenerate corner {corner}")
    return c / n


def corner_normals(face_points) -> np.ndarray:
    _, _, cross, cnorm = _corner_data(_quad(face_points))
    return cross / cnorm[:, None]


def corner_sines(face_points) -> np.ndarray:
    """Sine of the angle between the two edges meeting at each corner."""
    _, lengths, _, cnorm = _corner_data(_quad(face_points))
    return np.array([cnorm[i] / (lengths[(i + 3) % 4] * lengths[i]) for i in range(4)])


def interior_angles(face_points) -> np.ndarray:
    """Unsigned interior corner angles in degrees, each in [0, 180]."""
    q = _quad(face_points)
    L, lengths, _, _ = _corner_data(q)
    out = np.empty(4)
    for i in range(4):
        a = -L[(i + 3) % 4]
        b = L[i]
        c = _dot(a, b) / (lengths[(i + 3) % 4] * lengths[i])
        out[i] = math.degrees(math.acos(min(1.0, max(-1.0, c))))
    return out


def edge_ratio(face_points) -> float:
    """Shortest over longest edge length, in (0, 1]."""
    L = quad_edges(face_points)
    lengths = np.sqrt((L * L).sum(axis=1))
    if lengths.min() == 0.0:
        raise DegenerateFaceError("zero-length edge")
    return float(lengths.min() / lengths.max())


def max_min_edge_ratio(face_points) -> float:
    return 1.0 / edge_ratio(face_points)


def plane_fit(points):
    """Least-squares plane of a small point set.

    Returns ``(centroid, eigenvalues ascending, eigenvectors as columns)`` of the
    scatter matrix; column 0 is the plane normal.
    """
    p = np.asarray(points, dtype=np.float64)
    m = p.mean(axis=0)
    d = p - m
    w, V = np.linalg.eigh(d.T @ d)
    return m, w, V


def _orient(n, ref):
    s = _dot(n, ref)
    if abs(s) > NORMAL_SIGN_TOL * math.sqrt(_dot(ref, ref)):
        return n if s > 0 else -n
    # reference is (nearly) tangent: fall back to a fixed sign rule
    j = int(np.argmax(np.abs(n)))
    return n if n[j] > 0 else -n


def face_normal(face_points) -> np.ndarray:
    """Best-fit plane normal, signed to agree with the quad's winding."""
    q = _quad(face_points)
    _, _, V = plane_fit(q)
    n = V[:, 0].copy()
    _, _, cross, _ = _corner_data(q)
    area_vec = cross[0] + cross[1] + cross[2] + cross[3]
    return _orient(n, area_vec)


def scaled_jacobian(face_points) -> float:
    """min over corners of the signed corner area over the product of its edges.

    1 for a square (any size), sin(theta) for a parallelogram, negative when a
    corner turns against the face normal (non-convex quad).
    """
    q = _quad(face_points)
    _, lengths, cross, _ = _corner_data(q)
    _, _, V = plane_fit(q)
    n = _orient(V[:, 0].copy(), cross[0] + cross[1] + cross[2] + cross[3])
    js = min(_dot(cross[i], n) / (lengths[(i + 3) % 4] * lengths[i]) for i in range(4))
    return float(min(1.0, max(-1.0, js)))


def order_ccw(center_index: int, indices, points, ref_normal) -> Optional[tuple]:
    """Order 4 points counter-clockwise about ``ref_normal``, center first.

    Points are sorted by angle about their centroid inside their least-squares
    plane. Returns the index 4-tuple or None if the points are (nearly)
    collinear.
    """
    idx = [int(i) for i in indices]
    if len(set(idx)) != 4 or center_index not in idx:
        raise ValueError("order_ccw needs 4 distinct indices including the center")
    p = np.asarray(points, dtype=np.float64).reshape(4, 3)
    m, w, V = plane_fit(p)
    if not w[2] > 0.0 or w[1] <= PLANE_TOL * w[2]:
        return None
    n = _orient(V[:, 0].copy(), np.asarray(ref_normal, dtype=np.float64))
    u = V[:, 2]
    v = _cross(n, u)
    keyed = []
    for j in range(4):
        d = p[j] - m
        keyed.append((math.atan2(_dot(d, v), _dot(d, u)), idx[j]))
    keyed.sort()
    ring = [k[1] for k in keyed]
    s = ring.index(center_index)
    return tuple(ring[s:] + ring[:s])


@dataclass(frozen=True)
class FilterThresholds:
    min_edge_ratio: float = 0.25
    min_sine: float = 0.3
    min_normal_dot: float = 0.5


@dataclass(frozen=True)
class FilterResult:
    passed: bool
    reason: str  # "ok", "edge_ratio", "sine", "coplanarity" or "degenerate"
    edge_ratio: float = float("nan")
    min_sine: float = float("nan")
    min_normal_dot: float = float("nan")

    def __bool__(self):
        return self.passed


def geometric_filter(face_points, thresholds: FilterThresholds = FilterThresholds()) -> FilterResult:
    """Elongation, orthogonality and coplanarity tests, checked in that order."""
    q = _quad(face_points)
    try:
        _, lengths, cross, cnorm = _corner_data(q)
    except DegenerateFaceError:
        return FilterResult(False, "degenerate")
    r = lengths.min() / lengths.max()
    sines = [cnorm[i] / (lengths[(i + 3) % 4] * lengths[i]) for i in range(4)]
    normals = cross / cnorm[:, None]
    dmin = min(_dot(normals[i], normals[j]) for i in range(4) for j in range(i + 1, 4))
    smin = min(sines)
    if r < thresholds.min_edge_ratio:
        return FilterResult(False, "edge_ratio", r, smin, dmin)
    if smin < thresholds.min_sine:
        return FilterResult(False, "sine", r, smin, dmin)
    if dmin < thresholds.min_normal_dot:
        return FilterResult(False, "coplanarity", r, smin, dmin)
    return FilterResult(True, "ok", r, smin, dmin)
