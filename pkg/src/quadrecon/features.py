"""The 29-wide per-candidate face descriptor.

Column layout (ring order for per-vertex blocks):

====  ==========  =========================================
cols  group       content
====  ==========  =========================================
0-11  coords      x,y,z of ring[0..3], minus the cloud centroid
12    jacobian    scaled Jacobian
13-16 sines       corner sines
17-28 normals     unit corner normals, x,y,z per corner
====  ==========  =========================================
"""
from __future__ import annotations

import numpy as np

from . import geometry
from ._kernels import _orient_np
from .candidates import CandidateFace, CandidateSet
from .errors import DegenerateFaceError
from .geometry import COLLINEAR_TOL
from .mesh import PointCloud

WIDTH = 29
GROUPS = {
    "coords": slice(0, 12),
    "jacobian": slice(12, 13),
    "sines": slice(13, 17),
    "normals": slice(17, 29),
}


def face_info_row(cloud: PointCloud, face: CandidateFace) -> np.ndarray:
    ring = list(face.ring)
    q = cloud.points[ring]
    row = np.empty(WIDTH)
    row[GROUPS["coords"]] = (q - cloud.centroid).reshape(-1)
    row[12] = geometry.scaled_jacobian(q)
    row[GROUPS["sines"]] = geometry.corner_sines(q)
    row[GROUPS["normals"]] = geometry.corner_normals(q).reshape(-1)
    return row


def face_info_matrix(cloud: PointCloud, cands: CandidateSet) -> np.ndarray:
    """Batched ``face_info_row`` for a whole candidate set, shape (M, 29)."""
    M = len(cands)
    out = np.empty((M, WIDTH))
    if M == 0:
        return out
    Q = cloud.points[cands.rings]  # (M, 4, 3)
    out[:, GROUPS["coords"]] = (Q - cloud.centroid).reshape(M, 12)
    L = np.roll(Q, -1, axis=1) - Q
    lengths = np.sqrt(np.einsum("mjc,mjc->mj", L, L))
    lp = np.roll(lengths, 1, axis=1)
    cr = np.cross(np.roll(L, 1, axis=1), L)
    cn = np.sqrt(np.einsum("mjc,mjc->mj", cr, cr))
    bad = (lengths.min(axis=1) == 0) | np.any(cn <= COLLINEAR_TOL * lp * lengths, axis=1)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise DegenerateFaceError(f"candidate {i} (ring {cands.rings[i].tolist()}) is degenerate")
    out[:, GROUPS["sines"]] = cn / (lp * lengths)
    out[:, GROUPS["normals"]] = (cr / cn[..., None]).reshape(M, 12)

    d = Q - Q.mean(axis=1, keepdims=True)
    _, V = np.linalg.eigh(np.einsum("mji,mjk->mik", d, d))
    nf = _orient_np(V[:, :, 0].copy(), cr.sum(axis=1))
    alpha = np.einsum("mjc,mc->mj", cr, nf)
    out[:, 12] = np.clip((alpha / (lp * lengths)).min(axis=1), -1.0, 1.0)
    return out


def drop_groups(info: np.ndarray, groups) -> np.ndarray:
    """Zero the named column groups, keeping the 29-wide layout."""
    if not groups:
        return info
    info = info.copy()
    for g in groups:
        if g not in GROUPS:
            raise ValueError(f"unknown face-info group {g!r}; choose from {sorted(GROUPS)}")
        info[:, GROUPS[g]] = 0.0
    return info
