"""Mesh repair: score-driven non-manifold pruning and greedy quad hole filling."""
from __future__ import annotations

import heapq
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .mesh import QuadMesh, face_edges

log = logging.getLogger(__name__)


def face_score(e_b: int, e_n: int) -> int:
    """(E_b + 1) * (10 * E_n + 1); 1 exactly when the face has no boundary or non-manifold edge."""
    if not (0 <= e_b <= 4 and 0 <= e_n <= 4):
        raise ValueError(f"edge counts out of range: E_b={e_b}, E_n={e_n}")
    return (e_b + 1) * (10 * e_n + 1)


def _counts(edges, inc):
    e_b = sum(1 for e in edges if inc[e] == 1)
    e_n = sum(1 for e in edges if inc[e] >= 3)
    return e_b, e_n


@dataclass
class PruneResult:
    mesh: QuadMesh
    removed: list  # original face indices, in removal order


def prune_nonmanifold(mesh: QuadMesh, literal: bool = False, return_removed: bool = False):
    """Delete the highest-scoring faces one at a time until no edge has 3+ faces.

    Ties go to the face with more non-manifold edges, then the lower index.
    Scores of faces sharing an edge with a removed face are refreshed before
    the next pick. By default only faces touching a non-manifold edge may be
    removed; ``literal=True`` instead removes every face scoring above 2,
    which also erodes open boundaries.
    """
    faces = mesh.faces
    F = len(faces)
    edges = [face_edges(f) for f in faces]
    inc = Counter()
    by_edge = defaultdict(set)
    for i, es in enumerate(edges):
        inc.update(es)
        for e in es:
            by_edge[e].add(i)
    alive = np.ones(F, dtype=bool)

    def key(i):
        e_b, e_n = _counts(edges[i], inc)
        return (-face_score(e_b, e_n), -e_n, i)

    def eligible(k):
        score, neg_en = -k[0], -k[1]
        return score > 2 if literal else neg_en >= 1

    heap = [key(i) for i in range(F)]
    heapq.heapify(heap)
    removed = []
    while heap:
        k = heapq.heappop(heap)
        i = k[2]
        if not alive[i] or k != key(i):
            continue  # stale entry; the live one is elsewhere in the heap
        if not eligible(k):
            continue
        alive[i] = False
        removed.append(i)
        touched = set()
        for e in edges[i]:
            inc[e] -= 1
            by_edge[e].discard(i)
            touched |= by_edge[e]
        for j in sorted(touched):
            heapq.heappush(heap, key(j))
    out = mesh.with_faces(faces[alive])
    return PruneResult(out, removed) if return_removed else out


# ---------------------------------------------------------------- hole filling

@dataclass(frozen=True)
class FillConfig:
    angle_tol: float = 25.0  # degrees from 90 that still counts as a right angle
    max_passes: int = 10
    snap_fraction: float = 0.25  # pattern 3 reuses a boundary vertex this close (x edge length)


class _FillState:
    """Mutable face list plus edge incidence for the greedy filler."""

    def __init__(self, mesh: QuadMesh):
        self.vertices = [np.asarray(v, dtype=np.float64) for v in mesh.vertices]
        self.faces = [tuple(int(v) for v in f) for f in mesh.faces]
        self.keys = {frozenset(f) for f in self.faces}
        self.inc = Counter()
        self.owner = {}  # boundary edge -> face index (last writer; exact for incidence 1)
        for i, f in enumerate(self.faces):
            for e in face_edges(f):
                self.inc[e] += 1
                self.owner[e] = i
        self.patterns = Counter()

    def point(self, v):
        return self.vertices[v]

    def boundary_loops(self):
        """Closed or open chains of boundary edges, traced deterministically."""
        adj = defaultdict(list)
        for (a, b), c in self.inc.items():
            if c == 1:
                adj[a].append(b)
                adj[b].append(a)
        for v in adj:
            adj[v].sort()
        used = set()
        loops = []
        for start in sorted(adj):
            for nxt in adj[start]:
                e = (min(start, nxt), max(start, nxt))
                if e in used:
                    continue
                used.add(e)
                loop = [start, nxt]
                prev, cur = start, nxt
                closed = False
                while True:
                    step = None
                    for w in adj[cur]:
                        ew = (min(cur, w), max(cur, w))
                        if ew not in used and w != prev:
                            step = w
                            break
                    if step is None:
                        break
                    used.add((min(cur, step), max(cur, step)))
                    if step == start:
                        closed = True
                        break
                    loop.append(step)
                    prev, cur = cur, step
                loops.append((loop, closed))
        return loops

    def corner_angle(self, a, b, c):
        u = self.point(a) - self.point(b)
        w = self.point(c) - self.point(b)
        nu, nw = np.linalg.norm(u), np.linalg.norm(w)
        if nu == 0 or nw == 0:
            return float("nan")
        return math.degrees(math.acos(max(-1.0, min(1.0, float(u @ w) / (nu * nw)))))

    def _area_vector(self, f):
        q = [self.point(v) for v in f]
        return sum(np.cross(q[i] - q[i - 1], q[(i + 1) % 4] - q[i]) for i in range(4))

    def _on_open_side(self, new_face, new_pts):
        """Every existing edge the new face reuses must have its old face on the far side."""
        centroid = np.mean(new_pts, axis=0)
        for a, b in ((new_face[i], new_face[(i + 1) % 4]) for i in range(4)):
            e = (min(a, b), max(a, b))
            if self.inc.get(e, 0) != 1:
                continue
            old = self.faces[self.owner[e]]
            n = self._area_vector(old)
            pa, pb = self.point(a), self.point(b)
            perp = np.cross(n, pb - pa)
            s_old = float((np.mean([self.point(v) for v in old], axis=0) - pa) @ perp)
            s_new = float((centroid - pa) @ perp)
            if not s_old * s_new < 0:
                return False
        return True

    def try_add(self, face, new_point=None):
        face = tuple(int(v) for v in face)
        if len(set(face)) != 4 or frozenset(face) in self.keys:
            return False
        pts = [new_point if (new_point is not None and v == len(self.vertices)) else self.point(v)
               for v in face]
        for e in face_edges(face):
            if self.inc.get(e, 0) >= 2:
                return False  # would become non-manifold
        # reject folded or collinear corners
        for i in range(4):
            u = pts[(i + 3) % 4] - pts[i]
            w = pts[(i + 1) % 4] - pts[i]
            if np.linalg.norm(np.cross(u, w)) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(w):
                return False
        if not self._on_open_side(face, pts):
            return False
        if new_point is not None:
            self.vertices.append(np.asarray(new_point, dtype=np.float64))
        idx = len(self.faces)
        self.faces.append(face)
        self.keys.add(frozenset(face))
        for e in face_edges(face):
            self.inc[e] += 1
            self.owner[e] = idx
        return True

    def fill_loop(self, loop, closed, cfg: FillConfig) -> bool:
        n = len(loop)
        right = lambda a, b, c: abs(self.corner_angle(a, b, c) - 90.0) <= cfg.angle_tol
        if closed and n == 4:
            if self.try_add(loop):
                self.patterns[1] += 1
                return True
        span = range(n)
        at = (lambda i: loop[i % n]) if closed else (lambda i: loop[i] if 0 <= i < n else None)
        if n >= 4:
            for i in span:
                a, b, c, d = at(i), at(i + 1), at(i + 2), at(i + 3)
                if None in (a, b, c, d) or len({a, b, c, d}) < 4:
                    continue
                if right(a, b, c) and right(b, c, d) and self.try_add((a, b, c, d)):
                    self.patterns[2] += 1
                    return True
        for i in span:
            a, b, c = at(i - 1), at(i), at(i + 1)
            if None in (a, b, c) or len({a, b, c}) < 3 or not right(a, b, c):
                continue
            p = self.point(a) + self.point(c) - self.point(b)
            scale = 0.5 * (np.linalg.norm(self.point(a) - self.point(b))
                           + np.linalg.norm(self.point(c) - self.point(b)))
            snap = None
            best = cfg.snap_fraction * scale
            for v in loop:
                if v in (a, b, c):
                    continue
                dist = float(np.linalg.norm(self.point(v) - p))
                if dist <= best:
                    snap, best = v, dist
            if snap is not None:
                ok = self.try_add((a, b, c, snap))
            else:
                ok = self.try_add((a, b, c, len(self.vertices)), new_point=p)
            if ok:
                self.patterns[3] += 1
                return True
        return False

    def to_mesh(self) -> QuadMesh:
        return QuadMesh(np.array(self.vertices).reshape(-1, 3),
                        np.array(self.faces, dtype=np.int64).reshape(-1, 4))


@dataclass
class FillResult:
    mesh: QuadMesh
    passes: int
    pattern_counts: dict


def fill_holes(mesh: QuadMesh, config: FillConfig = FillConfig(), return_details: bool = False):
    """Greedy three-pattern hole filling over boundary loops.

    Each pass traces the boundary loops and tries, per loop and in priority
    order: close a 4-edge loop; bridge 3 edges whose two inner corners are
    near-right; complete a near-right 2-edge corner to a parallelogram with a
    new (or snapped) vertex. A fill is rejected if it would duplicate a face,
    create an edge with 3+ faces, fold a corner, or overlap the face already
    on the other side of a reused edge.
    """
    if mesh.n_faces and any(c >= 3 for c in Counter(
            e for f in mesh.faces for e in face_edges(f)).values()):
        log.warning("fill_holes called on a mesh with non-manifold edges; run prune first")
    state = _FillState(mesh)
    passes = 0  # passes that applied at least one fill
    for _ in range(config.max_passes):
        changed = False
        for loop, closed in state.boundary_loops():
            changed |= state.fill_loop(loop, closed, config)
        if not changed:
            break
        passes += 1
    out = state.to_mesh()
    details = FillResult(out, passes, dict(state.patterns))
    log.info("hole filling: %d passes, patterns %s", passes, dict(state.patterns))
    return details if return_details else out
