"""Hot loop of candidate generation: evaluate every neighbor triple of every point.

Two interchangeable implementations produce identical rings and status codes:
``eval_triples_numba`` (explicit loops, compiled with numba when available) and
``eval_triples_numpy`` (batched numpy). ``eval_triples`` picks one according to
``_accel.use_numba()``.
"""
import math

import numpy as np

from ._accel import njit, use_numba
from .geometry import COLLINEAR_TOL, NORMAL_SIGN_TOL, PLANE_TOL

PASS = 0
REJECT_ORDER = 1  # collinear / degenerate plane in order_ccw
REJECT_DEGENERATE = 2
REJECT_EDGE_RATIO = 3
REJECT_SINE = 4
REJECT_COPLANAR = 5

STATUS_NAMES = {
    PASS: "ok",
    REJECT_ORDER: "collinear",
    REJECT_DEGENERATE: "degenerate",
    REJECT_EDGE_RATIO: "edge_ratio",
    REJECT_SINE: "sine",
    REJECT_COPLANAR: "coplanarity",
}


@njit(cache=True)
def _orient_nb(n, ref):
    s = n[0] * ref[0] + n[1] * ref[1] + n[2] * ref[2]
    rn = math.sqrt(ref[0] * ref[0] + ref[1] * ref[1] + ref[2] * ref[2])
    if abs(s) > NORMAL_SIGN_TOL * rn:
        if s < 0:
            n[0] = -n[0]
            n[1] = -n[1]
            n[2] = -n[2]
        return
    j = 0
    if abs(n[1]) > abs(n[j]):
        j = 1
    if abs(n[2]) > abs(n[j]):
        j = 2
    if n[j] < 0:
        n[0] = -n[0]
        n[1] = -n[1]
        n[2] = -n[2]


@njit(cache=True)
def _eval_one(P, idx, ref, t_ratio, t_sine, t_dot, ring_out):
    """Order, filter and score one quad. Returns (status, jacobian)."""
    # least-squares plane of the 4 points
    m = np.zeros(3)
    for j in range(4):
        for a in range(3):
            m[a] += P[j, a]
    for a in range(3):
        m[a] /= 4.0
    d = np.empty((4, 3))
    for j in range(4):
        for a in range(3):
            d[j, a] = P[j, a] - m[a]
    cov = np.zeros((3, 3))
    for a in range(3):
        for b in range(3):
            s = 0.0
            for j in range(4):
                s += d[j, a] * d[j, b]
            cov[a, b] = s
    w, V = np.linalg.eigh(cov)
    if not w[2] > 0.0 or w[1] <= PLANE_TOL * w[2]:
        return REJECT_ORDER, np.nan
    n = V[:, 0].copy()
    _orient_nb(n, ref)
    u = V[:, 2].copy()
    v = np.empty(3)
    v[0] = n[1] * u[2] - n[2] * u[1]
    v[1] = n[2] * u[0] - n[0] * u[2]
    v[2] = n[0] * u[1] - n[1] * u[0]
    ang = np.empty(4)
    for j in range(4):
        ang[j] = math.atan2(d[j, 0] * v[0] + d[j, 1] * v[1] + d[j, 2] * v[2],
                            d[j, 0] * u[0] + d[j, 1] * u[1] + d[j, 2] * u[2])
    order = np.arange(4)
    # insertion sort on (angle, index)
    for a in range(1, 4):
        cur = order[a]
        b = a - 1
        while b >= 0 and (ang[order[b]] > ang[cur] or
                          (ang[order[b]] == ang[cur] and idx[order[b]] > idx[cur])):
            order[b + 1] = order[b]
            b -= 1
        order[b + 1] = cur
    start = 0
    for a in range(4):
        if order[a] == 0:  # slot 0 holds the center
            start = a
    for a in range(4):
        ring_out[a] = idx[order[(start + a) % 4]]

    Q = np.empty((4, 3))
    for a in range(4):
        for c in range(3):
            Q[a, c] = P[order[(start + a) % 4], c]
    L = np.empty((4, 3))
    lengths = np.empty(4)
    for a in range(4):
        for c in range(3):
            L[a, c] = Q[(a + 1) % 4, c] - Q[a, c]
        lengths[a] = math.sqrt(L[a, 0] * L[a, 0] + L[a, 1] * L[a, 1] + L[a, 2] * L[a, 2])
    lmin = lengths[0]
    lmax = lengths[0]
    for a in range(1, 4):
        lmin = min(lmin, lengths[a])
        lmax = max(lmax, lengths[a])
    if lmin == 0.0:
        return REJECT_DEGENERATE, np.nan
    cr = np.empty((4, 3))
    cn = np.empty(4)
    for a in range(4):
        p = (a + 3) % 4
        cr[a, 0] = L[p, 1] * L[a, 2] - L[p, 2] * L[a, 1]
        cr[a, 1] = L[p, 2] * L[a, 0] - L[p, 0] * L[a, 2]
        cr[a, 2] = L[p, 0] * L[a, 1] - L[p, 1] * L[a, 0]
        cn[a] = math.sqrt(cr[a, 0] * cr[a, 0] + cr[a, 1] * cr[a, 1] + cr[a, 2] * cr[a, 2])
        if cn[a] <= COLLINEAR_TOL * lengths[p] * lengths[a]:
            return REJECT_DEGENERATE, np.nan
    r = lmin / lmax
    smin = np.inf
    for a in range(4):
        smin = min(smin, cn[a] / (lengths[(a + 3) % 4] * lengths[a]))
    dmin = np.inf
    for a in range(4):
        for b in range(a + 1, 4):
            dd = (cr[a, 0] / cn[a] * (cr[b, 0] / cn[b]) + cr[a, 1] / cn[a] * (cr[b, 1] / cn[b])
                  + cr[a, 2] / cn[a] * (cr[b, 2] / cn[b]))
            dmin = min(dmin, dd)
    if r < t_ratio:
        return REJECT_EDGE_RATIO, np.nan
    if smin < t_sine:
        return REJECT_SINE, np.nan
    if dmin < t_dot:
        return REJECT_COPLANAR, np.nan

    # scaled Jacobian; plane normal signed by the quad's area vector
    nf = V[:, 0].copy()
    area = np.empty(3)
    for c in range(3):
        area[c] = cr[0, c] + cr[1, c] + cr[2, c] + cr[3, c]
    _orient_nb(nf, area)
    js = np.inf
    for a in range(4):
        al = cr[a, 0] * nf[0] + cr[a, 1] * nf[1] + cr[a, 2] * nf[2]
        js = min(js, al / (lengths[(a + 3) % 4] * lengths[a]))
    return PASS, min(1.0, max(-1.0, js))


@njit(cache=True)
def eval_triples_numba(points, neighbors, normals, triples, t_ratio, t_sine, t_dot):
    N = neighbors.shape[0]
    T = triples.shape[0]
    rings = np.full((N, T, 4), -1, dtype=np.int64)
    status = np.empty((N, T), dtype=np.int8)
    jac = np.full((N, T), np.nan)
    P = np.empty((4, 3))
    idx = np.empty(4, dtype=np.int64)
    ring = np.empty(4, dtype=np.int64)
    for i in range(N):
        ref = normals[i]
        for t in range(T):
            idx[0] = i
            idx[1] = neighbors[i, triples[t, 0]]
            idx[2] = neighbors[i, triples[t, 1]]
            idx[3] = neighbors[i, triples[t, 2]]
            for j in range(4):
                for c in range(3):
                    P[j, c] = points[idx[j], c]
            st, js = _eval_one(P, idx, ref, t_ratio, t_sine, t_dot, ring)
            status[i, t] = st
            if st != REJECT_ORDER:
                for a in range(4):
                    rings[i, t, a] = ring[a]
            jac[i, t] = js
    return rings, status, jac


def _orient_np(n, ref):
    s = (n[:, 0] * ref[:, 0] + n[:, 1] * ref[:, 1]) + n[:, 2] * ref[:, 2]
    rn = np.sqrt((ref[:, 0] * ref[:, 0] + ref[:, 1] * ref[:, 1]) + ref[:, 2] * ref[:, 2])
    j = np.argmax(np.abs(n), axis=1)
    fallback = np.where(n[np.arange(len(n)), j] < 0, -1.0, 1.0)
    sign = np.where(np.abs(s) > NORMAL_SIGN_TOL * rn, np.where(s < 0, -1.0, 1.0), fallback)
    return n * sign[:, None]


def _cross_np(a, b):
    return np.stack([a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
                     a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
                     a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]], axis=-1)


def _eval_chunk_numpy(points, idx, ref, t_ratio, t_sine, t_dot):
    M = idx.shape[0]
    P = points[idx]  # (M, 4, 3)
    m = (((P[:, 0] + P[:, 1]) + P[:, 2]) + P[:, 3]) / 4.0
    d = P - m[:, None, :]
    cov = np.empty((M, 3, 3))
    for a in range(3):
        for b in range(3):
            cov[:, a, b] = (((d[:, 0, a] * d[:, 0, b] + d[:, 1, a] * d[:, 1, b])
                             + d[:, 2, a] * d[:, 2, b]) + d[:, 3, a] * d[:, 3, b])
    w, V = np.linalg.eigh(cov)
    status = np.full(M, PASS, dtype=np.int8)
    jac = np.full(M, np.nan)
    rings = np.full((M, 4), -1, dtype=np.int64)
    bad_plane = ~(w[:, 2] > 0.0) | (w[:, 1] <= PLANE_TOL * w[:, 2])
    status[bad_plane] = REJECT_ORDER

    n = _orient_np(V[:, :, 0].copy(), ref)
    u = V[:, :, 2]
    v = _cross_np(n, u)
    ang = np.arctan2(((d[..., 0] * v[:, None, 0] + d[..., 1] * v[:, None, 1]) + d[..., 2] * v[:, None, 2]),
                     ((d[..., 0] * u[:, None, 0] + d[..., 1] * u[:, None, 1]) + d[..., 2] * u[:, None, 2]))
    order = np.lexsort((idx, ang), axis=-1)
    start = np.argmax(order == 0, axis=1)
    roll = (start[:, None] + np.arange(4)[None, :]) % 4
    perm = np.take_along_axis(order, roll, axis=1)
    rings_all = np.take_along_axis(idx, perm, axis=1)
    rings[~bad_plane] = rings_all[~bad_plane]

    Q = np.take_along_axis(P, perm[:, :, None], axis=1)
    L = np.roll(Q, -1, axis=1) - Q
    lengths = np.sqrt((L[..., 0] * L[..., 0] + L[..., 1] * L[..., 1]) + L[..., 2] * L[..., 2])
    lmin = lengths.min(axis=1)
    lmax = lengths.max(axis=1)
    Lp = np.roll(L, 1, axis=1)
    lp = np.roll(lengths, 1, axis=1)
    cr = _cross_np(Lp, L)
    cn = np.sqrt((cr[..., 0] * cr[..., 0] + cr[..., 1] * cr[..., 1]) + cr[..., 2] * cr[..., 2])
    with np.errstate(divide="ignore", invalid="ignore"):
        degen = (lmin == 0.0) | np.any(cn <= COLLINEAR_TOL * lp * lengths, axis=1)
        r = lmin / lmax
        smin = (cn / (lp * lengths)).min(axis=1)
        un = cr / cn[..., None]
        dmin = np.full(M, np.inf)
        for a in range(4):
            for b in range(a + 1, 4):
                dd = ((un[:, a, 0] * un[:, b, 0] + un[:, a, 1] * un[:, b, 1])
                      + un[:, a, 2] * un[:, b, 2])
                dmin = np.minimum(dmin, dd)
        open_ = status == PASS
        for mask, code in ((degen, REJECT_DEGENERATE), (r < t_ratio, REJECT_EDGE_RATIO),
                           (smin < t_sine, REJECT_SINE), (dmin < t_dot, REJECT_COPLANAR)):
            hit = open_ & mask
            status[hit] = code
            open_ &= ~hit

        area = ((cr[:, 0] + cr[:, 1]) + cr[:, 2]) + cr[:, 3]
        nf = _orient_np(V[:, :, 0].copy(), area)
        al = (cr[..., 0] * nf[:, None, 0] + cr[..., 1] * nf[:, None, 1]) + cr[..., 2] * nf[:, None, 2]
        js = np.clip((al / (lp * lengths)).min(axis=1), -1.0, 1.0)
    jac[open_] = js[open_]
    return rings, status, jac


def eval_triples_numpy(points, neighbors, normals, triples, t_ratio, t_sine, t_dot,
                       chunk=4096):
    N = neighbors.shape[0]
    T = triples.shape[0]
    centers = np.repeat(np.arange(N, dtype=np.int64), T)
    idx = np.empty((N * T, 4), dtype=np.int64)
    idx[:, 0] = centers
    idx[:, 1:] = neighbors[:, triples].reshape(N * T, 3)
    ref = normals[centers]
    rings = np.empty((N * T, 4), dtype=np.int64)
    status = np.empty(N * T, dtype=np.int8)
    jac = np.empty(N * T)
    for s in range(0, N * T, chunk * T if T else 1):
        e = min(N * T, s + chunk * T)
        rings[s:e], status[s:e], jac[s:e] = _eval_chunk_numpy(
            points, idx[s:e], ref[s:e], t_ratio, t_sine, t_dot)
    return rings.reshape(N, T, 4), status.reshape(N, T), jac.reshape(N, T)


def eval_triples(points, neighbors, normals, triples, thresholds, backend=None):
    """Dispatch to the numba or numpy kernel; ``backend`` in {None, "numba", "numpy"}."""
    args = (np.ascontiguousarray(points, dtype=np.float64),
            np.ascontiguousarray(neighbors, dtype=np.int64),
            np.ascontiguousarray(normals, dtype=np.float64),
            np.ascontiguousarray(triples, dtype=np.int64),
            float(thresholds.min_edge_ratio), float(thresholds.min_sine),
            float(thresholds.min_normal_dot))
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    if backend == "numba":
        return eval_triples_numba(*args)
    if backend == "numpy":
        return eval_triples_numpy(*args)
    raise ValueError(f"unknown backend {backend!r}")
