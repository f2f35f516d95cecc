"""Time the candidate-evaluation kernel: numba vs. vectorized numpy.

    python benchmarks/bench_candidates.py [--sizes 10 20 40] [--repeats 3]

Each size n builds a jittered n x n grid (n^2 points), the k-NN graph and the
C(k,3) neighbor triples, then times ``eval_triples`` for both backends on
identical inputs and checks that their outputs agree. The first numba call
includes JIT compilation (cached on disk afterwards) and is reported apart.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from quadrecon._accel import HAVE_NUMBA
from quadrecon._kernels import eval_triples
from quadrecon.candidates import knn_graph, local_frames, neighbor_triples
from quadrecon.dataset import ShapeSpec, inject_noise, synth_quad_mesh
from quadrecon.geometry import FilterThresholds


def setup(n, k, seed):
    spec = ShapeSpec("wavy-grid", (n, n), jitter=0.03, seed=seed)
    cloud = inject_noise(synth_quad_mesh(spec), spec)
    graph = knn_graph(cloud, k)
    normals, _ = local_frames(cloud.points, graph)
    return cloud.points, graph.neighbors, normals, neighbor_triples(k)


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 40])
    ap.add_argument("--k", type=int, default=12)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    th = FilterThresholds()

    if HAVE_NUMBA:
        pts, nb, nrm, tri = setup(4, args.k, 0)
        t = time.perf_counter()
        eval_triples(pts, nb, nrm, tri, th, backend="numba")
        print(f"numba first call (compile or cache load): {time.perf_counter() - t:.2f} s")
    else:
        print("numba unavailable; timing numpy only")

    print(f"{'points':>8} {'triples':>10} {'numpy s':>10} {'numba s':>10} {'speedup':>8}  agree")
    for n in args.sizes:
        pts, nb, nrm, tri = setup(n, args.k, 1)
        t_np, out_np = best_of(lambda: eval_triples(pts, nb, nrm, tri, th, backend="numpy"),
                               args.repeats)
        row = f"{len(pts):>8} {len(pts) * len(tri):>10} {t_np:>10.4f}"
        if HAVE_NUMBA:
            t_nb, out_nb = best_of(lambda: eval_triples(pts, nb, nrm, tri, th, backend="numba"),
                                   args.repeats)
            agree = all(np.array_equal(a, b, equal_nan=a.dtype.kind == "f")
                        for a, b in zip(out_np, out_nb))
            row += f" {t_nb:>10.4f} {t_np / t_nb:>8.2f}  {agree}"
        print(row)


if __name__ == "__main__":
    main()
