"""Property-based checks on the geometric and topological building blocks."""
import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from quadrecon.errors import DegenerateFaceError
from quadrecon.geometry import (FilterThresholds, corner_sines, geometric_filter,
                                interior_angles, scaled_jacobian)
from quadrecon.mesh import QuadMesh, edge_stats, manifold_watertight_scores
from quadrecon.postprocess import face_score, prune_nonmanifold

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
quads = arrays(np.float64, (4, 3), elements=finite)


def well_formed(q):
    L = np.roll(q, -1, axis=0) - q
    lengths = np.linalg.norm(L, axis=1)
    cr = np.linalg.norm(np.cross(np.roll(L, 1, axis=0), L), axis=1)
    return lengths.min() > 1e-3 and (cr / (lengths * np.roll(lengths, 1))).min() > 1e-6


@settings(max_examples=200, deadline=None)
@given(quads)
def test_jacobian_and_sines_bounded(q):
    assume(well_formed(q))
    j = scaled_jacobian(q)
    assert -1.0 <= j <= 1.0
    s = corner_sines(q)
    assert np.all((s >= 0) & (s <= 1 + 1e-12))
    # |J| can never exceed the smallest corner sine
    assert abs(j) <= s.max() + 1e-9


@settings(max_examples=200, deadline=None)
@given(quads)
def test_planar_convex_angles_sum_to_360(q):
    q = q.copy()
    q[:, 2] = 0.0
    assume(well_formed(q))
    try:
        j = scaled_jacobian(q)
    except DegenerateFaceError:
        return
    if j > 1e-6:
        assert abs(interior_angles(q).sum() - 360.0) < 1e-6


@settings(max_examples=200, deadline=None)
@given(quads, st.floats(1e-3, 1e3))
def test_filter_scale_invariant(q, c):
    th = FilterThresholds()
    assert geometric_filter(q, th).reason == geometric_filter(q * c, th).reason


@given(st.integers(0, 4), st.integers(0, 4))
def test_face_score_properties(eb, en):
    s = face_score(eb, en)
    assert s >= 1
    assert (s == 1) == (eb == 0 and en == 0)
    if eb < 4:
        assert face_score(eb + 1, en) > s
    if en < 4:
        assert face_score(eb, en + 1) > s


face_lists = st.lists(st.permutations(range(8)).map(lambda p: p[:4]), min_size=1, max_size=12)


@settings(max_examples=150, deadline=None)
@given(face_lists)
def test_scores_and_prune_on_random_face_soups(faces):
    verts = np.random.default_rng(0).random((8, 3))
    mesh = QuadMesh(verts, np.array(faces))
    stats = edge_stats(mesh)
    manifold, water = manifold_watertight_scores(stats)
    assert 0.0 <= water <= manifold <= 1.0
    assert stats.n_boundary + stats.n_manifold + stats.n_nonmanifold == stats.n_edges
    pruned = prune_nonmanifold(mesh)
    assert edge_stats(pruned).n_nonmanifold == 0
    kept = {tuple(f) for f in pruned.faces.tolist()}
    assert kept <= {tuple(f) for f in faces}
