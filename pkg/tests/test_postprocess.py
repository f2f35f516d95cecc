import numpy as np
import pytest

from quadrecon.dataset import ShapeSpec, synth_quad_mesh
from quadrecon.mesh import QuadMesh, edge_stats, manifold_watertight_scores
from quadrecon.postprocess import FillConfig, face_score, fill_holes, prune_nonmanifold


def water(mesh):
    return manifold_watertight_scores(edge_stats(mesh))[1]


def nonmanifold(mesh):
    return edge_stats(mesh).n_nonmanifold


@pytest.mark.parametrize("eb,en,score", [(0, 0, 1), (1, 0, 2), (0, 1, 11), (2, 1, 33),
                                         (4, 4, 205)])
def test_face_score(eb, en, score):
    assert face_score(eb, en) == score


def test_face_score_range():
    with pytest.raises(ValueError):
        face_score(5, 0)


def torus():
    return synth_quad_mesh(ShapeSpec("torus", (10, 6)))


def test_prune_removes_spurious_fin():
    mesh = torus()
    v = mesh.vertices
    a, b = mesh.faces[0][:2]
    extra = np.vstack([v, v[a] + [0, 0, 3.0], v[b] + [0, 0, 3.0]])
    n = len(v)
    corrupted = QuadMesh(extra, np.vstack([mesh.faces, [[a, b, n + 1, n]]]))
    assert nonmanifold(corrupted) == 1
    res = prune_nonmanifold(corrupted, return_removed=True)
    assert res.removed == [mesh.n_faces]
    assert water(res.mesh) == 1.0


def test_prune_keeps_clean_meshes_including_boundaries():
    grid = synth_quad_mesh(ShapeSpec("plane-grid", (5, 5)))
    assert prune_nonmanifold(grid).n_faces == grid.n_faces
    # the literal rule also strips boundary faces
    assert prune_nonmanifold(grid, literal=True).n_faces < grid.n_faces


def test_prune_prefers_more_nonmanifold_edges():
    # two overlapping diagonal quads on a 3x3 grid: the overlapping face goes first
    grid = synth_quad_mesh(ShapeSpec("plane-grid", (4, 4)))
    faces = np.vstack([grid.faces, [[1, 5, 9, 13]], [[5, 9, 10, 6]]])
    mesh = grid.with_faces(faces)
    res = prune_nonmanifold(mesh, return_removed=True)
    assert nonmanifold(res.mesh) == 0
    assert len(res.removed) >= 1


def drop(mesh, idx):
    keep = np.ones(mesh.n_faces, bool)
    keep[list(idx)] = False
    return mesh.with_faces(mesh.faces[keep])


def test_fill_single_hole_pattern1():
    mesh = torus()
    holed = drop(mesh, [7])
    res = fill_holes(holed, return_details=True)
    assert res.pattern_counts.get(1, 0) == 1
    assert water(res.mesh) == 1.0
    assert set(res.mesh.face_keys()) == set(mesh.face_keys())


def test_fill_domino_hole():
    mesh = torus()
    # faces 7 and 8 share an edge (adjacent along the minor direction)
    holed = drop(mesh, [7, 8])
    res = fill_holes(holed, return_details=True)
    assert water(res.mesh) == 1.0
    assert res.pattern_counts.get(2, 0) >= 1
    assert set(res.mesh.face_keys()) == set(mesh.face_keys())


def test_fill_leaves_open_boundaries_alone():
    for spec in (ShapeSpec("plane-grid", (5, 4)), ShapeSpec("cylinder", (8, 4))):
        mesh = synth_quad_mesh(spec)
        out = fill_holes(mesh)
        assert out.n_faces == mesh.n_faces


def test_fill_respects_max_passes():
    mesh = torus()
    holed = drop(mesh, [7, 8, 13, 14])
    res = fill_holes(holed, FillConfig(max_passes=1), return_details=True)
    assert res.passes <= 1
    full = fill_holes(holed, return_details=True)
    assert water(full.mesh) >= water(res.mesh) > water(holed)
