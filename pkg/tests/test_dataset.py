import numpy as np
import pytest

from quadrecon.candidates import CandidateSet
from quadrecon.dataset import (KINDS, ShapeSpec, class_weight, default_corpus, inject_noise,
                               label_candidates, synth_quad_mesh)
from quadrecon.mesh import edge_stats, manifold_watertight_scores

SHAPES = {
    "plane-grid": ((5, 4), 12, 0.0),
    "wavy-grid": ((6, 6), 25, 0.0),
    "cylinder": ((8, 4), 24, 0.0),
    "torus": ((8, 5), 40, 1.0),
    "cube-shell": ((2,), 24, 1.0),
}


@pytest.mark.parametrize("kind", KINDS)
def test_reference_meshes(kind):
    res, n_faces, water = SHAPES[kind]
    mesh = synth_quad_mesh(ShapeSpec(kind, res))
    mesh.validate()
    assert mesh.n_faces == n_faces
    manifold, w = manifold_watertight_scores(edge_stats(mesh))
    assert manifold == 1.0
    if water == 1.0:
        assert w == 1.0
    else:
        assert 0 < w < 1


def test_unit_edge_length():
    for kind, (res, _, _) in SHAPES.items():
        m = synth_quad_mesh(ShapeSpec(kind, res))
        Q = m.vertices[m.faces]
        lengths = np.linalg.norm(np.roll(Q, -1, axis=1) - Q, axis=2)
        if kind in ("plane-grid", "cube-shell"):
            np.testing.assert_allclose(lengths, 1.0)
        else:
            assert 0.5 < lengths.mean() < 1.5


def test_noise_injection_counts_and_flags():
    spec = ShapeSpec("plane-grid", (10, 10), noise_ratio=0.1, seed=3)
    mesh = synth_quad_mesh(spec)
    cloud, det = inject_noise(mesh, spec, return_details=True)
    assert len(cloud) == 110
    assert cloud.noise_mask().sum() == 10
    assert not cloud.noise_mask()[:100].any()
    np.testing.assert_array_equal(cloud.points[:100], mesh.vertices)
    np.testing.assert_allclose(np.abs(cloud.points[100:, 2]), np.abs(det["offsets"]))
    assert np.all(np.abs(det["offsets"]) <= det["amplitude"])


def test_synthesis_is_seeded():
    spec = ShapeSpec("torus", (8, 5), seed=5, jitter=0.05)
    a = inject_noise(synth_quad_mesh(spec), spec)
    b = inject_noise(synth_quad_mesh(spec), spec)
    np.testing.assert_array_equal(a.points, b.points)
    c = inject_noise(synth_quad_mesh(ShapeSpec("torus", (8, 5), seed=6, jitter=0.05)), spec)
    assert not np.array_equal(a.points, c.points)


def test_label_candidates():
    mesh = synth_quad_mesh(ShapeSpec("plane-grid", (3, 3)))
    cands = CandidateSet([0, 1, 4, 0], [[0, 3, 4, 1], [1, 4, 5, 2], [4, 5, 8, 7], [0, 4, 8, 3]],
                         [1, 1, 1, 0.5])
    np.testing.assert_array_equal(label_candidates(cands, mesh), [1, 1, 1, 0])
    noise = np.zeros(9, bool)
    noise[5] = True
    np.testing.assert_array_equal(label_candidates(cands, mesh, noise), [1, 0, 0, 0])


def test_class_weight():
    assert class_weight([1, 0, 0, 0], 1.1) == pytest.approx(3.3)
    with pytest.raises(ValueError):
        class_weight([0, 0])


def test_default_corpus_shape():
    train, test = default_corpus()
    assert len(train) == 8 and len(test) == 2
    assert all(s.noise_ratio == 0.10 for s in train + test)
    assert len({s.seed for s in train + test}) == 10


def test_spec_validation():
    with pytest.raises(ValueError, match="unknown shape kind"):
        ShapeSpec("sphere")
    with pytest.raises(ValueError):
        ShapeSpec("torus", (2, 5))
    with pytest.raises(ValueError):
        ShapeSpec(noise_ratio=0.7)
