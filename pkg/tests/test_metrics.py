import json
import math

import numpy as np
import pytest

from quadrecon.dataset import ShapeSpec, synth_quad_mesh
from quadrecon.mesh import QuadMesh
from quadrecon.metrics import (angle_distortion, chamfer_distance, evaluate, mean_edge_ratio,
                               mean_scaled_jacobian, point_set_chamfer, precision_recall,
                               sample_mesh)


def test_square_goldens(unit_square):
    m = QuadMesh(unit_square, [[0, 1, 2, 3]])
    assert mean_scaled_jacobian(m) == pytest.approx(1.0, abs=1e-9)
    assert mean_edge_ratio(m) == pytest.approx(1.0, abs=1e-9)
    assert angle_distortion(m).rmse == pytest.approx(0.0, abs=1e-9)


def test_rhombus_angle_distortion():
    t = math.radians(60)
    q = np.array([[0, 0, 0], [1, 0, 0], [1 + math.cos(t), math.sin(t), 0],
                  [math.cos(t), math.sin(t), 0]])
    ad = angle_distortion(QuadMesh(q, [[0, 1, 2, 3]]))
    assert ad.rmse == pytest.approx(30.0)
    assert ad.mse == pytest.approx(900.0)
    assert ad.n_corners == 4


def test_rectangle_edge_ratio():
    q = np.array([[0, 0, 0], [3, 0, 0], [3, 1, 0], [0, 1, 0]], float)
    assert mean_edge_ratio(QuadMesh(q, [[0, 1, 2, 3]])) == pytest.approx(3.0)


def test_samples_lie_on_plane_grid():
    m = synth_quad_mesh(ShapeSpec("plane-grid", (4, 3)))
    s = sample_mesh(m, 500, seed=1)
    assert s.shape == (500, 3)
    assert np.all(s[:, 2] == 0)
    assert s[:, 0].min() >= 0 and s[:, 0].max() <= 3
    np.testing.assert_array_equal(s, sample_mesh(m, 500, seed=1))


def test_chamfer():
    a = np.zeros((1, 3))
    b = np.array([[1.0, 0, 0], [2.0, 0, 0]])
    assert point_set_chamfer(a, b) == pytest.approx(1.0 + 1.5)
    m = synth_quad_mesh(ShapeSpec("plane-grid", (6, 6)))
    assert chamfer_distance(sample_mesh(m, 20000, seed=5), m, 20000) < 0.05
    assert chamfer_distance(m.vertices, m, 20000) > 0.3  # sparse target: far from samples
    assert chamfer_distance(m.vertices, m.with_faces(np.zeros((0, 4), int))) == math.inf


def test_precision_recall(caplog):
    assert precision_recall([1, 1, 0, 0], [1, 0, 1, 0]) == (0.5, 0.5)
    assert precision_recall([0, 0], [1, 0]) == (0.0, 0.0)
    assert "no positive predictions" in caplog.text


def test_evaluate_report_formats():
    cube = synth_quad_mesh(ShapeSpec("cube-shell", (2,)))
    rep = evaluate(cube, cube.vertices, [1, 0], [1, 1], n_samples=2000)
    assert rep.watertightness == 1.0 and rep.manifoldness == 1.0
    assert rep.precision == 1.0 and rep.recall == 0.5
    assert rep.n_faces == 24 and rep.n_vertices_used == 26
    data = json.loads(rep.to_json())
    assert data["watertightness"] == 1.0 and data["warnings"] == []
    assert "watertightness = 1\n" in rep.to_kv()
    assert rep.to_text().splitlines()[0].startswith("mean_scaled_jacobian")


def test_evaluate_empty_mesh_warns_not_raises():
    rep = evaluate(QuadMesh(np.zeros((4, 3)), np.zeros((0, 4), int)), np.zeros((4, 3)))
    assert "empty mesh" in rep.warnings
    assert rep.chamfer_distance == math.inf
    assert json.loads(rep.to_json())["chamfer_distance"] == "inf"
