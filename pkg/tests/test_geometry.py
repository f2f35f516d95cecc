import math

import numpy as np
import pytest

from quadrecon.errors import DegenerateFaceError
from quadrecon.geometry import (FilterThresholds, corner_sines, edge_ratio, face_normal,
                                geometric_filter, interior_angles, order_ccw, scaled_jacobian)

from conftest import random_rotation


def parallelogram(theta, a=1.0, b=1.0):
    u = np.array([a, 0, 0])
    v = b * np.array([math.cos(theta), math.sin(theta), 0])
    return np.array([0 * u, u, u + v, v])


def test_square_values(unit_square):
    assert scaled_jacobian(unit_square) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(corner_sines(unit_square), 1.0)
    np.testing.assert_allclose(interior_angles(unit_square), 90.0)
    np.testing.assert_allclose(face_normal(unit_square), [0, 0, 1])
    assert edge_ratio(unit_square) == 1.0


@pytest.mark.parametrize("theta", [0.4, 0.9, 1.2, 2.0])
def test_parallelogram_jacobian_is_sine(theta):
    q = parallelogram(theta, 2.0, 0.7)
    assert scaled_jacobian(q) == pytest.approx(math.sin(theta), abs=1e-12)
    np.testing.assert_allclose(corner_sines(q), math.sin(theta), atol=1e-12)


def test_jacobian_scale_and_winding_invariant(unit_square):
    rng = np.random.default_rng(0)
    q = unit_square + rng.normal(scale=0.1, size=(4, 3))
    j = scaled_jacobian(q)
    assert scaled_jacobian(q * 37.5) == pytest.approx(j, abs=1e-12)
    assert scaled_jacobian(q[::-1]) == pytest.approx(j, abs=1e-12)


def test_nonconvex_quad_has_negative_jacobian():
    dart = np.array([[0, 0, 0], [2, 1, 0], [0, 2, 0], [0.5, 1, 0]], float)
    assert scaled_jacobian(dart) < 0


def test_degenerate_quads_raise():
    with pytest.raises(DegenerateFaceError):
        scaled_jacobian([[0, 0, 0], [0, 0, 0], [1, 1, 0], [0, 1, 0]])
    with pytest.raises(ValueError):
        scaled_jacobian(np.zeros((3, 3)))


def test_filter_reasons(unit_square):
    th = FilterThresholds()
    assert geometric_filter(unit_square, th).reason == "ok"
    assert geometric_filter(parallelogram(math.pi / 2, 1.0, 0.2), th).reason == "edge_ratio"
    assert geometric_filter(parallelogram(0.2), th).reason == "sine"
    bent = unit_square.copy()
    bent[2, 2] = 3.0
    assert geometric_filter(bent, th).reason == "coplanarity"
    assert not geometric_filter([[0, 0, 0], [1, 0, 0], [2, 0, 0], [1, 1, 0]], th)


def test_order_ccw_center_first_and_orientation():
    pts = np.array([[0, 0, 0], [1, 1, 0], [1, 0, 0], [0, 1, 0]], float)
    ring = order_ccw(2, [0, 1, 2, 3], pts, [0, 0, 1])
    assert ring[0] == 2
    assert ring == (2, 1, 3, 0)
    assert order_ccw(2, [0, 1, 2, 3], pts, [0, 0, -1]) == (2, 0, 3, 1)
    line = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], float)
    assert order_ccw(0, [0, 1, 2, 3], line, [0, 0, 1]) is None


def test_quantities_rotation_invariant(unit_square):
    rng = np.random.default_rng(3)
    q = unit_square + rng.normal(scale=0.1, size=(4, 3))
    base = (scaled_jacobian(q), corner_sines(q), interior_angles(q))
    for _ in range(25):
        r = q @ random_rotation(rng).T + rng.normal(size=3)
        assert scaled_jacobian(r) == pytest.approx(base[0], abs=1e-12)
        np.testing.assert_allclose(corner_sines(r), base[1], atol=1e-12)
        np.testing.assert_allclose(interior_angles(r), base[2], atol=1e-9)
