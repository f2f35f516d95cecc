import numpy as np
import pytest

from quadrecon.candidates import CandidateSet
from quadrecon.errors import DegenerateFaceError
from quadrecon.features import GROUPS, WIDTH, drop_groups, face_info_matrix, face_info_row
from quadrecon.mesh import PointCloud


def test_groups_tile_the_row():
    cols = sorted(c for s in GROUPS.values() for c in range(WIDTH)[s])
    assert cols == list(range(WIDTH))


def test_square_row(unit_square):
    cloud = PointCloud(np.vstack([unit_square, [[0.5, 0.5, 3.0]]]))
    cands = CandidateSet([0], [[0, 1, 2, 3]], [1.0])
    row = face_info_row(cloud, cands[0])
    np.testing.assert_allclose(row[:12], (unit_square - cloud.centroid).ravel())
    assert row[12] == pytest.approx(1.0)
    np.testing.assert_allclose(row[13:17], 1.0)
    np.testing.assert_allclose(row[17:29], np.tile([0, 0, 1.0], 4))


def test_matrix_matches_rows(small_sample):
    s = small_sample
    mat = face_info_matrix(s.cloud, s.candidates)
    assert mat.shape == (len(s.candidates), WIDTH)
    rows = np.array([face_info_row(s.cloud, f) for f in s.candidates])
    np.testing.assert_allclose(mat, rows, rtol=0, atol=1e-12)


def test_degenerate_candidate_is_reported():
    pts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], float)
    with pytest.raises(DegenerateFaceError, match="candidate 0"):
        face_info_matrix(PointCloud(pts), CandidateSet([0], [[0, 1, 2, 3]], [0.0]))


def test_drop_groups(small_sample):
    mat = face_info_matrix(small_sample.cloud, small_sample.candidates)
    out = drop_groups(mat, ["coords", "sines"])
    assert out.shape == mat.shape
    assert np.all(out[:, :12] == 0) and np.all(out[:, 13:17] == 0)
    np.testing.assert_array_equal(out[:, 12], mat[:, 12])
    np.testing.assert_array_equal(out[:, 17:], mat[:, 17:])
    assert drop_groups(mat, []) is mat
    with pytest.raises(ValueError, match="unknown face-info group"):
        drop_groups(mat, ["colour"])
