import numpy as np
import pytest

from quadrecon.candidates import CandidateConfig
from quadrecon.dataset import ShapeSpec, make_sample, synth_quad_mesh
from quadrecon.model import ModelHyper

UNIT_SQUARE = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)

# Narrow network with the full stage structure, for fast gradient and I/O tests.
TINY = ModelHyper(d_point=4, d_face=6, nbr_width=5, point_hidden=6,
                  face_widths=(7, 7, 8, 9), cls_widths=(8, 7, 6, 5, 4))


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.fixture
def unit_square():
    return UNIT_SQUARE.copy()


@pytest.fixture
def tiny_hyper():
    return TINY


@pytest.fixture(scope="session")
def grid_mesh():
    return synth_quad_mesh(ShapeSpec("plane-grid", (6, 6)))


@pytest.fixture(scope="session")
def small_sample():
    """A jittered 6x6 grid with noise and a reduced candidate budget (<500 candidates)."""
    spec = ShapeSpec("plane-grid", (6, 6), seed=1, jitter=0.03)
    return make_sample(spec, CandidateConfig(k=8, max_per_point=4))


# Measured values from the acceptance checks, echoed after the test results
# so a plain ``pytest -v`` log records the numbers behind each pass or fail.
ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    return ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance measurements")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
