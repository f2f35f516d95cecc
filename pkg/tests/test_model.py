import numpy as np
import pytest

from quadrecon.dataset import class_weight
from quadrecon.gradcheck import check_gradients
from quadrecon.mesh import PointCloud
from quadrecon.model import (ModelHyper, QuadClassifier, compound_loss, concat_inputs,
                             prepare_inputs, rotate_inputs, softmax, subset_inputs)

from conftest import random_rotation


@pytest.fixture(scope="module")
def inputs(small_sample):
    return prepare_inputs(small_sample.cloud, small_sample.graph, small_sample.candidates)


def test_forward_shapes(inputs, tiny_hyper, small_sample):
    model = QuadClassifier(ModelHyper(), seed=0)
    probs = model.predict(inputs)
    assert probs.shape == (len(small_sample.candidates), 2)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    tiny = prepare_inputs(small_sample.cloud, small_sample.graph, small_sample.candidates,
                          tiny_hyper)
    assert QuadClassifier(tiny_hyper).predict(tiny).shape == probs.shape


def test_softmax_is_stable():
    p = softmax(np.array([[1000.0, 0.0], [-1000.0, 1000.0]]))
    assert np.all(np.isfinite(p))
    np.testing.assert_allclose(p, [[1, 0], [0, 1]])


def test_compound_loss_values():
    probs = np.array([[0.2, 0.8], [0.6, 0.4]])
    t = compound_loss(probs, [1, 0], w=2.0)
    assert t.cross_entropy == pytest.approx(-(2 * np.log(0.8) + np.log(0.6)))
    assert t.face == pytest.approx(np.exp(0.2) + np.exp(0.4))
    neg = compound_loss(probs, [1, 0], w=2.0, face_loss_sign=-1.0)
    assert neg.face == pytest.approx(-t.face)
    off = compound_loss(probs, [1, 0], w=2.0, face_loss=False)
    assert off.face == 0.0 and off.total == off.cross_entropy
    with pytest.raises(ValueError):
        compound_loss(probs, [1], w=1.0)


@pytest.mark.parametrize("batch_stats", [True, False])
def test_gradients_tiny(tiny_hyper, small_sample, batch_stats):
    s = small_sample
    inp = prepare_inputs(s.cloud, s.graph, s.candidates, tiny_hyper)
    model = QuadClassifier(tiny_hyper, seed=3)
    rng = np.random.default_rng(0)
    for k in model.buffers:  # non-trivial frozen statistics
        model.buffers[k] = model.buffers[k] + (rng.random(model.buffers[k].shape)
                                               if k.endswith(".var") else rng.normal(size=model.buffers[k].shape))
    res = check_gradients(model, inp, s.labels, class_weight(s.labels), per_block=6,
                          batch_stats=batch_stats)
    worst = max(res, key=lambda r: r.rel_error)
    assert worst.rel_error < 1e-4, worst


def test_face_encoder_ablation_has_no_face_gradients(small_sample, tiny_hyper):
    s = small_sample
    h = ModelHyper(**{**tiny_hyper.to_dict(), "use_face_encoder": False})
    inp = prepare_inputs(s.cloud, s.graph, s.candidates, h)
    _, grads = QuadClassifier(h).loss_and_grad(inp, s.labels, 1.0)
    assert all(np.all(grads[f"{n}.W"] == 0) for n in ("fe1", "fe2", "fer", "fe3", "fe4", "fe5"))
    assert np.any(grads["cl1.W"] != 0)


def test_update_stats_moves_buffers(inputs, small_sample):
    model = QuadClassifier(ModelHyper(d_face=16, face_widths=(8, 8, 8, 8),
                                      cls_widths=(16, 8, 8, 8, 8)))
    tiny_inp = prepare_inputs(small_sample.cloud, small_sample.graph, small_sample.candidates,
                              model.hyper)
    before = {k: v.copy() for k, v in model.buffers.items()}
    model.loss_and_grad(tiny_inp, small_sample.labels, 1.0)
    assert all(np.array_equal(before[k], model.buffers[k]) for k in before)
    model.loss_and_grad(tiny_inp, small_sample.labels, 1.0, update_stats=True)
    assert all(not np.array_equal(before[k], model.buffers[k]) for k in before)


def test_rotate_inputs_matches_rotated_cloud(small_sample, inputs):
    s = small_sample
    R = random_rotation(np.random.default_rng(7))
    rotated = PointCloud(s.cloud.points @ R.T, s.cloud.noise_flag)
    direct = prepare_inputs(rotated, s.graph, s.candidates)
    via = rotate_inputs(inputs, R)
    for a, b in [(direct.point_raw, via.point_raw), (direct.offsets, via.offsets),
                 (direct.face_info, via.face_info)]:
        np.testing.assert_allclose(a, b, atol=1e-9)


def test_translation_leaves_probabilities_unchanged(small_sample, inputs):
    s = small_sample
    model = QuadClassifier(seed=1)
    base = model.predict(inputs)
    moved = PointCloud(s.cloud.points + [123.0, -45.5, 7.25], s.cloud.noise_flag)
    probs = model.predict(prepare_inputs(moved, s.graph, s.candidates))
    assert np.abs(probs - base).max() <= 1e-6


def test_subset_inputs_in_inference_mode(inputs):
    model = QuadClassifier(seed=2)
    rows = np.arange(0, inputs.n_candidates, 3)
    full = model.predict(inputs)[rows]
    np.testing.assert_allclose(model.predict(subset_inputs(inputs, rows)), full, atol=1e-12)


def test_concat_inputs_matches_separate_predictions(small_sample, inputs):
    model = QuadClassifier(seed=4)
    R = random_rotation(np.random.default_rng(2))
    other = rotate_inputs(inputs, R)
    both = model.predict(concat_inputs([inputs, other]))
    M = inputs.n_candidates
    np.testing.assert_allclose(both[:M], model.predict(inputs), atol=1e-12)
    np.testing.assert_allclose(both[M:], model.predict(other), atol=1e-12)
