"""Momentum-SGD training and label-driven mesh assembly."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .candidates import CandidateSet
from .dataset import LabeledSample, class_weight
from .errors import TrainingError
from .mesh import PointCloud, QuadMesh
from .io import read_checkpoint, write_checkpoint
from .model import (ModelHyper, QuadClassifier, concat_inputs, prepare_inputs, rotate_inputs,
                    subset_inputs)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    momentum: float = 0.99
    initial_lr: float = 1e-3
    decay_epochs: float = 150.0  # lr divided by 10 every this many epochs
    w_multiplier: float = 1.1
    face_loss: bool = True
    face_loss_sign: float = 1.0
    reduction: str = "mean"
    # 0 = one step per sample over all its candidates; n > 0 splits each
    # sample's candidates into shuffled chunks of about n, one step per chunk
    candidate_batch: int = 0
    augment_rotations: bool = False  # random rigid rotation of each sample per epoch
    # draw each chunk from all samples' candidates at once (needs candidate_batch > 0);
    # batch statistics then match the pooled statistics used at inference
    batch_across_samples: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.initial_lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.reduction not in ("sum", "mean"):
            raise ValueError("reduction must be 'sum' or 'mean'")
        if self.epochs < 0 or self.candidate_batch < 0:
            raise ValueError("epochs and candidate_batch must be non-negative")
        if self.batch_across_samples and not self.candidate_batch:
            raise ValueError("batch_across_samples needs candidate_batch > 0")


def learning_rate(cfg: TrainConfig, epoch: int) -> float:
    """Exponential decay: initial_lr * 10 ** (-epoch / decay_epochs)."""
    return cfg.initial_lr * 10.0 ** (-epoch / cfg.decay_epochs)


@dataclass
class EpochLog:
    epoch: int
    lr: float
    cross_entropy: float
    face: float
    total: float

    def line(self) -> str:
        return (f"{self.epoch} {self.lr!r} {self.cross_entropy!r} "
                f"{self.face!r} {self.total!r}")


@dataclass
class TrainResult:
    model: QuadClassifier
    history: list = field(default_factory=list)

    def log_lines(self):
        return ["# epoch lr L_C L_F total"] + [h.line() for h in self.history]


def _inputs_for(sample: LabeledSample, hyper: ModelHyper):
    graph = sample.graph
    if graph is None:
        raise TrainingError(f"sample {sample.name!r} has no neighbor graph attached")
    return prepare_inputs(sample.cloud, graph, sample.candidates, hyper)


def calibrate_norm_stats(model: QuadClassifier, inputs):
    """Set the frozen norm statistics to the pooled batch statistics of ``inputs``."""
    sums = {}
    for inp in inputs:
        _, _, cache = model.forward(inp, train=True)
        for key, val in cache.items():
            if key in ("point", "out"):
                continue
            _, (xhat, _, mu, var, _), _, _ = val
            n = xhat.shape[0]
            s = sums.setdefault(key, [0, 0.0, 0.0])
            s[0] += n
            s[1] = s[1] + n * mu
            s[2] = s[2] + n * (var + mu * mu)
    for key, (n, s1, s2) in sums.items():
        mean = s1 / n
        model.buffers[f"{key}.mean"] = mean
        model.buffers[f"{key}.var"] = np.maximum(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)


def _chunks(rng, M, size):
    if size and M > size:
        return np.array_split(rng.permutation(M), round(M / size))
    return [slice(None)]


def train(samples, cfg: TrainConfig = TrainConfig(), hyper: ModelHyper = ModelHyper(),
          model: QuadClassifier = None, progress=None) -> TrainResult:
    """Momentum SGD over the samples, in a seeded shuffled order each epoch.

    By default each step sees one sample (or a chunk of its candidates). With
    ``batch_across_samples`` the epoch's candidates from all samples are
    shuffled together, and the class weight is computed over the pooled labels.
    The frozen normalization statistics are re-estimated on the unrotated
    training inputs at the end.
    """
    samples = list(samples)
    if not samples:
        raise TrainingError("no training samples")
    weights = []
    for s in samples:
        try:
            weights.append(class_weight(s.labels, cfg.w_multiplier))
        except ValueError as exc:
            raise TrainingError(f"sample {s.name!r}: {exc}") from exc
    inputs = [_inputs_for(s, hyper) for s in samples]
    model = model or QuadClassifier(hyper, seed=cfg.seed)
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult(model)
    if cfg.batch_across_samples:
        pooled_labels = np.concatenate([s.labels for s in samples])
        pooled_weight = class_weight(pooled_labels, cfg.w_multiplier)

    def step(inp, labels, w, where):
        terms, grads = model.loss_and_grad(inp, labels, w, cfg.face_loss, cfg.face_loss_sign,
                                           cfg.reduction, update_stats=True)
        if not math.isfinite(terms.total):
            raise TrainingError(f"non-finite loss at epoch {epoch}, {where}")
        for k, g in grads.items():
            v = velocity[k]
            v *= cfg.momentum
            v += g
            model.params[k] -= lr * v
        return terms

    for epoch in range(cfg.epochs):
        lr = learning_rate(cfg, epoch)
        ce_sum = fl_sum = 0.0
        if cfg.batch_across_samples:
            epoch_inputs = inputs
            if cfg.augment_rotations:
                epoch_inputs = [rotate_inputs(i, random_rotation(rng)) for i in inputs]
            merged = concat_inputs(epoch_inputs)
            for rows in _chunks(rng, len(pooled_labels), cfg.candidate_batch):
                terms = step(subset_inputs(merged, rows), pooled_labels[rows], pooled_weight,
                             "mixed-sample batch")
                ce_sum += terms.cross_entropy
                fl_sum += terms.face
        else:
            for si in rng.permutation(len(samples)):
                inp, labels = inputs[si], samples[si].labels
                if cfg.augment_rotations:
                    inp = rotate_inputs(inp, random_rotation(rng))
                for rows in _chunks(rng, len(labels), cfg.candidate_batch):
                    terms = step(subset_inputs(inp, rows), labels[rows], weights[si],
                                 f"sample {samples[si].name!r} ({si})")
                    ce_sum += terms.cross_entropy
                    fl_sum += terms.face
        entry = EpochLog(epoch, lr, ce_sum, fl_sum, ce_sum + fl_sum)
        result.history.append(entry)
        if progress is not None:
            progress(entry)
        log.debug("epoch %d lr %.3g total %.6g", epoch, lr, entry.total)
    calibrate_norm_stats(model, inputs)
    return result


def random_rotation(rng) -> np.ndarray:
    """Uniformly random 3x3 rotation (QR of a Gaussian matrix, sign-fixed)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def save_model(path, model: QuadClassifier):
    blocks = {f"param/{k}": v for k, v in model.params.items()}
    blocks.update({f"buffer/{k}": v for k, v in model.buffers.items()})
    write_checkpoint(path, model.hyper.to_dict(), blocks)


def load_model(path) -> QuadClassifier:
    hyper, blocks = read_checkpoint(path)
    params = {k[6:]: v for k, v in blocks.items() if k.startswith("param/")}
    buffers = {k[7:]: v for k, v in blocks.items() if k.startswith("buffer/")}
    return QuadClassifier(ModelHyper.from_dict(hyper), params=params, buffers=buffers)


def infer_mesh(cloud: PointCloud, cands: CandidateSet, probs, threshold: float = 0.5) -> QuadMesh:
    """Keep candidates with class-1 probability >= threshold, best first, one per vertex set."""
    probs = np.asarray(probs, dtype=np.float64)
    p1 = probs[:, 1] if probs.ndim == 2 else probs
    keep = np.flatnonzero(p1 >= threshold)
    order = keep[np.argsort(-p1[keep], kind="stable")]
    seen = set()
    faces = []
    for i in order:
        ring = cands.rings[i]
        key = frozenset(ring.tolist())
        if key in seen:
            continue
        seen.add(key)
        faces.append(ring)
    if not faces:
        log.warning("no candidate reached probability %.3g; emitting an empty mesh", threshold)
    return QuadMesh(cloud.points.copy(), np.array(faces, dtype=np.int64).reshape(-1, 4))
