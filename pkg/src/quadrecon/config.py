"""One flat, file-loadable configuration for the whole pipeline.

The file format is ``key = value`` per line with ``#`` comments (see
``docs/formats.md``). Unknown keys are an error so typos do not pass silently.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .candidates import CandidateConfig
from .geometry import FilterThresholds
from .io import read_kv
from .model import ModelHyper
from .postprocess import FillConfig
from .train import TrainConfig


@dataclass(frozen=True)
class PipelineConfig:
    # candidates
    k: int = 12
    min_edge_ratio: float = 0.25
    min_sine: float = 0.3
    min_normal_dot: float = 0.5
    max_per_point: int = 12
    backend: str = "auto"  # auto | numba | numpy
    # model
    d_point: int = 64
    d_face: int = 256
    use_face_encoder: bool = True
    drop_finfo: tuple = ()
    # training
    epochs: int = 500
    momentum: float = 0.99
    initial_lr: float = 1e-3
    decay_epochs: float = 150.0
    w_multiplier: float = 1.1
    face_loss: bool = True
    face_loss_sign: float = 1.0
    reduction: str = "mean"
    candidate_batch: int = 0
    augment_rotations: bool = False
    batch_across_samples: bool = False
    seed: int = 0
    # inference and repair
    threshold: float = 0.5
    skip_prune: bool = False
    skip_fill: bool = False
    prune_literal: bool = False
    angle_tol: float = 25.0
    max_passes: int = 10
    # metrics
    metric_samples: int = 10000
    metric_seed: int = 0

    def candidate_config(self) -> CandidateConfig:
        return CandidateConfig(self.k, self.max_per_point, FilterThresholds(
            self.min_edge_ratio, self.min_sine, self.min_normal_dot))

    def model_hyper(self) -> ModelHyper:
        return ModelHyper(d_point=self.d_point, d_face=self.d_face,
                          use_face_encoder=self.use_face_encoder, drop_finfo=self.drop_finfo)

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, momentum=self.momentum,
                           initial_lr=self.initial_lr, decay_epochs=self.decay_epochs,
                           w_multiplier=self.w_multiplier, face_loss=self.face_loss,
                           face_loss_sign=self.face_loss_sign, reduction=self.reduction,
                           candidate_batch=self.candidate_batch,
                           augment_rotations=self.augment_rotations,
                           batch_across_samples=self.batch_across_samples, seed=self.seed)

    def fill_config(self) -> FillConfig:
        return FillConfig(angle_tol=self.angle_tol, max_passes=self.max_passes)

    @property
    def kernel_backend(self):
        return None if self.backend == "auto" else self.backend

    def override(self, **values) -> "PipelineConfig":
        """Copy with the given non-None values replaced (after type coercion)."""
        known = {f.name: f for f in fields(self)}
        out = {}
        for key, val in values.items():
            if val is None:
                continue
            if key not in known:
                raise KeyError(f"unknown config key {key!r}")
            out[key] = _coerce(key, val, type(getattr(self, key)))
        return replace(self, **out)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        return cls().override(**read_kv(path))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key, val, typ):
    if not isinstance(val, str):
        if typ is tuple:
            return tuple(val)
        return typ(val)
    s = val.strip()
    if typ is bool:
        if s.lower() in _TRUE:
            return True
        if s.lower() in _FALSE:
            return False
        raise ValueError(f"{key}: expected a boolean, got {val!r}")
    if typ is tuple:
        return tuple(x for x in s.replace(",", " ").split() if x)
    try:
        return typ(s)
    except ValueError:
        raise ValueError(f"{key}: expected {typ.__name__}, got {val!r}") from None
