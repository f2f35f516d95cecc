"""Learned quad-mesh reconstruction from point clouds.

Stages: k-NN candidate quads -> per-candidate descriptors -> neural
classification -> mesh assembly -> non-manifold pruning and hole filling ->
metrics. Every stage is importable on its own; ``quadrecon.cli`` wires them
into a command-line tool.
"""
from .candidates import CandidateConfig, CandidateSet, generate, knn_graph, propose_candidates
from .dataset import ShapeSpec, default_corpus, make_sample, synth_quad_mesh
from .errors import DegenerateFaceError, MeshFormatError, QuadReconError, TrainingError
from .geometry import FilterThresholds, geometric_filter, scaled_jacobian
from .mesh import PointCloud, QuadMesh, edge_stats, manifold_watertight_scores
from .metrics import MetricsReport, chamfer_distance, evaluate, precision_recall
from .model import ModelHyper, QuadClassifier, prepare_inputs
from .postprocess import FillConfig, face_score, fill_holes, prune_nonmanifold
from .train import TrainConfig, infer_mesh, train

__version__ = "0.1.0"

__all__ = [
    "CandidateConfig", "CandidateSet", "generate", "knn_graph", "propose_candidates",
    "ShapeSpec", "default_corpus", "make_sample", "synth_quad_mesh",
    "DegenerateFaceError", "MeshFormatError", "QuadReconError", "TrainingError",
    "FilterThresholds", "geometric_filter", "scaled_jacobian",
    "PointCloud", "QuadMesh", "edge_stats", "manifold_watertight_scores",
    "MetricsReport", "chamfer_distance", "evaluate", "precision_recall",
    "ModelHyper", "QuadClassifier", "prepare_inputs",
    "FillConfig", "face_score", "fill_holes", "prune_nonmanifold",
    "TrainConfig", "infer_mesh", "train",
]
