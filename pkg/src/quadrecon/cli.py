"""``quadrecon`` command-line tool.

Every subcommand reads and writes the bundle files documented in
``docs/formats.md``, so each stage can be run and inspected on its own.
Exit status: 0 success, 1 a stage failed (message names the stage and its
input), 2 bad command-line usage.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .candidates import generate
from .config import PipelineConfig
from .dataset import KINDS, ShapeSpec, inject_noise, label_candidates, synth_quad_mesh
from .features import GROUPS, face_info_matrix
from .metrics import evaluate
from .model import prepare_inputs
from .postprocess import fill_holes, prune_nonmanifold
from .train import infer_mesh, load_model, save_model, train

log = logging.getLogger("quadrecon")
LOG_ENV = "QUADRECON_LOG_LEVEL"


class StageError(Exception):
    def __init__(self, stage, source, cause):
        super().__init__(f"[{stage}] {source}: {cause}")
        self.stage = stage


@contextlib.contextmanager
def stage(name, source):
    try:
        yield
    except StageError:
        raise
    except (OSError, ValueError, KeyError, RuntimeError, ArithmeticError) as exc:
        raise StageError(name, source, f"{type(exc).__name__}: {exc}") from exc


# ---------------------------------------------------------------- config plumbing

def _config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        with stage("config", args.config):
            cfg = PipelineConfig.from_file(args.config)
    over = {
        "seed": getattr(args, "seed", None),
        "angle_tol": getattr(args, "angle_tol", None),
        "max_passes": getattr(args, "max_passes", None),
        "epochs": getattr(args, "epochs", None),
        "threshold": getattr(args, "threshold", None),
        "k": getattr(args, "k", None),
        "backend": getattr(args, "backend", None),
        "candidate_batch": getattr(args, "candidate_batch", None),
    }
    if getattr(args, "skip_fill", False):
        over["skip_fill"] = True
    if getattr(args, "skip_prune", False):
        over["skip_prune"] = True
    if getattr(args, "no_face_encoder", False):
        over["use_face_encoder"] = False
    if getattr(args, "no_face_loss", False):
        over["face_loss"] = False
    if getattr(args, "augment_rotations", False):
        over["augment_rotations"] = True
    if getattr(args, "batch_across_samples", False):
        over["batch_across_samples"] = True
    if getattr(args, "drop_finfo", None):
        over["drop_finfo"] = tuple(args.drop_finfo)
    return cfg.override(**over)


def _common(p, *groups):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int, help="random seed (default from config: 0)")
    if "cand" in groups:
        p.add_argument("--k", type=int, help="neighbors per point (default 12)")
        p.add_argument("--backend", choices=("auto", "numba", "numpy"),
                       help="candidate kernel implementation")
    if "post" in groups:
        p.add_argument("--angle-tol", type=float, help="right-angle tolerance in degrees (25)")
        p.add_argument("--max-passes", type=int, help="hole-filling passes (10)")
        p.add_argument("--skip-fill", action="store_true", help="do not fill holes")
        p.add_argument("--skip-prune", action="store_true", help="do not prune non-manifold faces")
    if "infer" in groups:
        p.add_argument("--threshold", type=float, help="class-1 probability cut (0.5)")
    if "train" in groups:
        p.add_argument("--epochs", type=int, help="training epochs (500)")
        p.add_argument("--candidate-batch", type=int,
                       help="candidates per step within a sample (0 = whole sample)")
        p.add_argument("--augment-rotations", action="store_true",
                       help="randomly rotate each sample every epoch")
        p.add_argument("--batch-across-samples", action="store_true",
                       help="build each candidate batch from all bundles at once")
        p.add_argument("--no-face-encoder", action="store_true",
                       help="ablation: replace face-encoder features by zeros")
        p.add_argument("--no-face-loss", action="store_true", help="ablation: cross-entropy only")
        p.add_argument("--drop-finfo", action="append", choices=sorted(GROUPS),
                       help="ablation: zero a face-descriptor group (repeatable)")


# ---------------------------------------------------------------- subcommands

def cmd_synth(args):
    cfg = _config(args)
    spec = ShapeSpec(args.kind, tuple(args.res), noise_ratio=args.noise_ratio,
                     noise_amplitude=args.noise_amplitude, seed=cfg.seed, jitter=args.jitter)
    with stage("synth", args.kind):
        mesh = synth_quad_mesh(spec)
        cloud = inject_noise(mesh, spec)
    meta = {"kind": spec.kind, "res": list(spec.res), "noise_ratio": spec.noise_ratio,
            "noise_amplitude": spec.noise_amplitude, "jitter": spec.jitter, "seed": spec.seed}
    with stage("write", args.out):
        io.write_bundle(args.out, cloud=cloud, reference=mesh, meta=meta)
    print(f"{args.out}: {len(cloud)} points ({int(cloud.noise_mask().sum())} noise), "
          f"{mesh.n_faces} reference faces")


def _read(stage_name, path, reader):
    with stage(stage_name, path):
        if not Path(path).exists():
            raise FileNotFoundError(f"no such file: {path}")
        return reader(path)


def _bundle_path(bundle, key):
    return Path(bundle) / io.BUNDLE_FILES[key]


def cmd_candidates(args):
    cfg = _config(args)
    cloud = _read("read-cloud", args.cloud or _bundle_path(args.bundle, "cloud"), io.read_ply)
    with stage("candidates", args.cloud or args.bundle):
        _, cands = generate(cloud, cfg.candidate_config(), backend=cfg.kernel_backend)
    out = args.out or _bundle_path(args.bundle, "candidates")
    with stage("write", out):
        io.write_candidates(out, cands)
        if args.faceinfo:
            io.write_faceinfo(args.faceinfo, face_info_matrix(cloud, cands))
    print(f"{out}: {len(cands)} candidates")


def cmd_label(args):
    b = args.bundle
    cloud = _read("read-cloud", _bundle_path(b, "cloud"), io.read_ply)
    ref = _read("read-reference", _bundle_path(b, "reference"), io.read_obj)
    cands = _read("read-candidates", _bundle_path(b, "candidates"), io.read_candidates)
    with stage("label", b):
        labels = label_candidates(cands, ref, cloud.noise_mask())
    with stage("write", _bundle_path(b, "labels")):
        io.write_labels(_bundle_path(b, "labels"), labels)
    print(f"{_bundle_path(b, 'labels')}: {int(labels.sum())} of {len(labels)} positive")


def _load_sample(bundle, cfg):
    from .candidates import knn_graph
    from .dataset import LabeledSample
    data = _read("read-bundle", bundle, io.read_bundle)
    for key in ("cloud", "candidates", "labels"):
        if data[key] is None:
            raise StageError("read-bundle", bundle, f"missing {io.BUNDLE_FILES[key]}")
    with stage("knn", bundle):
        graph = knn_graph(data["cloud"], cfg.k)
    with stage("read-bundle", bundle):
        return LabeledSample(data["cloud"], data["candidates"], data["labels"],
                             data["reference"], name=str(bundle), graph=graph)


def cmd_train(args):
    cfg = _config(args)
    samples = [_load_sample(b, cfg) for b in args.bundles]

    def progress(entry):
        log.info("epoch %s", entry.line())

    with stage("train", ", ".join(args.bundles)):
        result = train(samples, cfg.train_config(), cfg.model_hyper(), progress=progress)
    with stage("write", args.out):
        save_model(args.out, result.model)
        if args.log:
            Path(args.log).write_text("\n".join(result.log_lines()) + "\n")
    last = result.history[-1] if result.history else None
    print(f"{args.out}: trained {len(result.history)} epochs"
          + (f", final loss {last.total:.6g}" if last else ""))


def _classify(cloud, cands, model_path, cfg, source):
    from .candidates import knn_graph
    model = _read("read-model", model_path, load_model)
    with stage("knn", source):
        graph = knn_graph(cloud, cfg.k)
    with stage("classify", source):
        inp = prepare_inputs(cloud, graph, cands, model.hyper)
        return model.predict(inp)


def cmd_infer(args):
    cfg = _config(args)
    b = args.bundle
    cloud = _read("read-cloud", _bundle_path(b, "cloud"), io.read_ply)
    cands = _read("read-candidates", _bundle_path(b, "candidates"), io.read_candidates)
    probs = _classify(cloud, cands, args.model, cfg, b)
    with stage("infer", b):
        mesh = infer_mesh(cloud, cands, probs, cfg.threshold)
    with stage("write", args.out):
        io.write_probs(Path(b) / "probs.txt", probs[:, 1])
        io.write_obj(args.out, mesh)
    print(f"{args.out}: {mesh.n_faces} faces")


def _repair(mesh, cfg, source):
    if not cfg.skip_prune:
        with stage("prune", source):
            mesh = prune_nonmanifold(mesh, literal=cfg.prune_literal)
    if not cfg.skip_fill:
        with stage("fill", source):
            mesh = fill_holes(mesh, cfg.fill_config())
    return mesh


def cmd_postprocess(args):
    cfg = _config(args)
    mesh = _read("read-mesh", args.mesh, io.read_obj)
    mesh = _repair(mesh, cfg, args.mesh)
    with stage("write", args.out):
        io.write_obj(args.out, mesh)
    print(f"{args.out}: {mesh.n_faces} faces")


def _emit(report, fmt, out):
    text = {"text": report.to_text, "kv": report.to_kv, "json": report.to_json}[fmt]()
    if out:
        with stage("write", out):
            Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_evaluate(args):
    cfg = _config(args)
    mesh = _read("read-mesh", args.mesh, io.read_obj)
    cloud = _read("read-cloud", args.cloud, io.read_ply) if args.cloud else None
    pred = truth = None
    if args.bundle:
        b = Path(args.bundle)
        if (b / "probs.txt").exists() and (b / io.BUNDLE_FILES["labels"]).exists():
            pred = _read("read-probs", b / "probs.txt", io.read_probs) >= cfg.threshold
            truth = _read("read-labels", b / io.BUNDLE_FILES["labels"], io.read_labels)
        if cloud is None:
            cloud = _read("read-cloud", b / io.BUNDLE_FILES["cloud"], io.read_ply)
    with stage("evaluate", args.mesh):
        report = evaluate(mesh, cloud, pred, truth, cfg.metric_samples, cfg.metric_seed)
    _emit(report, args.format, args.report)


def cmd_pipeline(args):
    cfg = _config(args)
    cloud = _read("read-cloud", args.cloud, io.read_ply)
    with stage("candidates", args.cloud):
        _, cands = generate(cloud, cfg.candidate_config(), backend=cfg.kernel_backend)
    probs = _classify(cloud, cands, args.model, cfg, args.cloud)
    with stage("infer", args.cloud):
        mesh = infer_mesh(cloud, cands, probs, cfg.threshold)
    mesh = _repair(mesh, cfg, args.cloud)
    with stage("write", args.out):
        io.write_obj(args.out, mesh)
    with stage("evaluate", args.out):
        report = evaluate(mesh, cloud, n_samples=cfg.metric_samples, seed=cfg.metric_seed)
    _emit(report, args.format, args.report)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quadrecon", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="make a synthetic shape bundle (cloud + reference mesh)")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--res", type=int, nargs="+", required=True, help="resolution values")
    p.add_argument("--noise-ratio", type=float, default=0.10)
    p.add_argument("--noise-amplitude", type=float, default=0.2)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--out", required=True, help="bundle directory")
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("candidates", help="propose candidate quads for a cloud")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--bundle")
    src.add_argument("--cloud")
    p.add_argument("--out", help="candidates file (default: inside the bundle)")
    p.add_argument("--faceinfo", help="also write the binary face-descriptor matrix here")
    _common(p, "cand")
    p.set_defaults(func=cmd_candidates)

    p = sub.add_parser("label", help="label a bundle's candidates against its reference")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", help="train a classifier on labeled bundles")
    p.add_argument("--bundles", nargs="+", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="write the per-epoch loss log here")
    _common(p, "cand", "train")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="classify a bundle's candidates and assemble a mesh")
    p.add_argument("--bundle", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output OBJ")
    _common(p, "cand", "infer")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("postprocess", help="prune non-manifold faces and fill holes")
    p.add_argument("--mesh", required=True)
    p.add_argument("--out", required=True)
    _common(p, "post")
    p.set_defaults(func=cmd_postprocess)

    for name, fn, helptext in (("evaluate", cmd_evaluate, "compute the metrics report"),
                               ("pipeline", cmd_pipeline, "cloud -> repaired mesh + report")):
        p = sub.add_parser(name, help=helptext)
        if name == "evaluate":
            p.add_argument("--mesh", required=True)
            p.add_argument("--cloud", help="target cloud for the Chamfer distance")
            p.add_argument("--bundle", help="bundle with labels.txt/probs.txt for precision/recall")
        else:
            p.add_argument("--cloud", required=True)
            p.add_argument("--model", required=True)
            p.add_argument("--out", required=True, help="output OBJ")
        p.add_argument("--report", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("text", "kv", "json"), default="text")
        _common(p, "cand", "infer", "post") if name == "pipeline" else _common(p)
        p.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except StageError as exc:
        print(f"quadrecon {args.command}: error {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
