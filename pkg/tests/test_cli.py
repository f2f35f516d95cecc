import json

import numpy as np
import pytest

from quadrecon import io
from quadrecon.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A labeled bundle and a 1-epoch checkpoint, built through the CLI."""
    d = tmp_path_factory.mktemp("cli")
    b = d / "b"
    assert main(["synth", "--kind", "plane-grid", "--res", "7", "6", "--jitter", "0.03",
                 "--seed", "2", "--out", str(b)]) == 0
    assert main(["candidates", "--bundle", str(b), "--k", "8",
                 "--faceinfo", str(d / "f.bin")]) == 0
    assert main(["label", "--bundle", str(b)]) == 0
    assert main(["train", "--bundles", str(b), "--out", str(d / "m.ckpt"), "--log",
                 str(d / "log.txt"), "--epochs", "1", "--k", "8"]) == 0
    return d, b


def test_synth_bundle(workspace):
    _, b = workspace
    data = io.read_bundle(b)
    assert len(data["cloud"]) == 42 + 4
    assert data["reference"].n_faces == 30
    assert data["meta"]["kind"] == "plane-grid" and data["meta"]["res"] == "7 6"


def test_candidates_and_labels(workspace):
    d, b = workspace
    data = io.read_bundle(b)
    assert len(data["labels"]) == len(data["candidates"]) > 0
    assert data["labels"].sum() > 0
    assert io.read_faceinfo(d / "f.bin").shape == (len(data["candidates"]), 29)


def test_train_log(workspace):
    d, _ = workspace
    lines = (d / "log.txt").read_text().splitlines()
    assert lines[0] == "# epoch lr L_C L_F total" and len(lines) == 2


def test_infer_postprocess_evaluate(workspace, capsys):
    d, b = workspace
    out = d / "pred.obj"
    assert main(["infer", "--bundle", str(b), "--model", str(d / "m.ckpt"), "--out", str(out),
                 "--k", "8", "--threshold", "0.0"]) == 0
    probs = io.read_probs(b / "probs.txt")
    assert probs.shape == (len(io.read_candidates(b / "candidates.txt")),)
    assert np.all((probs >= 0) & (probs <= 1))
    assert main(["postprocess", "--mesh", str(out), "--out", str(d / "rep.obj")]) == 0
    assert edge_max(io.read_obj(d / "rep.obj")) <= 2
    assert main(["evaluate", "--mesh", str(d / "rep.obj"), "--bundle", str(b),
                 "--format", "json", "--report", str(d / "r.json")]) == 0
    rep = json.loads((d / "r.json").read_text())
    assert {"watertightness", "chamfer_distance", "precision", "recall"} <= set(rep)


def edge_max(mesh):
    from quadrecon.mesh import edge_incidence
    inc = edge_incidence(mesh.faces)
    return max(inc.values()) if inc else 0


def test_pipeline_kv_report(workspace, capsys):
    d, b = workspace
    assert main(["pipeline", "--cloud", str(b / "cloud.ply"), "--model", str(d / "m.ckpt"),
                 "--out", str(d / "p.obj"), "--k", "8", "--format", "kv"]) == 0
    out = capsys.readouterr().out
    assert "watertightness = " in out and "n_faces = " in out


def test_stage_errors_exit_1(workspace, capsys):
    d, b = workspace
    assert main(["infer", "--bundle", str(b), "--model", str(d / "nope.ckpt"),
                 "--out", str(d / "x.obj")]) == 1
    err = capsys.readouterr().err
    assert "[read-model]" in err and "nope.ckpt" in err
    bad = d / "bad.obj"
    bad.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 2 3\n")
    assert main(["postprocess", "--mesh", str(bad), "--out", str(d / "y.obj")]) == 1
    assert "[read-mesh]" in capsys.readouterr().err


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--kind", "sphere", "--res", "3", "--out", "x"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["train", "--bundles", "b", "--out", "m", "--drop-finfo", "colour"])
    assert exc.value.code == 2
