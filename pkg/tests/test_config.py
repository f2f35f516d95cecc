import pytest

from quadrecon.config import PipelineConfig


def test_defaults_feed_components():
    cfg = PipelineConfig()
    assert cfg.candidate_config().k == 12
    assert cfg.candidate_config().thresholds.min_sine == 0.3
    assert cfg.model_hyper().d_face == 256
    assert cfg.train_config().epochs == 500
    assert cfg.fill_config().angle_tol == 25.0
    assert cfg.kernel_backend is None


def test_from_file(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("# comment\nk = 10   # trailing\nskip_fill = yes\ndrop_finfo = coords, sines\n"
                 "initial_lr = 5e-4\nbackend = numpy\n")
    cfg = PipelineConfig.from_file(p)
    assert cfg.k == 10 and cfg.skip_fill is True
    assert cfg.drop_finfo == ("coords", "sines")
    assert cfg.initial_lr == 5e-4
    assert cfg.kernel_backend == "numpy"
    assert cfg.model_hyper().drop_finfo == ("coords", "sines")


def test_override_errors(tmp_path):
    with pytest.raises(KeyError, match="unknown config key"):
        PipelineConfig().override(kk=3)
    with pytest.raises(ValueError, match="expected a boolean"):
        PipelineConfig().override(skip_fill="maybe")
    with pytest.raises(ValueError, match="expected int"):
        PipelineConfig().override(k="ten")
    assert PipelineConfig().override(k=None) == PipelineConfig()


def test_to_dict_roundtrip():
    cfg = PipelineConfig().override(k=7, use_face_encoder=False)
    assert PipelineConfig(**cfg.to_dict()) == cfg


def test_batch_across_samples_key(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("candidate_batch = 128\nbatch_across_samples = true\n")
    tc = PipelineConfig.from_file(p).train_config()
    assert tc.batch_across_samples and tc.candidate_batch == 128
