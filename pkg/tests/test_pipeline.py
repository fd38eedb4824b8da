import json

import numpy as np
import pytest

from latentedit import config, plotting
from latentedit.demo import Check, run_demo
from latentedit.embedding import EmbedConfig
from latentedit.generator import MLPGenerator, PatchFeatures, ProjectionEmbedder
from latentedit.geometry import eye_centers, rotation_angle
from latentedit.synthetic import (
    correlated_direction,
    dark_blob_centroid,
    face_landmarks,
    planted_dataset,
    render_face,
    unit_orthogonal,
)


def test_config_defaults_and_merge(tmp_path):
    cfg = config.load_config()
    assert cfg["embed"]["iterations"] == 1000 and cfg["alphas"] == [-5.0, -3.0, 3.0, 5.0]
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"seed": 3, "generator": {"kind": "mlp"}, "embed": {"eta": 0.02}}))
    cfg = config.load_config(p, seed=9)
    assert cfg["seed"] == 9 and cfg["embed"]["beta1"] == 0.9
    gen = config.build_generator(cfg)
    assert isinstance(gen, MLPGenerator) and gen.seed == 9
    ec = config.build_embed_config(cfg)
    assert isinstance(ec, EmbedConfig) and ec.eta == 0.02 and ec.init.seed == 9
    assert config.build_logistic_config(cfg).seed == 9
    assert config.build_align_config(cfg).out_size == 1024


@pytest.mark.parametrize("doc", [{"bogus": 1}, {"embed": {"bogus": 1}}, {"embed": 3}])
def test_config_rejects(tmp_path, doc):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        config.load_config(p)


def test_parse_extractor():
    assert isinstance(config.parse_extractor("patch:8"), PatchFeatures)
    emb = config.parse_extractor("proj:16:4", (8, 8, 1))
    assert isinstance(emb, ProjectionEmbedder) and emb.dim == 16 and emb.seed == 4
    with pytest.raises(ValueError):
        config.parse_extractor("vgg")
    with pytest.raises(ValueError):
        config.parse_extractor("proj:8")


def test_face_landmarks_layout():
    pts = face_landmarks((50, 50), 40, 0)
    assert pts.shape == (68, 2)
    le, re = pts[36:42].mean(axis=0), pts[42:48].mean(axis=0)
    np.testing.assert_allclose(le, [30, 50], atol=1e-12)
    np.testing.assert_allclose(re, [70, 50], atol=1e-12)


@pytest.mark.parametrize("angle", [-40.0, 12.5, 90.0])
def test_render_face_eyes_visible(angle):
    img, box, lm = render_face(128, angle=angle)
    le, re = eye_centers(lm)
    assert rotation_angle(le, re) == pytest.approx(angle, abs=1e-9)
    found = [dark_blob_centroid(img, c, 8.0) for c in (le, re)]
    assert rotation_angle(*found) == pytest.approx(angle, abs=0.1)
    assert box.area() > 0


def test_correlated_direction(rng):
    d = rng.standard_normal((4, 16))
    d /= np.linalg.norm(d)
    assert abs(np.vdot(unit_orthogonal(d, 1), d)) < 1e-12
    x = correlated_direction(d, -0.4, 2)
    assert np.vdot(x, d) == pytest.approx(-0.4, abs=1e-12)
    assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-12)


def test_planted_dataset_balanced():
    d = np.eye(1, 8).reshape(2, 4)
    ds = planted_dataset(d, 1000, 0, noise=0.0)
    assert np.array_equal(ds.labels, (ds.codes[:, 0, 0] > 0).astype(int))
    assert 0.4 < ds.labels.mean() < 0.6


def test_plots_deterministic(tmp_path):
    trace = np.geomspace(1, 1e-6, 50)
    a = plotting.loss_trace(trace, tmp_path / "a.png", title="t")
    b = plotting.loss_trace(trace, tmp_path / "b.png", title="t")
    assert a.read_bytes() == b.read_bytes() and a.read_bytes()[:4] == b"\x89PNG"
    imgs = [np.zeros((8, 8, 1)), np.ones((8, 8, 3))]
    assert plotting.image_strip(imgs, ["x", "y"], tmp_path / "s.png").exists()
    assert plotting.correlation_heatmap(np.eye(2), ["p", "q"], tmp_path / "h.png").exists()
    assert plotting.statistic_curves([0, 1], [[0.1, 0.2]], tmp_path / "c.png").exists()


def test_check_ops():
    assert Check("x", 1.0, "<=", 1.0).ok and not Check("x", 1.0, "<", 1.0).ok
    assert Check("x", 2.0, ">", 1.0).ok and Check("x", 0.0, "==", 0.0).ok
    assert Check("x", 0.5, ">=", 1.0).line().startswith("FAIL")


def test_demo_deterministic_summary(tmp_path):
    a = run_demo(0, tmp_path / "a", plots=False, iterations=200, n_latents=600)
    run_demo(0, tmp_path / "b", plots=False, iterations=200, n_latents=600)
    assert len(a) == 14
    for name in ("summary.txt", "demo_summary.csv", "metrics.csv", "world.gen", "weight.dir",
                 "embedded.lat", "sweep.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
