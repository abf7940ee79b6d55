import json

import numpy as np
import pytest

import srgnet

TINY = {
    "k_graph": 6,
    "edge_widths": "8,8",
    "bottleneck_dim": 16,
    "head_widths": "12,8",
    "out_labels": 4,
}


def test_config_defaults_and_override():
    cfg = srgnet.config()
    assert cfg["n_points"] == 2048
    assert srgnet.config(lr=0.002)["lr"] == pytest.approx(0.002)


def test_unknown_key_raises():
    with pytest.raises(srgnet.SrgnetError, match="InvalidConfig"):
        srgnet.config(nonsense=1)


def test_normals_are_unit_and_perpendicular_on_a_plane():
    g = np.stack(np.meshgrid(np.arange(10.0), np.arange(10.0)), -1).reshape(-1, 2)
    pts = np.column_stack([g, np.zeros(len(g))])
    n = srgnet.estimate_normals(pts, k=8)
    assert n.shape == (100, 3)
    np.testing.assert_allclose(np.abs(n[:, 2]), 1.0, atol=1e-9)


def test_srg_recovers_dihedral_faces():
    pts, gt = srgnet.make_fixture("dihedral", 1500, 3)
    labels = srgnet.srg(pts, settings={"srg_target_k": 2})
    assert labels.shape == (1500,)
    assert srgnet.miou(labels, gt) > 0.95


def test_kmeans_label_count():
    pts, _ = srgnet.make_fixture("figure", 800, 1)
    labels = srgnet.kmeans(pts, settings={"kmeans_k": 4})
    assert len(set(labels.tolist())) <= 4


def test_miou_perfect_under_permutation():
    assert srgnet.miou([1, 1, 0, 0], [0, 0, 1, 1]) == pytest.approx(1.0)


def test_nonfinite_input_raises():
    pts = np.zeros((5, 3))
    pts[2, 0] = np.nan
    with pytest.raises(srgnet.SrgnetError, match="NonFinite"):
        srgnet.estimate_normals(pts)


def test_train_infer_roundtrip(tmp_path):
    pts, gt = srgnet.make_fixture("dihedral", 400, 5)
    settings = {**TINY, "srg_target_k": 2, "iterations": 20, "seed": 1}
    srg_labels = srgnet.srg(pts, settings=settings)
    model, labels, history = srgnet.train(pts, None, srg_labels, settings)
    assert len(history) >= 1
    assert {"iteration", "loss", "n_labels", "agreement"} <= set(history[0])
    path = tmp_path / "m.txt"
    model.save(path)
    again = srgnet.infer(srgnet.Model.load(path), pts)
    np.testing.assert_array_equal(srgnet.infer(model, pts), again)
    assert labels.shape == (400,)


def test_pipeline_writes_run_directory(tmp_path):
    pts, gt = srgnet.make_fixture("dihedral", 600, 2)
    cloud = tmp_path / "c.xyz"
    np.savetxt(cloud, pts)
    gt_path = tmp_path / "gt.txt"
    np.savetxt(gt_path, gt, fmt="%d")
    out = tmp_path / "run"
    metrics = srgnet.run_pipeline(cloud, out, gt=gt_path, n_points=0, srg_target_k=2, iterations=10, **TINY)
    assert 0.0 <= metrics["miou"] <= 1.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["summary"]["points"] == 600
    assert (out / "segmentation.ply").exists()
