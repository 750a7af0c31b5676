import json
import os
import pathlib

import numpy as np
import pytest

import pvc

CONFIGS = pathlib.Path(os.environ.get("PVC_SOURCE_DIR", pathlib.Path(__file__).parents[2])) / "configs"


def load(name):
    return json.loads((CONFIGS / name).read_text())


def test_resize_map_shape():
    b = pvc.resize_map(3, 4, 2)
    assert b.shape == (48, 12)


def test_pi_resize_matches_pseudoinverse():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(5, 2 * 4 * 4))
    fine_w, fine_b, report = pvc.pi_resize(w, np.arange(5.0), 4, 2, 2)
    b = pvc.resize_map(2, 4, 2)
    np.testing.assert_allclose(fine_w.T, np.linalg.pinv(b) @ w.T, atol=1e-10)
    np.testing.assert_array_equal(fine_b, np.arange(5.0))
    assert report["normal_eq_max_abs"] <= 1e-9
    # Patches in the range of B^T embed identically.
    s = rng.normal(size=(7, 8))
    t = s @ b.T
    np.testing.assert_allclose((t @ b) @ fine_w.T, t @ w.T, atol=1e-9)


def test_pi_resize_merge_of_a_2x2_kernel():
    w, _, _ = pvc.pi_resize([[1.0, 2.0, 3.0, 4.0]], [0.5], 2, 1, 1)
    assert w[0, 0] == pytest.approx(10.0)


def test_pooling_and_zero_init_compressors():
    x = np.random.default_rng(1).normal(size=(6, 4, 8))
    expected = x.reshape(3, 2, 2, 2, 8).mean(axis=(1, 3))
    np.testing.assert_allclose(pvc.avg_pool(x), expected, atol=1e-14)
    np.testing.assert_allclose(pvc.ca_pool_zero_init(x, seed=3), expected, atol=1e-12)
    np.testing.assert_allclose(pvc.pixel_unshuffle_avg_init(x), expected, atol=1e-12)


def test_token_counts_of_shipped_configs():
    assert pvc.token_count(load("budget256_baseline.json"), 1024, 1024) == [4096, 1024]
    assert pvc.token_count(load("budget256_rpe.json"), 1024, 1024) == [16384, 4096, 1024, 256]


def test_encode():
    cfg = {"encoder": {"depth": 2, "dim": 8, "heads": 2, "patch": 8, "plan": [{"layer": 1, "kind": "ca"}]}}
    img = pvc.synthetic_image(64, 96, seed=4)
    assert img.shape == (64, 96, 3)
    tokens, summary = pvc.encode(img, cfg, seed=1)
    assert tokens.shape == (4, 6, 8)
    assert summary["stage_tokens"] == [96, 24]
    assert summary["checksum"] == pvc.checksum(tokens)
    again, _ = pvc.encode(img, cfg, seed=1)
    np.testing.assert_array_equal(tokens, again)


def test_errors_map_to_python_exceptions():
    with pytest.raises(pvc.ValidationError):
        pvc.token_count({"encoder": {"depth": 0}}, 64, 64)
    with pytest.raises(ValueError):
        pvc.avg_pool(np.zeros((3, 4, 2)))
    with pytest.raises(ValueError):
        pvc.probe_items("mazes", 1)


def test_gradcheck():
    r = pvc.gradcheck(seed=2)
    assert r["max_rel_error"] <= 1e-4
    assert r["checked"] > 0


def test_sweep_csv():
    rows = pvc.sweep_csv(load("sweep_insertions.json")).splitlines()
    assert rows[0].startswith("plan_id,J,indices,stage_tokens")
    assert len(rows) > 1


def test_probes_are_deterministic():
    a = pvc.probe_items("shapegrid", 5, seed=7)
    assert a == pvc.probe_items("shapegrid", 5, seed=7)
    assert a[:3] == pvc.probe_items("shapegrid", 3, seed=7)
    img = pvc.probe_image("sudoku", 0)
    assert img.dtype == np.uint8 and img.shape == (1008, 1008, 3)
    assert tuple(img[504, 504]) == (220, 20, 20)  # palette red
