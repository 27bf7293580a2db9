import json
import math

import numpy as np
import pytest

import villani_net as vn


def test_lambda_c_and_constants():
    assert vn.lambda_c("sigmoid:1", 1.0, 1.0) == 0.03125
    assert vn.lambda_c("sigmoid:1", 1.0, 1.0, "proof") == 0.125
    c = vn.activation_constants("tanh")
    assert c["m_d"] == 1.0
    assert c["c0"] == 0.0
    with pytest.raises(vn.InvalidArgument):
        vn.activation_constants("relu")


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    y = np.array([1, -1, 1, 1, -1, -1], dtype=float)
    a = rng.normal(size=2)
    a /= np.linalg.norm(a)
    w = rng.normal(size=(2, 3))
    g = vn.full_grad(x, y, a, w, "tanh", 0.1)
    h = 1e-6
    fd = np.zeros_like(w)
    for idx in np.ndindex(*w.shape):
        e = np.zeros_like(w)
        e[idx] = h
        fd[idx] = (vn.risk(x, y, a, w + e, "tanh", 0.1) - vn.risk(x, y, a, w - e, "tanh", 0.1)) / (2 * h)
    assert np.max(np.abs(g - fd)) < 1e-7
    assert g.shape == (2, 3)


def test_zero_data_laplacian_is_regularizer_trace():
    x = np.zeros((2, 3))
    y = np.ones(2)
    a = np.ones(2) / math.sqrt(2)
    w = np.ones((2, 3))
    assert vn.exact_laplacian(x, y, a, w, "sigmoid:1", 0.5) == pytest.approx(0.5 * 6)


def test_gibbs_partition_function():
    rep = vn.gibbs_quadratic(1.0, temp_s=0.5, box=4.0, grid_n=256, r=2.0)
    assert rep["z_s"] == pytest.approx(math.sqrt(math.pi / 2), abs=1e-6)
    assert rep["spectral_gap"] == pytest.approx(1.0, rel=0.01)


def test_synthetic_split():
    xtr, ytr, xte, yte = vn.gen_synthetic(n_raw=500, dim_d=5, seed=2)
    assert xtr.shape[1] == 5
    assert np.allclose(np.linalg.norm(xtr, axis=1), 1.0)
    assert np.all(np.abs(xte[:, -1]) > 0.2)
    assert set(np.unique(ytr)) <= {-1.0, 1.0}
    assert len(yte) == xte.shape[0]


def test_verify_and_run(tmp_path):
    x = np.array([[0.6, 0.1], [-0.5, 0.3], [0.2, -0.7]])
    y = np.array([1.0, -1.0, 1.0])
    a = np.array([0.6, 0.8])
    w = np.ones((2, 2))
    assert vn.verify_villani(x, y, a, w, "sigmoid:1", 0.5, 1e-2)["divergence_verified"]
    assert not vn.verify_villani(x, y, a, w, "sigmoid:1", 0.0, 1e-2)["divergence_verified"]
    cfg = {"seed": 1, "output_dir": str(tmp_path), "data": {"kind": "synthetic", "n_raw": 300, "dim_d": 4}}
    artifacts, _ = vn.run("gen-data", cfg)
    meta = json.loads((tmp_path / "data.json").read_text())
    assert meta["n_train"] + meta["n_test"] == meta["survivors"]
    assert {p.name for p in artifacts} == {"train.csv", "test.csv", "data.json"}
    with pytest.raises(vn.ConfigError):
        vn.run("gen-data", {"data": {"kind": "synthetic", "typo": 1}})
