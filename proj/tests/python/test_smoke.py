import math

import numpy as np
import pytest

import cgame


def test_metrics_match_numpy():
    rng = np.random.default_rng(4)
    y = rng.uniform(0, 10, size=(5, 5))
    p = rng.uniform(0, 10, size=(5, 5))
    assert cgame.rmse(y, p) == pytest.approx(np.sqrt(np.mean((y - p) ** 2)))
    assert cgame.mae(y, p) == pytest.approx(np.mean(np.abs(y - p)))
    assert cgame.accuracy(y, p) == pytest.approx(1 - np.abs(y - p).sum() / np.abs(y).sum())
    assert cgame.r2(y, y) == 1.0
    with pytest.raises(cgame.UndefinedMetricError):
        cgame.accuracy(np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(cgame.ShapeError):
        cgame.rmse(np.zeros((2, 2)), np.zeros((2, 3)))


def test_hotspot_recall():
    y = np.ones((3, 3))
    y[1, 2] = 100.0
    assert cgame.hotspot_recall(y, y) == 1.0
    assert cgame.hotspot_recall(y, np.zeros((3, 3))) == 0.0


def test_grid_and_routes():
    assert cgame.grid_size(6, 6) == (36, 120)
    routes = cgame.enumerate_routes(3, 3, 0, 8, 256)
    assert len(routes) == 6
    assert all(len(r) == 4 for r in routes)


def test_generate_train_evaluate(tmp_path):
    ds = cgame.generate_dataset(rows=2, cols=2, n_items=20, trips_min=40, trips_max=80, n_t=4, seed=3)
    assert len(ds) == 20
    assert ds.counts.shape == (20, 8, 4)
    assert ds.od.shape == (20, 4, 4)
    assert np.allclose(ds.od.sum(axis=(1, 2)) >= 40, True)
    assert len(ds.train) == 16 and len(ds.validation) == 4

    model, curve = cgame.train(ds, iters=30, lr=0.01, batch_size=8, n_f=8, n_h=8, seed=1)
    assert len(curve) == 30
    assert all(math.isfinite(v) for v in curve)
    d_hat = model.predict_od(ds.counts[0])
    assert d_hat.shape == (4, 4)
    assert model.predict_counts(ds.od[0]).shape == (8, 4)
    m = model.evaluate(ds, "validation")
    assert m["n_samples"] == 4 * 16
    assert m["rmse"] >= 0.0

    ds.save(tmp_path / "data")
    model.save(tmp_path / "model")
    again = cgame.load_model(tmp_path / "model")
    assert np.array_equal(again.predict_od(ds.counts[0]), d_hat)
    assert np.array_equal(cgame.load_dataset(tmp_path / "data").od, ds.od)

    (tmp_path / "data" / "data.bin").write_bytes(b"\0" * 8)
    with pytest.raises(cgame.DataError):
        cgame.load_dataset(tmp_path / "data")


def test_ablation_keeps_identity_gate():
    ds = cgame.generate_dataset(rows=2, cols=2, n_items=10, trips_min=20, trips_max=40, n_t=3, seed=1)
    model, _ = cgame.train(ds, iters=10, batch_size=4, n_f=4, n_h=4, ablation=True)
    assert model.gate == [1.0] * 4
    assert np.all(model.M == 1.0)


def test_default_config_is_json():
    import json

    cfg = json.loads(cgame.default_config_json())
    assert cfg["network"]["rows"] == 6
