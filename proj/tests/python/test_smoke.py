import math

import numpy as np
import pytest

import ctxmlc

TWO_ROWS = "2 3 4\n0,2\t1:0.5 3:1.0\n1\t0:2.0\n"


def toy_dataset(n=30, labels=4, features=8, seed=0):
    rng = np.random.default_rng(seed)
    lines = [f"{n} {labels} {features}"]
    for _ in range(n):
        active = sorted(int(f) for f in np.flatnonzero(rng.random(features) < 0.4))
        tags = ",".join(str(f) for f in active if f < labels)
        feats = " ".join(f"{f}:1" for f in active)
        lines.append(f"{tags}\t{feats}")
    return ctxmlc.parse_dataset("\n".join(lines) + "\n")


def test_parse_and_write_round_trip():
    ds = ctxmlc.parse_dataset(TWO_ROWS)
    assert (ds.num_samples, ds.num_labels, ds.num_features) == (2, 3, 4)
    assert ds.labels.tolist() == [[1, 0, 1], [0, 1, 0]]
    assert ds.features[0] == [(1, 0.5), (3, 1.0)]
    assert ctxmlc.parse_dataset(ctxmlc.write_dataset(ds)) == ds


def test_parse_error_is_value_error():
    with pytest.raises(ctxmlc.ParseError) as info:
        ctxmlc.parse_dataset("1 2 2\n5\t0:1\n")
    assert isinstance(info.value, ValueError)


def test_losses():
    assert ctxmlc.bce(np.array([1], np.uint8), np.array([0.5])) == pytest.approx(math.log(2), abs=1e-12)
    got = ctxmlc.asl(np.array([1], np.uint8), np.array([0.5]), 2.0, 4.0, 0.05)
    assert got == pytest.approx(0.173287, abs=1e-6)
    assert ctxmlc.asl(np.array([0], np.uint8), np.array([0.03])) == 0.0


def test_metrics_on_small_example():
    y = np.array([[1, 0], [1, 1]], np.uint8)
    p = np.array([[1, 1], [1, 0]], np.uint8)
    assert ctxmlc.ebf1(y, p) == pytest.approx(2 / 3)
    assert ctxmlc.mif1(y, p) == pytest.approx(2 / 3)
    assert ctxmlc.maf1(y, p) == pytest.approx(0.5)
    assert ctxmlc.binarize(np.array([[0.2, 0.5, 0.7]])).tolist() == [[0, 1, 1]]


def test_noise_is_deterministic():
    labels = (np.random.default_rng(1).random((50, 6)) < 0.3).astype(np.uint8)
    a = ctxmlc.inject_noise(labels, "uniform", rate=0.2, seed=9)
    b = ctxmlc.inject_noise(labels, "uniform", rate=0.2, seed=9)
    assert np.array_equal(a, b)
    single = ctxmlc.inject_noise(labels, "single_positive", seed=3)
    assert np.all(single.sum(axis=1) == np.minimum(labels.sum(axis=1), 1))
    with pytest.raises(ctxmlc.ConfigError):
        ctxmlc.inject_noise(labels, "uniform", rate=1.5)


def test_grad_check_passes():
    passed, worst, per_array = ctxmlc.grad_check()
    assert passed
    assert worst < 1e-4
    assert per_array


def test_fit_predict_save_load(tmp_path):
    train = toy_dataset(seed=2)
    val = toy_dataset(n=10, seed=3)
    model = ctxmlc.fit(train, val, label_dim=6, lam=0.0, epochs=3, batch_size=8, num_layers=1, seed=4)
    probs = model.predict(val)
    assert probs.shape == (10, 4)
    assert np.all((probs > 0) & (probs < 1))
    path = tmp_path / "model.bin"
    model.save(path)
    again = ctxmlc.Model.load(path)
    assert np.array_equal(again.predict(val), probs)


def test_lambda_without_anchors_is_config_error():
    train = toy_dataset(seed=5)
    with pytest.raises(ctxmlc.ConfigError, match="anchors require word embeddings"):
        ctxmlc.fit(train, train, label_dim=4, lam=0.1, epochs=1)
