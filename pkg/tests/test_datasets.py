import math
from collections import Counter

import numpy as np
import pytest

from symmflow.datasets import (
    CsvFormatError,
    Dataset,
    SpiralConfig,
    gaussian_mixture,
    read_points_csv,
    spiral_arm,
    split,
    to_csv,
    two_spirals,
)


def loo_1nn_accuracy(x, labels):
    """Brute-force leave-one-out nearest-neighbour accuracy."""
    d = ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d, np.inf)
    return float((labels[d.argmin(1)] == labels).mean())


@pytest.fixture(scope="module")
def spirals():
    return two_spirals(SpiralConfig())


def test_default_size_and_labels(spirals):
    assert len(spirals) == 2000 and spirals.dim_x == 2
    assert Counter(spirals.labels.tolist()) == {0: 1000, 1: 1000}


def test_standardized(spirals):
    assert np.all(np.abs(spirals.x.mean(0)) < 1e-9)
    assert np.all(np.abs(spirals.x.var(0) - 1) < 1e-9)


def test_deterministic(spirals):
    again = two_spirals(SpiralConfig())
    assert spirals.x.tobytes() == again.x.tobytes()
    assert np.array_equal(spirals.labels, again.labels)
    assert two_spirals(SpiralConfig(seed=8)).x.tobytes() != spirals.x.tobytes()


def test_class_b_is_rotated_class_a():
    theta = np.array([2.0, 3.3, 5.9])
    a = spiral_arm(theta, 2 * math.pi)
    assert np.array_equal(-a, -1 * spiral_arm(theta, 2 * math.pi))
    # noise-free generation: each arm lies on the rotated copy of the other
    cfg = SpiralConfig(n_per_class=50, noise_sigma=0.0)
    ds = two_spirals(cfg)
    raw = ds.x * np.array(ds.meta["scale"]) + np.array(ds.meta["mean"])
    for pts, sign in ((raw[:50], 1.0), (raw[50:], -1.0)):
        p = sign * pts
        r = np.hypot(p[:, 0], p[:, 1])
        theta = r * cfg.theta_hi
        assert np.allclose(spiral_arm(theta, cfg.theta_hi), p, atol=1e-12)


def test_one_nn_purity(spirals):
    assert loo_1nn_accuracy(spirals.x, spirals.labels) >= 0.99


@pytest.mark.parametrize(
    "cfg", [SpiralConfig(n_per_class=0), SpiralConfig(theta_lo=0.0), SpiralConfig(theta_lo=5, theta_hi=4),
            SpiralConfig(noise_sigma=-1)]
)
def test_invalid_spiral_config(cfg):
    with pytest.raises(ValueError):
        two_spirals(cfg)


def test_gaussian_mixture_means_and_determinism():
    ds = gaussian_mixture(2, 10, 2, seed=1)
    assert np.allclose(ds.meta["means"], [[1, 0], [-1, 0]], atol=1e-15)
    assert gaussian_mixture(2, 10, 2, seed=1).x.tobytes() == ds.x.tobytes()


def test_gaussian_mixture_round_robin_and_tails():
    ds = gaussian_mixture(8, 2000, 3, seed=4)
    comps = np.array(ds.meta["components"])
    assert np.all(comps % 3 == ds.labels)
    means = np.array(ds.meta["means"])[comps]
    within = np.linalg.norm(ds.x - means, axis=1) <= 0.3
    assert within.mean() > 0.999


def test_gaussian_mixture_invalid():
    with pytest.raises(ValueError):
        gaussian_mixture(2, 10, 3, seed=0)


def test_split_sizes_partition_and_determinism(spirals):
    tr, te = split(spirals, 0.25, seed=3)
    assert (len(tr), len(te)) == (1500, 500)
    rows = lambda d: Counter(map(tuple, np.column_stack([d.x, d.labels]).tolist()))
    assert rows(tr) + rows(te) == rows(spirals)
    assert not set(rows(tr)) & set(rows(te))
    tr2, te2 = split(spirals, 0.25, seed=3)
    assert np.array_equal(tr.x, tr2.x) and np.array_equal(te.labels, te2.labels)


@pytest.mark.parametrize("f", [0.0, 1.0, -0.2])
def test_split_rejects_fraction(spirals, f):
    with pytest.raises(ValueError):
        split(spirals, f, 0)


def test_csv_round_trip(tmp_path, spirals):
    path = tmp_path / "d.csv"
    path.write_text(to_csv(spirals))
    text = path.read_text()
    assert text.startswith("x0,x1,label\n") and "\r" not in text
    x, labels = read_points_csv(path)
    assert x.tobytes() == spirals.x.tobytes()
    assert np.array_equal(labels, spirals.labels)


def test_csv_unlabelled(tmp_path):
    ds = Dataset(np.array([[0.5, 1.0]]), np.array([0]), 1)
    path = tmp_path / "u.csv"
    path.write_text(to_csv(ds, include_labels=False))
    x, labels = read_points_csv(path)
    assert labels is None and x.tolist() == [[0.5, 1.0]]


def test_csv_reports_bad_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x0,x1,label\n0.1,0.2,0\nfoo,0.2,1\n0.3,0.4\n0.5,0.6,1\n")
    with pytest.raises(CsvFormatError) as exc:
        read_points_csv(path)
    msg = str(exc.value)
    assert "line 3" in msg and "line 4" in msg and "line 2" not in msg
