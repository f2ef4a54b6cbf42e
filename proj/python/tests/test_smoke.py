import numpy as np
import pytest

import vicreg


def gaussian(n, d, seed, scale=1.0):
    return np.random.default_rng(seed).normal(scale=scale, size=(n, d))


def numpy_loss(z, zp, lam=25.0, mu=25.0, nu=1.0, gamma=1.0, eps=1e-4):
    n, d = z.shape

    def var(x):
        return np.mean(np.maximum(0.0, gamma - np.sqrt(x.var(axis=0, ddof=1) + eps)))

    def cov(x):
        c = np.cov(x, rowvar=False).reshape(d, d)
        return (np.sum(c**2) - np.sum(np.diag(c) ** 2)) / d

    inv = np.sum((z - zp) ** 2) / n
    return lam * inv + mu * (var(z) + var(zp)) + nu * (cov(z) + cov(zp))


def test_fixtures():
    assert vicreg.variance_term(np.array([[0.0, 0.0], [2.0, 0.0]])) == pytest.approx(0.495, abs=1e-12)
    assert vicreg.covariance_term(np.array([[1.0, 1.0], [-1.0, -1.0]])) == pytest.approx(4.0, abs=1e-12)
    z = np.array([[1.0, 2.0], [3.0, 4.0]])
    zp = np.array([[1.0, 0.0], [0.0, 4.0]])
    assert vicreg.invariance_term(z, zp) == pytest.approx(6.5, abs=1e-12)


def test_loss_matches_numpy():
    for seed in range(5):
        z = gaussian(16, 6, seed, 0.5)
        zp = gaussian(16, 6, seed + 100, 0.5)
        got = vicreg.vicreg_loss(z, zp)
        assert got["total"] == pytest.approx(numpy_loss(z, zp), rel=1e-12)
        assert set(got) == {"inv", "var_a", "var_b", "cov_a", "cov_b", "total"}


def test_covariance_matches_numpy():
    z = gaussian(20, 5, 3)
    np.testing.assert_allclose(vicreg.covariance_matrix(z), np.cov(z, rowvar=False), rtol=1e-12, atol=1e-14)


def test_backward_matches_finite_differences():
    z = gaussian(8, 4, 7, 0.3)
    zp = gaussian(8, 4, 8, 0.3)
    gz, gzp = vicreg.vicreg_loss_backward(z, zp)
    assert gz.shape == z.shape and gzp.shape == zp.shape
    h = 1e-6
    for i, j in [(0, 0), (3, 2), (7, 3)]:
        up, down = z.copy(), z.copy()
        up[i, j] += h
        down[i, j] -= h
        fd = (vicreg.vicreg_loss(up, zp)["total"] - vicreg.vicreg_loss(down, zp)["total"]) / (2 * h)
        assert gz[i, j] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_algorithm1_scaling():
    z = gaussian(10, 4, 1)
    zp = gaussian(10, 4, 2)
    a1 = vicreg.algorithm1_loss(z, zp, lambda_=25.0)
    assert a1 == pytest.approx(vicreg.vicreg_loss(z, zp, lambda_=25.0 / 4)["total"], rel=1e-12)


def test_errors_map_to_python_exceptions():
    with pytest.raises(Exception):
        vicreg.vicreg_loss(np.zeros((4, 3)), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        vicreg.vicreg_loss(np.zeros((4, 3)), np.zeros((4, 3)), mu=-1.0)
    with pytest.raises(Exception):
        vicreg.train("loss.lambada=1\n")


def test_gradcheck_small():
    report = vicreg.gradcheck(seeds_per_shape=1)
    assert report["loss"]["checked"] >= 9
    assert report["loss"]["max_error"] < 1e-6
    assert report["pipeline"]["max_error"] < 1e-6


def test_probes():
    x, y = vicreg.generate_dataset(n_classes=4, per_class=50, d_latent=3, d_in=8, seed=1)
    assert x.shape == (200, 8)
    assert sorted(set(y)) == [0, 1, 2, 3]
    lin = vicreg.linear_probe(x[::2], y[::2], x[1::2], y[1::2])
    knn = vicreg.knn_classify(x[::2], y[::2], x[1::2], y[1::2], k=5)
    assert lin["accuracy"] > 0.9
    assert knn["accuracy"] > 0.9
    assert len(knn["predictions"]) == 100


def test_short_training_run_is_deterministic():
    overrides = {"train.epochs": "6", "train.warmup_epochs": "1", "data.per_class": "64"}
    a = vicreg.train(overrides=overrides)
    b = vicreg.train(overrides=overrides)
    assert len(a.metrics) == 6
    assert [r["total"] for r in a.metrics] == [r["total"] for r in b.metrics]
    assert a.checkpoint() == b.checkpoint()
    assert a.verdict in ("stable", "collapsed")
    x, _ = vicreg.dataset_from_config(overrides=overrides)
    reps = a.encode(x[:10])
    assert reps.shape == (10, 32)
    assert np.all(np.isfinite(reps))
    assert "train.epochs=6" in a.config
    assert a.probes is None
