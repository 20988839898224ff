import numpy as np
import pytest

from gpsample import (Dataset, EmptyData, KernelSpec, condition_on, fit, log_marginal_likelihood,
                      sample_mvn, GaussianDist, weight_posterior)

from oracles import finite_diff, gp_posterior_dense, lml_dense


def _data(X, y):
    return Dataset.from_raw(np.asarray(X, float), np.asarray(y, float), standardize=False)


def test_dataset_roundtrip_and_standardization():
    X = np.array([[1.0, 10.0], [3.0, 20.0], [2.0, 15.0]])
    y = np.array([1.0, 3.0, 5.0])
    d = Dataset.from_raw(X, y, np.array([[0.0, 4.0], [10.0, 30.0]]))
    np.testing.assert_allclose(d.from_unit(d.to_unit(X)), X)
    assert d.y.mean() == pytest.approx(0.0) and d.y.std() == pytest.approx(1.0)
    np.testing.assert_allclose(d.y_from_model(d.y), y)
    d2 = d.append_raw([[2.5, 12.0]], [7.0])
    assert d2.n == 4 and d2.y_mean == pytest.approx(4.0)
    with pytest.raises(EmptyData):
        Dataset.from_raw(np.zeros((0, 1)), np.zeros(0))


def test_lml_scalar_cases():
    k = KernelSpec("SE", 1.0, [1.0])
    assert log_marginal_likelihood(_data([[0.0]], [0.0]), k, 0.0) == pytest.approx(
        -0.5 * np.log(2 * np.pi))
    assert log_marginal_likelihood(_data([[0.0]], [1.0]), k, 0.0) == pytest.approx(
        -0.5 - 0.5 * np.log(2 * np.pi))


def test_lml_matches_dense_oracle():
    rng = np.random.default_rng(0)
    X, y = rng.random((5, 2)), rng.standard_normal(5)
    k = KernelSpec("Matern52", 1.3, [0.4, 0.7])
    ref = lml_dense(k(X), y, 0.05)
    assert log_marginal_likelihood(_data(X, y), k, 0.05) == pytest.approx(ref, abs=1e-8)


def test_fit_recovers_lengthscale():
    rng = np.random.default_rng(4)
    X = rng.random((60, 1))
    truth = KernelSpec("SE", 1.0, [0.2])
    y = sample_mvn(GaussianDist(np.zeros(60), truth.gram(X, noise=1e-3)), 1, rng)[0]
    gp = fit(Dataset.from_raw(X, y), "SE", 1e-3, restarts=5, rng=1)
    assert 0.1 <= gp.kernel.ell[0] <= 0.4


def test_fit_zero_signal_drives_sigma_f_down():
    X = np.linspace(0, 1, 10)[:, None]
    gp = fit(Dataset.from_raw(X, np.zeros(10)), "SE", 1e-3, restarts=3, rng=0)
    assert gp.kernel.sigma_f < 1e-2


def test_fit_is_deterministic():
    rng = np.random.default_rng(2)
    X = rng.random((15, 2))
    d = Dataset.from_raw(X, np.sin(4 * X).sum(1))
    a = fit(d, "Matern32", 1e-3, restarts=3, rng=9)
    b = fit(d, "Matern32", 1e-3, restarts=3, rng=9)
    assert a.kernel == b.kernel


def test_fit_noise_option():
    rng = np.random.default_rng(5)
    X = rng.random((40, 1))
    y = np.sin(6 * X[:, 0]) + 0.1 * rng.standard_normal(40)
    gp = fit(Dataset.from_raw(X, y, standardize=False), "SE", 1e-3, restarts=3, rng=0,
             fit_noise=True)
    assert 0.03 < gp.kernel.sigma_n < 0.3


def test_predict_interpolates_and_reverts():
    X = np.array([[0.1], [0.4], [0.8]])
    y = np.array([0.3, -1.0, 0.5])
    gp = condition_on(_data(X, y), KernelSpec("SE", 1.2, [0.05], 1e-6))
    m, v = gp.predict(X, full_cov=False)
    np.testing.assert_allclose(m, y, atol=1e-3)
    assert np.all(v <= 1e-4)
    m, v = gp.predict(np.array([[5.0]]), full_cov=False)
    assert abs(m[0]) < 1e-8 and v[0] == pytest.approx(1.44)


def test_predict_matches_dense_oracle():
    rng = np.random.default_rng(1)
    X, y, Xq = rng.random((4, 2)), rng.standard_normal(4), rng.random((3, 2))
    k = KernelSpec("SE", 0.9, [0.3, 0.5], 0.1)
    post = condition_on(_data(X, y), k).predict(Xq)
    m, S = gp_posterior_dense(k(X), k(X, Xq), k(Xq), y, 0.1)
    np.testing.assert_allclose(post.mean, m, atol=1e-8)
    np.testing.assert_allclose(post.cov, S, atol=1e-8)


def test_mean_var_gradients():
    rng = np.random.default_rng(3)
    X, y = rng.random((12, 2)), rng.standard_normal(12)
    gp = condition_on(_data(X, y), KernelSpec("Matern52", 1.0, [0.3, 0.4], 1e-2))
    x = np.array([0.37, 0.61])
    mu, var, dmu, dvar = gp.mean_var_grad(x)
    m0, v0 = gp.predict(x[None], full_cov=False)
    assert mu == pytest.approx(m0[0]) and var == pytest.approx(v0[0])
    np.testing.assert_allclose(dmu, finite_diff(lambda z: gp.predict(z[None], False)[0][0], x),
                               rtol=1e-5)
    np.testing.assert_allclose(dvar, finite_diff(lambda z: gp.predict(z[None], False)[1][0], x),
                               rtol=1e-5, atol=1e-9)


def test_weight_posterior_identity_features():
    y = np.array([1.0, -2.0, 0.5])
    wp = weight_posterior(np.eye(3), y, 1.0)
    np.testing.assert_allclose(wp.mean, y / 2)
    np.testing.assert_allclose(wp.cov, np.eye(3) / 2)
    np.testing.assert_allclose(weight_posterior(np.eye(3), np.zeros(3), 1.0).mean, 0.0)


def test_weight_posterior_direct_vs_smw():
    rng = np.random.default_rng(0)
    Phi, y = rng.standard_normal((6, 40)), rng.standard_normal(6)
    a = weight_posterior(Phi, y, 0.3)
    b = weight_posterior(Phi, y, 0.3, use_smw=True)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-8)
    np.testing.assert_allclose(a.cov, b.cov, atol=1e-8)
