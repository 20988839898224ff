import numpy as np
import pytest

from gpsample import (Dataset, DimensionMismatch, GaussianDist, KernelSpec, build_rff,
                      condition_on, draw_pathwise_path, draw_weight_space_path, exhaustive_sample,
                      pathwise_moments, wasserstein2, weight_space_moments)

from oracles import finite_diff


@pytest.fixture(scope="module")
def gp():
    rng = np.random.default_rng(0)
    X = rng.random((8, 1))
    d = Dataset.from_raw(X, np.sin(6 * X[:, 0]), standardize=False)
    return condition_on(d, KernelSpec("SE", 1.0, [0.2], 1e-2))


def test_pathwise_mean_close_to_posterior(gp):
    Xq = np.linspace(0, 1, 50)[:, None]
    path = draw_pathwise_path(gp, build_rff(gp.kernel, 2000, 1), 2, count=500)
    m, _ = gp.predict(Xq, full_cov=False)
    assert np.abs(path(Xq).mean(1) - m).max() <= 0.1


def test_pathwise_interpolates_training_data():
    X = np.array([[0.2], [0.5], [0.9]])
    y = np.array([1.0, -0.5, 0.3])
    g = condition_on(Dataset.from_raw(X, y, standardize=False), KernelSpec("SE", 1.0, [0.3], 1e-4))
    path = draw_pathwise_path(g, build_rff(g.kernel, 1000, 0), 1, count=20)
    assert np.abs(path(X) - y[:, None]).max() < 1e-2


def test_prior_variance_matches_kernel():
    X = np.array([[0.0]])
    g = condition_on(Dataset.from_raw(X, [0.0], standardize=False),
                     KernelSpec("SE", 1.5, [0.1], 1e-3))
    path = draw_pathwise_path(g, build_rff(g.kernel, 2000, 3), 4, count=4000)
    v = path(np.array([[5.0]]))[0]
    assert v.var() == pytest.approx(2.25, rel=0.1)


def test_paths_are_deterministic(gp):
    Xq = np.linspace(0, 1, 7)[:, None]
    for draw in (draw_pathwise_path, draw_weight_space_path):
        a = draw(gp, build_rff(gp.kernel, 100, 5), 6, count=3)(Xq)
        b = draw(gp, build_rff(gp.kernel, 100, 5), 6, count=3)(Xq)
        np.testing.assert_array_equal(a, b)


def test_weight_space_cholesky_and_smw_share_law(gp):
    fmap = build_rff(gp.kernel, 30, 0)
    Xq = np.linspace(0, 1, 5)[:, None]
    a = draw_weight_space_path(gp, fmap, 1, count=20000)(Xq)
    b = draw_weight_space_path(gp, fmap, 2, count=20000, method="smw")(Xq)
    m, K = weight_space_moments(gp, fmap, Xq)
    for s in (a, b):
        np.testing.assert_allclose(s.mean(1), m, atol=0.02)
        np.testing.assert_allclose(np.cov(s), K, atol=0.02)


def test_pathwise_empirical_moments(gp):
    fmap = build_rff(gp.kernel, 50, 0)
    Xq = np.linspace(0, 1, 5)[:, None]
    s = draw_pathwise_path(gp, fmap, 3, count=20000)
    # moments conditional on the map: redraw only weights and noise
    m, K = pathwise_moments(gp, fmap, Xq)
    np.testing.assert_allclose(s(Xq).mean(1), m, atol=0.02)
    np.testing.assert_allclose(np.cov(s(Xq)), K, atol=0.02)


def test_path_gradients(gp):
    rng = np.random.default_rng(9)
    for draw in (draw_pathwise_path, draw_weight_space_path):
        p = draw(gp, build_rff(gp.kernel, 200, 1), 2)
        for x in rng.random((50, 1)):
            np.testing.assert_allclose(p.grad(x), finite_diff(lambda z: p(z[None])[0], x),
                                       rtol=1e-4, atol=1e-6)


def test_path_rejects_wrong_dimension(gp):
    p = draw_pathwise_path(gp, build_rff(gp.kernel, 20, 1), 2)
    with pytest.raises(DimensionMismatch):
        p(np.zeros((3, 2)))


def test_blocked_evaluation_matches(gp):
    p = draw_pathwise_path(gp, build_rff(gp.kernel, 4000, 1), 2, count=2)
    Xq = np.linspace(0, 1, 300)[:, None]
    direct = p.features(Xq) @ p.weights + p.kernel(Xq, p.X_train) @ p.update
    np.testing.assert_allclose(p(Xq), direct, atol=1e-10)


def test_exhaustive_moments(gp):
    Xq = np.linspace(0, 1, 4)[:, None]
    s = exhaustive_sample(gp, Xq, 20000, 0)
    post = gp.predict(Xq)
    np.testing.assert_allclose(s.mean(0), post.mean, atol=0.01)
    np.testing.assert_allclose(np.cov(s.T), post.cov, atol=0.01)


def test_wasserstein_cases():
    S = np.array([[2.0, 0.3], [0.3, 1.0]])
    g = GaussianDist(np.zeros(2), S)
    assert wasserstein2(g, np.zeros(2), S) == pytest.approx(0.0, abs=1e-7)
    assert wasserstein2(g, np.array([3.0, 4.0]), S) == pytest.approx(5.0, abs=1e-6)
    a, b = np.array([1.0, 4.0]), np.array([9.0, 1.0])
    ref = np.sqrt(np.sum((np.sqrt(a) - np.sqrt(b)) ** 2))
    assert wasserstein2(GaussianDist(np.zeros(2), np.diag(a)), np.zeros(2), np.diag(b)) == \
        pytest.approx(ref)
    with pytest.raises(DimensionMismatch):
        wasserstein2(g, np.zeros(3), np.eye(3))
