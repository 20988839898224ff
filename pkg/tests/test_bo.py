import numpy as np
import pytest
from scipy.stats import norm

from gpsample import Dataset, KernelSpec, NoFeasiblePoint, condition_on
from gpsample.bo import (AcquisitionSpec, acquisition_value, ei_pi_lcb, gp_ts_so,
                         initial_design, multistart_minimize, new_campaign)

from oracles import finite_diff


def _quad(x):
    x = np.asarray(x)
    return float(np.sum((x - 0.3) ** 2)), 2 * (x - 0.3)


def test_multistart_finds_quadratic_minimum():
    x, fx = multistart_minimize(_quad, [[-1, 1], [-1, 1]], n_starts=50, rng=0)
    np.testing.assert_allclose(x, [0.3, 0.3], atol=1e-6)
    assert fx < 1e-10


def test_multistart_matches_grid_oracle():
    f = lambda x: (float(np.sin(5 * x[0]) + 0.3 * x[0] ** 2), np.array([5 * np.cos(5 * x[0]) + 0.6 * x[0]]))
    grid = np.linspace(-3, 3, 600001)
    ref = (np.sin(5 * grid) + 0.3 * grid ** 2).min()
    _, fx = multistart_minimize(f, [[-3, 3]], n_starts=100, rng=1)
    assert fx == pytest.approx(ref, abs=1e-8)


def test_multistart_respects_exclusion():
    x, fx = multistart_minimize(_quad, [[-1, 1]], n_starts=20, rng=0, exclude=[[0.3]],
                                min_dist=1e-3)
    assert abs(x[0] - 0.3) >= 1e-3
    assert fx < 1e-4
    # every candidate lies inside the exclusion ball, so the best is pushed just outside
    x, _ = multistart_minimize(_quad, [[-1, 1]], n_starts=20, rng=0, exclude=[[0.3]],
                               min_dist=0.5)
    assert 0.5 <= abs(x[0] - 0.3) < 0.506


def test_multistart_degenerate_bounds():
    with pytest.raises(NoFeasiblePoint):
        multistart_minimize(_quad, [[1, 1]], n_starts=5, rng=0)


def test_analytic_acquisitions():
    assert ei_pi_lcb("EI", 0.0, 1.0, 0.0) == pytest.approx(norm.pdf(0), abs=1e-12)
    assert ei_pi_lcb("EI", 0.0, 1.0, 0.0) == pytest.approx(0.39894, abs=1e-5)
    assert ei_pi_lcb("PI", 0.0, 1.0, 0.0) == pytest.approx(0.5)
    assert ei_pi_lcb("LCB", 2.0, 1.0, 0.0, beta=2.0) == 0.0
    # sigma -> 0 limits
    assert ei_pi_lcb("EI", -1.0, 0.0, 0.0) == 1.0 and ei_pi_lcb("EI", 1.0, 0.0, 0.0) == 0.0
    assert ei_pi_lcb("PI", -1.0, 0.0, 0.0) == 1.0
    assert ei_pi_lcb("EI", -1.0, 1e-9, 0.0) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(ValueError):
        AcquisitionSpec("UCB")


@pytest.mark.parametrize("kind", ["EI", "PI", "LCB"])
def test_acquisition_gradients(kind):
    rng = np.random.default_rng(0)
    X = rng.random((10, 2))
    gp = condition_on(Dataset.from_raw(X, np.cos(4 * X).sum(1)), KernelSpec("SE", 1.0, [0.3, 0.3], 1e-3))
    x = np.array([0.41, 0.77])
    y_min = float(gp.data.y.min())
    _, g = acquisition_value(kind, gp, x, y_min)
    ref = finite_diff(lambda z: acquisition_value(kind, gp, z, y_min)[0], x)
    np.testing.assert_allclose(g, ref, rtol=1e-4, atol=1e-8)


def test_initial_design_is_latin():
    X = initial_design([[0, 1], [10, 20]], 10, 0)
    assert sorted(np.floor(X[:, 0] * 10).astype(int)) == list(range(10))
    assert sorted(np.floor(X[:, 1] - 10).astype(int)) == list(range(10))
    with pytest.raises(ValueError):
        initial_design([[0, 1]], 0, 0)


@pytest.mark.parametrize("acq", ["TS_PC", "TS_RFF", "EI"])
def test_campaign_on_1d_quadratic(acq):
    f = lambda X: (np.asarray(X)[:, 0] - 0.3) ** 2
    c = new_campaign(f, [[-1, 1]], 3, 0, c_star=0.0)
    seen = []
    gp_ts_so(c, K=20, acquisition=acq, rng=1, n_features=500, n_starts=100, restarts=2,
             callback=lambda r: seen.append(r["y_min"]))
    assert len(c.history) == 20 and c.X.shape == (23, 1)
    assert c.regret() < -3
    assert np.all(np.diff(seen) <= 0)


def test_campaign_is_deterministic():
    f = lambda X: np.sum(np.asarray(X) ** 2, axis=1)
    runs = []
    for _ in range(2):
        c = new_campaign(f, [[-1, 1]] * 2, 4, 3, c_star=0.0)
        gp_ts_so(c, K=3, rng=5, n_features=200, n_starts=50, restarts=1)
        runs.append(c.X)
    np.testing.assert_array_equal(*runs)


def test_zero_iterations_do_nothing():
    c = new_campaign(lambda X: X[:, 0], [[0, 1]], 3, 0)
    gp_ts_so(c, K=0)
    assert c.gp is None and c.history == [] and c.X.shape == (3, 1)
