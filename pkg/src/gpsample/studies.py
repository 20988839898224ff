"""Numerical studies: kernel-approximation convergence, Wasserstein
accuracy of posterior paths, and sampling-cost scaling.

Each study returns plain rows (lists of dicts) so the CLI can write them
as CSV without further processing.
"""
import time

import numpy as np

from .features import FourierFeatures, build_feature_map, build_rff
from .kernels import KernelSpec
from .paths import (exhaustive_sample, draw_pathwise_path, pathwise_moments, psd_sqrt,
                    wasserstein2, weight_space_moments)
from .regression import Dataset, condition_on, fit
from .rng import as_generator, split
from .testbeds import levy_1d_normalized

CONVERGENCE_METHODS = ("RFF", "QMC", "MercerSE", "Hilbert")


def loglog_slope(n, err):
    """Least-squares slope of ``log err`` against ``log n``."""
    n, err = np.asarray(n, dtype=float), np.asarray(err, dtype=float)
    ok = (n > 0) & (err > 0)
    if ok.sum() < 2:
        return np.nan
    return float(np.polyfit(np.log(n[ok]), np.log(err[ok]), 1)[0])


# ------------------------------------------------------------------ kernel error
def _cos_sums(omega, coef, step, T, block=64):
    """``f[t] = Re sum_k coef[..., k] exp(i omega_k t step)`` for ``t < T``.

    ``t = a*block + b`` splits the exponential into two small tables so the
    sum becomes one complex matrix product.
    """
    A = -(-T // block)
    Ea = np.exp(1j * np.outer(np.arange(A) * block * step, omega))
    Eb = np.exp(1j * np.outer(np.arange(block) * step, omega))
    coef = np.atleast_2d(coef)
    rows = (coef[:, None, :] * Ea[None]).reshape(-1, omega.size)
    F = (rows @ Eb.T).real.reshape(coef.shape[0], A * block)
    return F[:, :T]


def kernel_error_fourier_1d(fmap, spec, lo, hi, n):
    """Relative Frobenius error of a 1-D Fourier map on an ``n``-point grid.

    Uses ``cos u cos v = (cos(u - v) + cos(u + v)) / 2``: the approximate
    Gram matrix is a Toeplitz part plus a Hankel part, so the error needs
    only ``O(n)`` values per feature instead of ``n^2``.
    """
    if fmap.dim != 1:
        raise ValueError("the lag/sum decomposition is one-dimensional")
    step = (hi - lo) / (n - 1)
    T = 2 * n - 1
    w = fmap.omega[:, 0]
    half = 0.5 * fmap.amplitude ** 2
    c_lag = np.exp(-1j * w * (n - 1) * step)
    c_sum = np.exp(1j * (2.0 * w * lo + 2.0 * fmap.phase))
    D, S = half * _cos_sums(w, np.vstack([c_lag, c_sum]), step, T)
    lags = (np.arange(T) - (n - 1)) * step
    E = spec(np.zeros((1, 1)), lags[:, None])[0] - D
    Kl = E + D
    cnt = n - np.abs(np.arange(T) - (n - 1))        # pairs per lag and per sum
    # cross term sum_{i,j} E[i-j] S[i+j]: for lag l, s runs over |l|, |l|+2, ...
    absl = np.abs(np.arange(T) - (n - 1))
    cross = 0.0
    for p in (0, 1):
        cs = np.concatenate([[0.0], np.cumsum(S[p::2])])
        sel = absl % 2 == p
        jlo = (absl[sel] - p) // 2
        jhi = (2 * (n - 1) - absl[sel] - p) // 2
        cross += np.sum(E[sel] * (cs[jhi + 1] - cs[jlo]))
    err2 = np.sum(cnt * E * E) + np.sum(cnt * S * S) - 2.0 * cross
    ref2 = np.sum(cnt * Kl * Kl)
    return float(np.sqrt(max(err2, 0.0) / ref2))


def kernel_error_dense(fmap, spec, X):
    """Relative Frobenius error of ``Phi Phi^T`` against ``K`` on points ``X``."""
    P = fmap(X)
    K = spec(X)
    return float(np.linalg.norm(K - P @ P.T) / np.linalg.norm(K))


def convergence_study(spec=None, lo=-5.0, hi=5.0, n_grid=2000, n_features=(50, 100, 200, 500,
                      1000, 2000, 5000, 10000), methods=("RFF", "QMC"), repeats=100, rng=0,
                      measure_scale=None, halfwidth=None):
    """Relative kernel error ``eta`` versus feature count for several maps.

    Returns
    -------
    rows : list of dict
        One row per (method, N_phi) with mean, median and the 5/95 %
        quantiles over repeats (deterministic maps use one repeat).
    slopes : dict
        Log-log slope of the mean error per method.
    """
    spec = spec or KernelSpec("SE", 1.0, [1.0])
    if spec.dim != 1:
        raise ValueError("the convergence study is one-dimensional")
    rng = as_generator(rng)
    X = np.linspace(lo, hi, n_grid)[:, None]
    kw = {"measure_scale": measure_scale if measure_scale is not None else 1.0,
          "halfwidth": halfwidth if halfwidth is not None else 1.5 * max(abs(lo), abs(hi)),
          "center": 0.0}
    rows, slopes = [], {}
    for method in methods:
        random = method.upper() == "RFF"
        errs = []
        for m in n_features:
            reps = repeats if random else 1
            e = []
            for r in split(rng, reps) if random else [None]:
                fmap = build_feature_map(method, spec, int(m), r, **kw)
                if isinstance(fmap, FourierFeatures):
                    e.append(kernel_error_fourier_1d(fmap, spec, lo, hi, n_grid))
                else:
                    e.append(kernel_error_dense(fmap, spec, X))
            e = np.asarray(e)
            errs.append(e.mean())
            rows.append({"method": method, "n_features": int(m), "repeats": reps,
                         "mean": float(e.mean()), "median": float(np.median(e)),
                         "q05": float(np.quantile(e, 0.05)), "q95": float(np.quantile(e, 0.95))})
        slopes[method] = loglog_slope(n_features, errs)
    return rows, slopes


# ------------------------------------------------------------------ Wasserstein
def levy_training_set(n, rng, lo_frac=0.2, hi_frac=0.6):
    """Random 1-D Levy data on the sub-interval used for the accuracy study."""
    rng = as_generator(rng)
    a, b = -10.0, 10.0
    x = rng.uniform(a + lo_frac * (b - a), a + hi_frac * (b - a), n)
    y = levy_1d_normalized(x[:, None])
    return Dataset.from_raw(x[:, None], y, np.array([[a, b]]), standardize=False)


def wasserstein_study(ns=(4, 16, 64, 256, 1024), n_features=2000, realizations=20, n_query=2000,
                      family="SE", sigma_n=1e-3, rng=0, restarts=5, refit=False):
    """Distance between exact and feature-based posteriors on the Levy setup.

    For each training size one data set is drawn; each feature realization
    then gives the exact moments of the weight-space (RFF) and pathwise
    (PC) samplers conditional on that map. By default the kernel is fitted
    once, on a separate set of ``max(ns)`` points, and shared by all sizes
    so that only ``N`` varies; ``refit=True`` fits it per size instead.
    """
    rng = as_generator(rng)
    ref_rng, rng = split(rng, 2)
    Xq = np.linspace(0.0, 1.0, n_query)[:, None]
    shared = None
    if not refit:
        a, b = split(ref_rng, 2)
        shared = fit(levy_training_set(int(max(ns)), a), family, sigma_n, restarts, b).kernel
    rows = []
    for n, r in zip(ns, split(rng, len(ns))):
        data_rng, fit_rng, feat_rng = split(r, 3)
        data = levy_training_set(int(n), data_rng)
        if shared is None:
            gp = fit(data, family, sigma_n, restarts, fit_rng)
        else:
            gp = condition_on(data, shared)
        exact = gp.predict(Xq)
        root = psd_sqrt(exact.cov)
        vals = {"RFF": [], "PC": []}
        for fr in split(feat_rng, realizations):
            fmap = build_rff(gp.kernel, n_features, fr)
            for name, moments in (("RFF", weight_space_moments), ("PC", pathwise_moments)):
                m, K = moments(gp, fmap, Xq)
                vals[name].append(wasserstein2(exact, m, K, root))
        for name, v in vals.items():
            v = np.asarray(v)
            rows.append({"n_train": int(n), "method": name, "median": float(np.median(v)),
                         "q25": float(np.quantile(v, 0.25)), "q75": float(np.quantile(v, 0.75)),
                         "values": v.tolist(), "lengthscale": float(gp.kernel.ell[0])})
    return rows


# ------------------------------------------------------------------ scaling
def _best_time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def scaling_study(n_query=(500, 1000, 2000, 4000), n_features=(500, 1000, 2000, 4000),
                  n_train=20, fixed_features=1000, fixed_query=1000, count=1, repeats=3, rng=0):
    """Wall time of exhaustive sampling and GP-PC versus ``N_xi`` and ``N_phi``.

    Returns rows of (sweep, method, size, seconds) and the fitted log-log
    exponents keyed by ``(sweep, method)``.
    """
    rng = as_generator(rng)
    data = levy_training_set(n_train, rng)
    gp = condition_on(data, KernelSpec("SE", 1.0, [0.1], 1e-3))
    rows = []

    def pc(Xq, m, r):
        path = draw_pathwise_path(gp, build_rff(gp.kernel, m, r), r, count)
        return path(Xq)

    for nq in n_query:
        Xq = np.linspace(0.0, 1.0, nq)[:, None]
        rows.append({"sweep": "n_query", "method": "exhaustive", "size": nq,
                     "seconds": _best_time(lambda: exhaustive_sample(gp, Xq, count, 1), repeats)})
        rows.append({"sweep": "n_query", "method": "PC", "size": nq,
                     "seconds": _best_time(lambda: pc(Xq, fixed_features, 1), repeats)})
    Xq = np.linspace(0.0, 1.0, fixed_query)[:, None]
    for m in n_features:
        rows.append({"sweep": "n_features", "method": "PC", "size": m,
                     "seconds": _best_time(lambda: pc(Xq, m, 1), repeats)})
    exps = {}
    for key in {(r["sweep"], r["method"]) for r in rows}:
        sel = [r for r in rows if (r["sweep"], r["method"]) == key]
        exps[key] = loglog_slope([r["size"] for r in sel], [r["seconds"] for r in sel])
    return rows, exps
