"""End-to-end acceptance checks, one test (or pair of tests) per criterion.

Every criterion records a ``PASS``/``FAIL`` line in ``RESULTS``; the
conftest prints them in the terminal summary. Run this file alone with
``pytest tests/test_acceptance.py -v``. The full set takes about an hour
on one core.
"""
import time

import numpy as np
import pytest

from gpsample import (BlockGaussian, Dataset, GaussianDist, KernelSpec, build_feature_map,
                      build_rff, condition, condition_on, draw_pathwise_path,
                      draw_weight_space_path, matheron_conditional_sample, weight_posterior)
from gpsample.bo import gp_ts_so, new_campaign
from gpsample.moo import Nsga2Config, gp_ts_mo, hypervolume, new_mo_campaign, nsga2, pareto_sort
from gpsample.sobol import (InputDistribution, estimate_indices, generate_pick_freeze,
                            gsa_benchmark, run_gp_gsa)
from gpsample.studies import (convergence_study, kernel_error_dense, kernel_error_fourier_1d,
                              scaling_study, wasserstein_study)
from gpsample.testbeds import (TRUSS_NAMES, ackley, levy, levy_1d_normalized, mo_benchmark,
                               powell, rosenbrock, schwefel, so_benchmark, vlmop2)

from oracles import finite_diff, hypervolume_mc, nondominated_bruteforce

RESULTS = []


def report(num, ok, detail, seconds=None, limit=None):
    """Record one criterion; the runtime budget is part of the verdict."""
    if seconds is not None and limit is not None:
        ok = ok and seconds <= limit
        detail = f"{detail}; {seconds:.0f}s (budget {limit:.0f}s)"
    RESULTS.append(f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}")
    print(RESULTS[-1])
    return ok


# ----------------------------------------------------------------- 1
def test_c1_rff_convergence_rate():
    t0 = time.perf_counter()
    _, slopes = convergence_study(KernelSpec("SE", 1.0, [1.0]), -5.0, 5.0, 2000,
                                  (50, 100, 200, 500, 1000, 2000, 5000, 10000), ("RFF",),
                                  repeats=100, rng=0)
    s = slopes["RFF"]
    assert report(1, -0.65 <= s <= -0.35, f"RFF log-log slope {s:.3f} in [-0.65, -0.35]",
                  time.perf_counter() - t0, 120)


# ----------------------------------------------------------------- 2
def test_c2_method_ordering_and_mercer_decay():
    t0 = time.perf_counter()
    spec = KernelSpec("SE", 1.0, [np.sqrt(5.0)])
    lo, hi, n = -10.0, 10.0, 2000
    X = np.linspace(lo, hi, n)[:, None]

    def err(kind, m, rng=None):
        f = build_feature_map(kind, spec, m, rng, measure_scale=np.sqrt(3) / 2, halfwidth=15.0)
        if kind in ("RFF", "QMC"):
            return kernel_error_fourier_1d(f, spec, lo, hi, n)
        return kernel_error_dense(f, spec, X)

    e_mercer, e_hilbert, e_qmc = err("Mercer", 64), err("Hilbert", 64), err("QMC", 64)
    e_rff = float(np.median([err("RFF", 64, r) for r in range(100)]))
    order = e_mercer < e_hilbert and 10 * e_hilbert < e_qmc < e_rff
    # exponential regime: from where the error first drops below 1e-2 until it
    # reaches the round-off floor (1e-13)
    ms = np.arange(4, 65, 4)
    em = np.array([err("Mercer", int(m)) for m in ms])
    regime = (em < 1e-2) & (em > 1e-13)
    ratios = em[regime][:-1] / em[regime][1:]
    decay = regime.sum() >= 3 and np.all(ratios >= 10)
    detail = (f"Mercer {e_mercer:.2e} < Hilbert {e_hilbert:.2e} << QMC {e_qmc:.3f} < "
              f"RFF median {e_rff:.3f}; per +4 features ratios {np.round(ratios, 1).tolist()}")
    assert report(2, order and decay, detail, time.perf_counter() - t0, 60)


# ----------------------------------------------------------------- 3
def test_c3_wasserstein_stability():
    t0 = time.perf_counter()
    rows = wasserstein_study(ns=(4, 16, 64, 256, 1024), n_features=2000, realizations=20,
                             n_query=2000, rng=0)
    med = {(r["method"], r["n_train"]): r["median"] for r in rows}
    pc4, pc1024, rff1024 = med["PC", 4], med["PC", 1024], med["RFF", 1024]
    ok = pc1024 <= 2 * pc4 and rff1024 >= 5 * pc1024
    detail = (f"PC median {pc4:.3f} (N=4) -> {pc1024:.3f} (N=1024); "
              f"RFF/PC at N=1024 = {rff1024 / pc1024:.1f}")
    assert report(3, ok, detail, time.perf_counter() - t0, 600)


# ----------------------------------------------------------------- 4
def test_c4_scaling_exponents():
    t0 = time.perf_counter()
    _, exps = scaling_study(n_query=(500, 1000, 2000, 4000), n_features=(500, 1000, 2000, 4000),
                            repeats=5, rng=0)
    ex, pq, pf = exps["n_query", "exhaustive"], exps["n_query", "PC"], exps["n_features", "PC"]
    ok = ex >= 2.2 and pq <= 1.3 and pf <= 1.3
    detail = f"exhaustive {ex:.2f} >= 2.2; PC {pq:.2f} (N_xi), {pf:.2f} (N_phi) <= 1.3"
    assert report(4, ok, detail, time.perf_counter() - t0, 600)


# ----------------------------------------------------------------- 5
def test_c5_ishigami_gp_gsa():
    t0 = time.perf_counter()
    fn, dist = gsa_benchmark("ishigami")
    res, _ = run_gp_gsa(fn, dist, n_train=300, sigma_n=1e-4, rng=0, n_x=100_000, n_s=200,
                        n_pairs=10)
    S_ref = np.array([0.3138, 0.4424, 0.0])
    ST_ref = np.array([0.5574, 0.4424, 0.2436])
    ok = (np.all(np.abs(res.S_median - S_ref) <= 0.03)
          and np.all(np.abs(res.ST_median - ST_ref) <= 0.03)
          and np.all(res.S_iqr <= 0.05) and np.all(res.ST_iqr <= 0.05))
    detail = (f"S {np.round(res.S_median, 4).tolist()}, ST {np.round(res.ST_median, 4).tolist()}, "
              f"max IQR {max(res.S_iqr.max(), res.ST_iqr.max()):.4f}")
    assert report(5, ok, detail, time.perf_counter() - t0, 900)


# ----------------------------------------------------------------- 6
def test_c6_direct_sobol_additive():
    t0 = time.perf_counter()
    pf = generate_pick_freeze(InputDistribution.uniform([[0, 1], [0, 1]]), 100_000, 0)
    S, ST = estimate_indices(lambda X: X[:, 0] + X[:, 1], pf)
    ok = abs(S[0] - 0.5) <= 0.02 and abs(ST[0] - 0.5) <= 0.02
    assert report(6, ok, f"S1 {S[0]:.4f}, S1T {ST[0]:.4f}", time.perf_counter() - t0, 10)


# ----------------------------------------------------------------- 7
@pytest.fixture(scope="module")
def truss_gsa():
    t0 = time.perf_counter()
    fn, dist = gsa_benchmark("truss")
    res, _ = run_gp_gsa(fn, dist, n_train=600, sigma_n=1e-4, rng=0, n_x=50_000, n_s=200,
                        n_pairs=10)
    return dict(zip(TRUSS_NAMES, res.S_median)), time.perf_counter() - t0


def _groups_ordered(S, groups):
    return all(min(S[k] for k in a) > max(S[k] for k in b) for a, b in zip(groups, groups[1:]))


def test_c7_truss_area_pairing(truss_gsa):
    S, seconds = truss_gsa
    groups = [("A8", "A10"), ("A1", "A3"), ("A2", "A7"), ("A4", "A5", "A6", "A9")]
    ok = _groups_ordered(S, groups)
    detail = "area groups " + " > ".join(
        "{" + ",".join(f"{k}={S[k]:.4f}" for k in g) + "}" for g in groups)
    assert report("7 (areas)", ok, detail, seconds, 1800)


@pytest.mark.xfail(strict=True, reason=(
    "E > P2 is unreachable for this layout: the displacement is linear in the loads and "
    "proportional to L/E, so E > P2 caps P2's share of the response near 54%, L > P1 caps "
    "P1's near 8%, and the 10 kN load P3 would have to drive the remaining 38% or more; "
    "direct Monte Carlo gives S_P2 = 0.57 > S_E = 0.29"))
def test_c7_truss_load_material_ordering(truss_gsa):
    S, _ = truss_gsa
    order = ["E", "P2", "L", "P1", "P3"]
    ok = all(S[a] > S[b] for a, b in zip(order, order[1:]))
    detail = "load/material order " + " > ".join(f"{k}={S[k]:.4f}" for k in order)
    assert report("7 (loads)", ok, detail)


# ----------------------------------------------------------------- 8
def test_c8_schwefel_thompson_sampling():
    t0 = time.perf_counter()
    tf = so_benchmark("schwefel", 2)
    first, last = {"TS_PC": [], "TS_RFF": []}, {"TS_PC": [], "TS_RFF": []}
    for seed in range(10):
        for acq in first:
            c = new_campaign(tf, tf.bounds, 20, seed, c_star=tf.c_star)
            first[acq].append(c.regret())
            gp_ts_so(c, K=200, acquisition=acq, rng=1000 + seed)
            last[acq].append(c.regret())
    med0 = {k: float(np.median(v)) for k, v in first.items()}
    med1 = {k: float(np.median(v)) for k, v in last.items()}
    ok = (all(med0[k] - med1[k] >= 2 for k in med0)
          and med1["TS_PC"] <= med1["TS_RFF"] + 0.5)
    detail = ", ".join(f"{k} median log10 regret {med0[k]:.2f} -> {med1[k]:.2f}" for k in med0)
    assert report(8, ok, detail, time.perf_counter() - t0, 1800)


# ----------------------------------------------------------------- 9
def test_c9_vlmop2_multiobjective():
    t0 = time.perf_counter()
    prob = mo_benchmark("vlmop2")
    r = np.array([2.0, 2.0])
    base = nsga2(prob, prob.bounds, Nsga2Config(200, 200), rng=0).hypervolume(r)
    gammas = []
    for seed in range(5):
        c = new_mo_campaign(prob, 20, seed, ref_point=r, baseline_hv=base)
        gp_ts_mo(c, K=60, rng=1000 + seed)
        gammas.append(c.gamma())
    ok = min(gammas) >= 0.95
    detail = f"final gamma per seed {np.round(gammas, 4).tolist()} (baseline HV {base:.4f})"
    assert report(9, ok, detail, time.perf_counter() - t0, 1800)


# ----------------------------------------------------------------- 10
def test_c10_oracle_equivalences():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    checks = {}

    # (a) Matheron's rule against the closed-form conditional
    A = rng.standard_normal((5, 5))
    joint = BlockGaussian(GaussianDist(rng.standard_normal(5), A @ A.T + 0.5 * np.eye(5)), [0, 2])
    beta = np.array([0.3, -1.2])
    n = 100_000
    draws = matheron_conditional_sample(joint, beta, 1, count=n)
    exact = condition(joint, beta)
    sd = np.sqrt(np.diag(exact.cov))
    mean_ok = np.all(np.abs(draws.mean(0) - exact.mean) <= 4 * sd / np.sqrt(n))
    var_ok = np.all(np.abs(draws.var(0) - sd ** 2) <= 4 * sd ** 2 * np.sqrt(2.0 / n))
    checks["a"] = bool(mean_ok and var_ok)

    # (b) exact 2-D hypervolume against Monte Carlo
    ok = True
    for _ in range(50):
        Y = rng.random((rng.integers(1, 20), 2))
        ref, se = hypervolume_mc(Y, [1.1, 1.1], 100_000, rng)
        ok &= abs(hypervolume(Y, [1.1, 1.1]) - ref) <= 4 * se + 1e-12
    checks["b"] = bool(ok)

    # (c) weight posterior: direct against Sherman-Morrison-Woodbury
    Phi, y = rng.standard_normal((10, 60)), rng.standard_normal(10)
    a, b = weight_posterior(Phi, y, 0.2), weight_posterior(Phi, y, 0.2, use_smw=True)
    checks["c"] = bool(np.abs(a.mean - b.mean).max() <= 1e-8
                       and np.abs(a.cov - b.cov).max() <= 1e-8)

    # (d) Pareto sort against the pairwise oracle
    Y = rng.random((200, 3))
    checks["d"] = list(pareto_sort(Y)) == nondominated_bruteforce(Y)

    # (e) path gradients against finite differences
    X = rng.random((15, 2))
    gp = condition_on(Dataset.from_raw(X, np.sin(3 * X).sum(1)),
                      KernelSpec("Matern52", 1.0, [0.3, 0.5], 1e-3))
    worst = 0.0
    for i, x in enumerate(rng.random((100, 2))):
        draw = draw_pathwise_path if i % 2 else draw_weight_space_path
        p = draw(gp, build_rff(gp.kernel, 300, i), i)
        g, fd = p.grad(x), finite_diff(lambda z: p(z[None])[0], x)
        worst = max(worst, np.max(np.abs(g - fd)) / max(np.max(np.abs(g)), 1e-3))
    checks["e"] = worst <= 1e-5

    detail = ", ".join(f"({k}) {'ok' if v else 'FAILED'}" for k, v in checks.items())
    detail += f"; worst gradient relative error {worst:.1e}"
    assert report(10, all(checks.values()), detail, time.perf_counter() - t0, 120)


# ----------------------------------------------------------------- 11
def test_c11_benchmark_ground_truths():
    t0 = time.perf_counter()
    c = 1 / np.sqrt(2)
    checks = [
        abs(schwefel([[420.9687, 420.9687]])[0]) < 1e-3,
        rosenbrock([[1, 1, 1, 1]])[0] == 0.0,
        powell([[0, 0, 0, 0]])[0] == 0.0,
        abs(ackley(np.zeros((1, 16)))[0]) < 1e-12,
        abs(levy([[1.0, 1.0, 1.0]])[0]) < 1e-12,
        abs(levy_1d_normalized([[1.0]])[0]) < 1e-12,
        np.allclose(vlmop2([[c, c]])[0], [0.0, 1 - np.exp(-4)]),
        rosenbrock([[0, 0]])[0] == 1.0,
        abs(schwefel([[0.0, 0.0]])[0] - 2 * 418.9829) < 1e-9,
    ]
    # no sampled point beats the known minimum
    for name, d in (("schwefel", 2), ("rosenbrock", 4), ("powell", 4), ("ackley", 16)):
        tf = so_benchmark(name, d)
        X = np.random.default_rng(0).uniform(tf.bounds[:, 0], tf.bounds[:, 1], (20000, d))
        checks.append(tf(X).min() >= tf.c_star - 1e-3)
    assert report(11, all(checks), f"{sum(checks)}/{len(checks)} identities hold",
                  time.perf_counter() - t0, 5)
