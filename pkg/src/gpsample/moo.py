"""Multi-objective optimization: Pareto utilities, NSGA-II and GP-TS.

Everything follows the minimization convention. Hypervolume is exact
for two objectives and Monte Carlo for three or more.
"""
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import EmptyCandidates, EmptyData, IterationFailed, NotPositiveDefinite
from .features import build_rff
from .paths import draw_path
from .regression import Dataset, fit
from .rng import as_generator, split


# ------------------------------------------------------------------ dominance
def dominance_matrix(Y):
    """``D[i, j]`` is True when row ``i`` dominates row ``j``."""
    Y = np.asarray(Y, dtype=float)
    le = np.ones((len(Y), len(Y)), dtype=bool)
    lt = np.zeros_like(le)
    for col in Y.T:
        a, b = col[:, None], col[None, :]
        le &= a <= b
        lt |= a < b
    return le & lt


def pareto_sort(Y):
    """Indices of the non-dominated rows of ``Y`` (duplicates are all kept)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[0] == 0:
        return np.zeros(0, dtype=int)
    return np.flatnonzero(~dominance_matrix(Y).any(axis=0))


def nondominated_ranks(Y):
    """Front index (0 = non-dominated) of every row, by layer peeling."""
    D = dominance_matrix(Y)
    count = D.sum(axis=0)
    rank = np.full(len(Y), -1)
    front = np.flatnonzero(count == 0)
    r = 0
    while front.size:
        rank[front] = r
        count = count - D[front].sum(axis=0)
        count[rank >= 0] = -1
        front = np.flatnonzero(count == 0)
        r += 1
    return rank


def crowding_distance(Y):
    Y = np.asarray(Y, dtype=float)
    n, m = Y.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for j in range(m):
        o = np.argsort(Y[:, j], kind="stable")
        span = Y[o[-1], j] - Y[o[0], j]
        dist[o[0]] = dist[o[-1]] = np.inf
        if span > 0:
            dist[o[1:-1]] += (Y[o[2:], j] - Y[o[:-2], j]) / span
    return dist


# ------------------------------------------------------------------ hypervolume
def _inside(Y, r):
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.size == 0:
        return Y.reshape(0, len(r)), 0
    ok = np.all(Y <= r, axis=1)
    return Y[ok], int((~ok).sum())


def _hv2d(Y, r):
    if len(Y) == 0:
        return 0.0
    Y = Y[np.lexsort((Y[:, 1], Y[:, 0]))]
    hv, y1 = 0.0, r[1]
    for a, b in Y:
        if b < y1:
            hv += (r[0] - a) * (y1 - b)
            y1 = b
    return hv


def _dominated_mask(S, Y, chunk=20000):
    out = np.zeros(len(S), dtype=bool)
    for s in range(0, len(S), chunk):
        blk = S[s:s + chunk]
        out[s:s + chunk] = np.any(np.all(Y[None, :, :] <= blk[:, None, :], axis=2), axis=1)
    return out


def hypervolume(Y, r, n_samples=10**6, rng=0, full_output=False):
    """Volume dominated by ``Y`` and bounded by the reference point ``r``.

    Points with any coordinate beyond ``r`` are ignored. With
    ``full_output`` the result is ``(hv, standard_error, n_ignored)``;
    the standard error is zero for the exact two-objective sweep.
    """
    r = np.asarray(r, dtype=float)
    Y, ignored = _inside(Y, r)
    if len(Y) == 0:
        hv, se = 0.0, 0.0
    elif r.size == 1:
        hv, se = float(r[0] - Y.min()), 0.0
    elif r.size == 2:
        hv, se = _hv2d(Y, r), 0.0
    else:
        rng = as_generator(rng)
        lo = Y.min(axis=0)
        box = float(np.prod(r - lo))
        S = lo + rng.random((n_samples, r.size)) * (r - lo)
        p = _dominated_mask(S, Y).mean()
        hv, se = box * p, box * np.sqrt(p * (1 - p) / n_samples)
    return (hv, se, ignored) if full_output else hv


def hvi(c, Y, r, n_samples=10**5, rng=0):
    """Hypervolume improvement of adding ``c`` to the front ``Y``."""
    return float(hvi_batch(np.atleast_2d(c), Y, r, n_samples, rng)[0])


def hvi_batch(C, Y, r, n_samples=10**5, rng=0):
    """HVI of every row of ``C`` against the same front.

    Exact for two objectives. Otherwise one set of uniform samples is
    shared by all candidates, so a dominated candidate scores exactly 0.
    """
    r = np.asarray(r, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    Y, _ = _inside(Y, r)
    out = np.zeros(len(C))
    ok = np.all(C < r, axis=1)
    if len(Y):
        ok &= ~np.any(np.all(Y[None, :, :] <= C[:, None, :], axis=2), axis=1)
    if not ok.any():
        return out
    if r.size <= 2:
        base = hypervolume(Y, r)
        for i in np.flatnonzero(ok):
            out[i] = max(hypervolume(np.vstack([Y, C[i]]), r) - base, 0.0)
        return out
    rng = as_generator(rng)
    lo = C[ok].min(axis=0)
    box = float(np.prod(r - lo))
    S = lo + rng.random((n_samples, r.size)) * (r - lo)
    S = S[~_dominated_mask(S, Y)] if len(Y) else S
    for i in np.flatnonzero(ok):
        out[i] = box * np.count_nonzero(np.all(C[i] <= S, axis=1)) / n_samples
    return out


def reference_point(Y):
    """Componentwise maximum of the observed objective values."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.size == 0:
        raise EmptyData("cannot form a reference point from no data")
    return Y.max(axis=0)


# ------------------------------------------------------------------ archive
class ParetoArchive:
    """Mutually non-dominated ``(x, y)`` pairs."""

    def __init__(self, X=None, Y=None):
        self.X = np.zeros((0, 0))
        self.Y = np.zeros((0, 0))
        if X is not None and len(X):
            X, Y = np.atleast_2d(X), np.atleast_2d(Y)
            idx = pareto_sort(Y)
            self.X, self.Y = np.array(X[idx], dtype=float), np.array(Y[idx], dtype=float)

    def __len__(self):
        return self.Y.shape[0]

    def add(self, x, y):
        """Insert a point if it is not dominated; evict what it dominates."""
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        if len(self) == 0:
            self.X, self.Y = x[None, :].copy(), y[None, :].copy()
            return True
        if np.any(np.all(self.Y <= y, axis=1) & np.any(self.Y < y, axis=1)):
            return False
        keep = ~(np.all(y <= self.Y, axis=1) & np.any(y < self.Y, axis=1))
        self.X = np.vstack([self.X[keep], x])
        self.Y = np.vstack([self.Y[keep], y])
        return True

    def hypervolume(self, r, **kw):
        return hypervolume(self.Y, r, **kw)

    def is_consistent(self):
        return not dominance_matrix(self.Y).any()


# ------------------------------------------------------------------ NSGA-II
@dataclass(frozen=True)
class Nsga2Config:
    population: int = 500
    generations: int = 100
    crossover_fraction: float = 0.65
    eta_crossover: float = 15.0
    eta_mutation: float = 20.0
    mutation_prob: float = None          # None means 1/d
    tournament_size: int = 2

    def __post_init__(self):
        if self.population < 4 or self.population % 2:
            raise ValueError("population must be even and >= 4")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 0 < self.crossover_fraction <= 1:
            raise ValueError("crossover_fraction must lie in (0, 1]")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be >= 2")


def _evaluate(objectives, X):
    if callable(objectives):
        return np.asarray(objectives(X), dtype=float)
    return np.column_stack([np.asarray(f(X), dtype=float).reshape(-1) for f in objectives])


def _sbx(P1, P2, lo, hi, eta, pc, rng):
    """Bounded simulated-binary crossover on parent arrays."""
    n, d = P1.shape
    C1, C2 = P1.copy(), P2.copy()
    do = (rng.random(n) < pc)[:, None] & (rng.random((n, d)) < 0.5)
    do &= np.abs(P1 - P2) > 1e-14
    y1, y2 = np.minimum(P1, P2), np.maximum(P1, P2)
    diff = np.where(do, y2 - y1, 1.0)
    u = rng.random((n, d))

    def child(beta):
        alpha = 2.0 - beta ** -(eta + 1.0)
        bq = np.where(u <= 1.0 / alpha, (u * alpha) ** (1.0 / (eta + 1.0)),
                      (1.0 / np.maximum(2.0 - u * alpha, 1e-300)) ** (1.0 / (eta + 1.0)))
        return bq

    bq1 = child(1.0 + 2.0 * (y1 - lo) / diff)
    bq2 = child(1.0 + 2.0 * (hi - y2) / diff)
    c1 = np.clip(0.5 * (y1 + y2 - bq1 * diff), lo, hi)
    c2 = np.clip(0.5 * (y1 + y2 + bq2 * diff), lo, hi)
    swap = rng.random((n, d)) < 0.5
    C1 = np.where(do, np.where(swap, c2, c1), C1)
    C2 = np.where(do, np.where(swap, c1, c2), C2)
    return C1, C2


def _poly_mutation(X, lo, hi, eta, pm, rng):
    do = rng.random(X.shape) < pm
    span = hi - lo
    d1, d2 = (X - lo) / span, (hi - X) / span
    u = rng.random(X.shape)
    p = 1.0 / (eta + 1.0)
    left = (2 * u + (1 - 2 * u) * (1 - d1) ** (eta + 1)) ** p - 1
    right = 1 - (2 * (1 - u) + 2 * (u - 0.5) * (1 - d2) ** (eta + 1)) ** p
    dq = np.where(u < 0.5, left, right)
    return np.where(do, np.clip(X + dq * span, lo, hi), X)


def _survivors(Y, n):
    rank = nondominated_ranks(Y)
    crowd = np.zeros(len(Y))
    chosen = []
    for r in range(rank.max() + 1):
        idx = np.flatnonzero(rank == r)
        cd = crowding_distance(Y[idx])
        crowd[idx] = cd
        if len(chosen) + idx.size <= n:
            chosen.extend(idx)
        else:
            o = np.argsort(-cd, kind="stable")
            chosen.extend(idx[o[:n - len(chosen)]])
            break
    chosen = np.asarray(chosen)
    return chosen, rank[chosen], crowd[chosen]


def _tournament(rank, crowd, n, size, rng):
    cand = rng.integers(0, rank.size, (n, size))
    # lexicographic: lower rank, then larger crowding distance
    key = rank[cand] * 1e6 - np.minimum(crowd[cand], 1e5)
    return cand[np.arange(n), np.argmin(key, axis=1)]


def nsga2(objectives, bounds, config=None, rng=0, return_population=False):
    """NSGA-II over a box; returns the final non-dominated set as an archive.

    ``objectives`` is either a vectorized callable ``X -> (n, m)`` or a
    sequence of callables ``X -> (n,)``.
    """
    cfg = config or Nsga2Config()
    rng = as_generator(rng)
    b = np.asarray(bounds, dtype=float)
    lo, hi = b[:, 0], b[:, 1]
    d, n = lo.size, cfg.population
    pm = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / d
    X = qmc.scale(qmc.LatinHypercube(d=d, seed=rng).random(n), lo, hi)
    Y = _evaluate(objectives, X)
    keep, rank, crowd = _survivors(Y, n)
    for _ in range(cfg.generations):
        par = _tournament(rank, crowd, n, cfg.tournament_size, rng)
        C1, C2 = _sbx(X[par[0::2]], X[par[1::2]], lo, hi, cfg.eta_crossover,
                      cfg.crossover_fraction, rng)
        kids = _poly_mutation(np.vstack([C1, C2]), lo, hi, cfg.eta_mutation, pm, rng)
        Xa = np.vstack([X, kids])
        Ya = np.vstack([Y, _evaluate(objectives, kids)])
        keep, rank, crowd = _survivors(Ya, n)
        X, Y = Xa[keep], Ya[keep]
    arch = ParetoArchive(X, Y)
    return (arch, X, Y) if return_population else arch


# ------------------------------------------------------------------ selection
def max_hvi_select(cand_X, cand_Y, front_Y, r, X_obs=None, n_samples=10**5, rng=0, rtol=1e-12):
    """Candidate with the largest HVI; ties go to the one farthest from ``X_obs``.

    Returns
    -------
    index : int
    gains : ndarray
        HVI of every candidate.
    """
    cand_X = np.atleast_2d(np.asarray(cand_X, dtype=float))
    if cand_X.shape[0] == 0:
        raise EmptyCandidates("no candidates to select from")
    gains = hvi_batch(cand_Y, front_Y, r, n_samples, rng)
    best = gains.max()
    ties = np.flatnonzero(gains >= best - rtol * max(1.0, abs(best)))
    if ties.size == 1 or X_obs is None or len(X_obs) == 0:
        return int(ties[0]), gains
    Xo = np.atleast_2d(X_obs)
    dist = np.min(np.linalg.norm(cand_X[ties, None, :] - Xo[None], axis=2), axis=1)
    return int(ties[np.argmax(dist)]), gains


# ------------------------------------------------------------------ campaign
@dataclass
class MoCampaign:
    objective: object                    # vectorized X -> (n, m)
    bounds: np.ndarray
    X: np.ndarray
    Y: np.ndarray                        # noisy observations
    Y_true: np.ndarray = None
    ref_point: np.ndarray = None         # fixed, for reporting only
    baseline_hv: float = None
    archive: ParetoArchive = None
    hv_history: list = field(default_factory=list)
    history: list = field(default_factory=list)
    kernels: list = None

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=float)
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if self.Y_true is None:
            self.Y_true = self.Y.copy()
        if self.archive is None:
            self.archive = ParetoArchive(self.X, self.Y)

    @property
    def n_obj(self):
        return self.Y.shape[1]

    def datasets(self):
        return [Dataset.from_raw(self.X, self.Y[:, j], self.bounds) for j in range(self.n_obj)]

    def gamma(self):
        """Hypervolume ratio against the fixed reference point and baseline."""
        if self.ref_point is None or not self.baseline_hv:
            return np.nan
        return self.archive.hypervolume(self.ref_point) / self.baseline_hv


def new_mo_campaign(problem, n_init, rng, noise_std=0.0, ref_point=None, baseline_hv=None):
    from .bo import initial_design
    rng = as_generator(rng)
    X = initial_design(problem.bounds, n_init, rng)
    Yt = np.asarray(problem(X), dtype=float)
    Y = Yt + np.asarray(noise_std) * rng.standard_normal(Yt.shape)
    ref = getattr(problem, "ref_point", None) if ref_point is None else ref_point
    return MoCampaign(problem, problem.bounds, X, Y, Yt, ref, baseline_hv)


def gp_ts_mo(campaign, family="SE", sigma_n=1e-3, n_features=2000, K=50, nsga=None,
             sampler="RFF", rng=0, restarts=3, add_noise=True, callback=None):
    """Run ``K`` iterations of multi-objective GP Thompson sampling.

    Each iteration refits one GP per objective, draws one path each,
    solves the path problem with NSGA-II and queries the candidate of
    largest hypervolume improvement over the observed front.
    """
    if campaign.X.shape[0] < 2:
        raise EmptyData("at least two initial points are required")
    nsga = nsga or Nsga2Config()
    sig = np.broadcast_to(np.asarray(sigma_n, dtype=float), (campaign.n_obj,))
    rng = as_generator(rng)
    prev = campaign.kernels or [None] * campaign.n_obj
    for it_rng in split(rng, K):
        t0 = time.perf_counter()
        fit_rngs = split(it_rng, campaign.n_obj + 3)
        path_rng, ga_rng, sel_rng = fit_rngs[-3:]
        data = campaign.datasets()
        gps = [fit(dj, family, sig[j], restarts, fit_rngs[j], x0=prev[j])
               for j, dj in enumerate(data)]
        prev = [g.kernel for g in gps]
        unit = np.column_stack([np.zeros(data[0].dim), np.ones(data[0].dim)])
        res = None
        for attempt in range(2):
            try:
                prs = split(path_rng if attempt == 0 else sel_rng, campaign.n_obj)
                paths = [draw_path(g, build_rff(g.kernel, n_features, pr), pr, sampler)
                         for g, pr in zip(gps, prs)]

                def F(U, paths=paths):
                    return np.column_stack([dj.y_from_model(p(U, single=True))
                                            for p, dj in zip(paths, data)])

                res = nsga2(F, unit, nsga, ga_rng)
                break
            except (NotPositiveDefinite, FloatingPointError, ValueError):
                continue
        if res is None:
            raise IterationFailed("NSGA-II failed twice on fresh paths")
        r = reference_point(campaign.Y)
        Uobs = data[0].to_unit(campaign.X)
        i, gains = max_hvi_select(res.X, res.Y, campaign.archive.Y, r, Uobs, rng=sel_rng)
        xr = data[0].from_unit(res.X[i])[0]
        yt = np.asarray(campaign.objective(xr[None, :]), dtype=float).reshape(-1)
        noise = np.array([sig[j] * dj.y_std for j, dj in enumerate(data)])
        y = yt + (noise * as_generator(sel_rng).standard_normal(yt.size) if add_noise else 0.0)
        campaign.X = np.vstack([campaign.X, xr])
        campaign.Y = np.vstack([campaign.Y, y])
        campaign.Y_true = np.vstack([campaign.Y_true, yt])
        campaign.archive.add(xr, y)
        campaign.kernels = prev
        g = campaign.gamma()
        campaign.hv_history.append(g)
        rec = {"iteration": len(campaign.history) + 1, "x": xr.tolist(), "y": y.tolist(),
               "hvi": float(gains[i]), "gamma": g, "n_candidates": len(res),
               "seconds": time.perf_counter() - t0}
        campaign.history.append(rec)
        if callback is not None:
            callback(rec)
    return campaign
