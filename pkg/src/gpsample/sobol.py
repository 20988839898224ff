"""Pick-freeze estimation of first-order and total-effect Sobol' indices.

First-order indices use the Saltelli (2010) estimator and total effects
use Jansen's, ``mean((c(A) - c(A_B^i))^2) / 2``, where ``A_B^i`` is ``A``
with column ``i`` taken from ``B``. Sums are accumulated over row chunks
so that ``N_x = 1e5`` with hundreds of GP paths never materializes the
full output tensor.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.stats import qmc

from .errors import DegenerateVariance, InvalidDistribution
from .features import build_rff
from .paths import draw_path
from .regression import Dataset, fit
from .rng import as_generator, split

DEGENERATE_VAR = 1e-12


class InputDistribution:
    """Independent marginals, each ``(kind, a, b)``.

    ``uniform``: bounds ``a < b``. ``gaussian``: mean ``a``, std ``b``.
    ``gaussian_cov``: mean ``a``, coefficient of variation ``b`` so the
    std is ``a * b``.
    """

    def __init__(self, marginals, names=None):
        self.marginals = []
        for m in marginals:
            kind, a, b = m[0].lower(), float(m[1]), float(m[2])
            if kind == "uniform":
                if not a < b:
                    raise InvalidDistribution(f"uniform bounds must satisfy lower < upper, got {a}, {b}")
                self.marginals.append(("uniform", a, b))
            elif kind in ("gaussian", "normal", "gaussian_cov"):
                sd = abs(a) * b if kind == "gaussian_cov" else b
                if not sd > 0:
                    raise InvalidDistribution("Gaussian marginals need a positive std")
                self.marginals.append(("gaussian", a, sd))
            else:
                raise InvalidDistribution(f"unknown marginal kind {m[0]!r}")
        self.names = list(names) if names is not None else [f"x{i + 1}" for i in range(self.dim)]

    @classmethod
    def uniform(cls, bounds):
        return cls([("uniform", lo, hi) for lo, hi in np.asarray(bounds)])

    @property
    def dim(self):
        return len(self.marginals)

    def ppf(self, U):
        U = np.atleast_2d(U)
        out = np.empty_like(U, dtype=float)
        for i, (kind, a, b) in enumerate(self.marginals):
            out[:, i] = a + (b - a) * U[:, i] if kind == "uniform" else stats.norm.ppf(U[:, i], a, b)
        return out

    def sample(self, n, rng):
        rng = as_generator(rng)
        out = np.empty((n, self.dim))
        for i, (kind, a, b) in enumerate(self.marginals):
            out[:, i] = rng.uniform(a, b, n) if kind == "uniform" else rng.normal(a, b, n)
        return out

    def moments(self):
        mean = np.array([0.5 * (a + b) if k == "uniform" else a for k, a, b in self.marginals])
        sd = np.array([(b - a) / np.sqrt(12) if k == "uniform" else b for k, a, b in self.marginals])
        return mean, sd

    def bounds(self, n_std=4.0):
        """Box used to normalize GP inputs: uniform support or mean +- n_std std."""
        return np.array([(a, b) if k == "uniform" else (a - n_std * b, a + n_std * b)
                         for k, a, b in self.marginals])

    def to_dict(self):
        return {"marginals": [list(m) for m in self.marginals], "names": self.names}


@dataclass(frozen=True, eq=False)
class PickFreeze:
    A: np.ndarray
    B: np.ndarray

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def dim(self):
        return self.A.shape[1]

    def ab(self, i, rows=slice(None)):
        """``A`` with column ``i`` taken from ``B``."""
        M = self.A[rows].copy()
        M[:, i] = self.B[rows, i]
        return M


def generate_pick_freeze(dist, n_x, rng):
    if n_x < 2:
        raise ValueError("N_x must be >= 2")
    rng = as_generator(rng)
    return PickFreeze(dist.sample(n_x, rng), dist.sample(n_x, rng))


class _Accumulator:
    """Running sums for the pick-freeze estimators over row chunks.

    Arrays carry a trailing axis of length ``P`` (paths or 1)."""

    def __init__(self):
        self.n = 0
        self.shift = None

    def add(self, cA, cB, cAB):
        # cA, cB: (m, P); cAB: (d, m, P)
        if self.shift is None:
            self.shift = 0.5 * (cA.mean(0) + cB.mean(0))
            P = cA.shape[1]
            d = cAB.shape[0]
            self.s1 = np.zeros(P)
            self.s2 = np.zeros(P)
            self.first = np.zeros((d, P))
            self.total = np.zeros((d, P))
        a = cA - self.shift
        b = cB - self.shift
        ab = cAB - self.shift
        self.n += cA.shape[0]
        self.s1 += a.sum(0) + b.sum(0)
        self.s2 += (a * a).sum(0) + (b * b).sum(0)
        self.first += np.einsum("mp,dmp->dp", b, ab - a[None])
        self.total += ((a[None] - ab) ** 2).sum(1)

    def result(self):
        m = 2 * self.n
        var = (self.s2 - self.s1 ** 2 / m) / (m - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            S = self.first / self.n / var
            ST = self.total / (2 * self.n) / var
        return S, ST, var


def _as_columns(v):
    v = np.asarray(v, dtype=float)
    return v[:, None] if v.ndim == 1 else v


def estimate_indices(fn, pf, chunk=20000):
    """First-order and total-effect indices of ``fn`` from pick-freeze matrices.

    ``fn`` maps ``(m, d)`` to ``(m,)`` or ``(m, P)``; with ``P`` outputs the
    indices have shape ``(d, P)``.

    Raises
    ------
    DegenerateVariance
        If the pooled output variance is below 1e-12 for any output.
    """
    acc = _Accumulator()
    for lo in range(0, pf.n, chunk):
        rows = slice(lo, min(lo + chunk, pf.n))
        cA = _as_columns(fn(pf.A[rows]))
        cB = _as_columns(fn(pf.B[rows]))
        cAB = np.stack([_as_columns(fn(pf.ab(i, rows))) for i in range(pf.dim)])
        acc.add(cA, cB, cAB)
    S, ST, var = acc.result()
    if np.any(~(var >= DEGENERATE_VAR)):
        raise DegenerateVariance(f"output variance {np.min(var):.3g} is below {DEGENERATE_VAR}")
    if S.shape[1] == 1:
        return S[:, 0], ST[:, 0]
    return S, ST


@dataclass
class SensitivityResult:
    S: np.ndarray                      # (d, n_values)
    ST: np.ndarray
    names: list = None
    excluded: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def S_median(self):
        return np.median(self.S, axis=1)

    @property
    def ST_median(self):
        return np.median(self.ST, axis=1)

    @staticmethod
    def _iqr(a):
        q1, q3 = np.percentile(a, [25, 75], axis=1)
        return q3 - q1

    @property
    def S_iqr(self):
        return self._iqr(self.S)

    @property
    def ST_iqr(self):
        return self._iqr(self.ST)

    def to_dict(self):
        names = self.names or [f"x{i + 1}" for i in range(self.S.shape[0])]
        per_dim = [{"name": n, "S_median": float(a), "S_iqr": float(b),
                    "ST_median": float(c), "ST_iqr": float(e)}
                   for n, a, b, c, e in zip(names, self.S_median, self.S_iqr,
                                            self.ST_median, self.ST_iqr)]
        return {"format_version": 1, "per_dim": per_dim, "excluded_paths": int(self.excluded),
                "n_values": int(self.S.shape[1]), **self.meta}


def gp_gsa(gp, dist, n_x=10_000, n_s=200, n_features=2000, sampler="PC", n_pairs=10,
           rng=0, paths_per_feature_map=None, chunk=2000):
    """Sobol' indices of GP posterior sample paths.

    For each pick-freeze pair, ``n_s`` paths are drawn and the estimators
    are applied to every path. Paths are drawn in groups that share one
    random feature map (``paths_per_feature_map``, default all ``n_s``),
    which keeps the feature evaluation cost independent of ``n_s``.
    Inputs are mapped into the GP's normalized space before evaluation.
    """
    rng = as_generator(rng)
    group = n_s if paths_per_feature_map is None else max(1, min(paths_per_feature_map, n_s))
    S_all, ST_all, excluded = [], [], 0
    for pair_rng in split(rng, n_pairs):
        pf_rng, path_rng = split(pair_rng, 2)
        pf = generate_pick_freeze(dist, n_x, pf_rng)
        pf = PickFreeze(gp.data.to_unit(pf.A), gp.data.to_unit(pf.B))
        done = 0
        for g_rng in split(path_rng, -(-n_s // group)):
            size = min(group, n_s - done)
            done += size
            fm_rng, w_rng = split(g_rng, 2)
            fmap = build_rff(gp.kernel, n_features, fm_rng)
            path = draw_path(gp, fmap, w_rng, sampler, count=size)
            acc = _Accumulator()
            for lo in range(0, n_x, chunk):
                rows = slice(lo, min(lo + chunk, n_x))
                cA = path(pf.A[rows])
                cB = path(pf.B[rows])
                cAB = np.stack([path(pf.ab(i, rows)) for i in range(pf.dim)])
                acc.add(cA, cB, cAB)
            S, ST, var = acc.result()
            ok = var >= DEGENERATE_VAR
            excluded += int((~ok).sum())
            S_all.append(S[:, ok])
            ST_all.append(ST[:, ok])
    return SensitivityResult(np.hstack(S_all), np.hstack(ST_all), list(dist.names), excluded,
                             {"n_x": n_x, "n_s": n_s, "n_pairs": n_pairs, "sampler": sampler,
                              "n_features": n_features})


def gsa_benchmark(name):
    """``(function, InputDistribution)`` for the GSA test problems."""
    from .testbeds import ishigami, truss_from_table, truss_input_distribution
    key = name.lower()
    if key == "ishigami":
        return ishigami, InputDistribution.uniform([[-np.pi, np.pi]] * 3)
    if key == "truss":
        return truss_from_table, truss_input_distribution()
    raise KeyError(f"unknown GSA problem {name!r}")


def training_design(dist, n, rng):
    """Latin hypercube in probability space pushed through the marginals."""
    U = qmc.LatinHypercube(d=dist.dim, seed=as_generator(rng)).random(n)
    return dist.ppf(U)


def run_gp_gsa(fn, dist, n_train=300, family="SE", sigma_n=1e-4, restarts=10, rng=0, **kw):
    """Train a GP on ``n_train`` model runs and apply :func:`gp_gsa`.

    Inputs are normalized by ``dist.bounds()``; remaining keywords go to
    :func:`gp_gsa`.

    Returns
    -------
    SensitivityResult, FittedGP
    """
    d_rng, f_rng, g_rng = split(as_generator(rng), 3)
    X = training_design(dist, n_train, d_rng)
    data = Dataset.from_raw(X, fn(X), dist.bounds())
    gp = fit(data, family, sigma_n, restarts, f_rng)
    return gp_gsa(gp, dist, rng=g_rng, **kw), gp
