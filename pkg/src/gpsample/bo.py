"""Single-objective Bayesian optimization by GP Thompson sampling.

The campaign runs in normalized space: inputs in ``[0, 1]^d`` and
z-scored outputs, refit every iteration. Analytic EI / PI / LCB
acquisitions are provided as baselines.
"""
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.stats import norm, qmc

from .errors import IterationFailed, NoFeasiblePoint, NotPositiveDefinite
from .features import build_rff
from .paths import draw_path
from .regression import Dataset, fit
from .rng import as_generator, split

ACQUISITIONS = ("TS_PC", "TS_RFF", "EI", "PI", "LCB")


def initial_design(bounds, n, rng):
    """Latin hypercube of ``n`` points in the box ``bounds`` (d x 2)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    b = np.asarray(bounds, dtype=float)
    U = qmc.LatinHypercube(d=b.shape[0], seed=as_generator(rng)).random(n)
    return qmc.scale(U, b[:, 0], b[:, 1])


# ------------------------------------------------------------------ acquisitions
@dataclass(frozen=True)
class AcquisitionSpec:
    kind: str = "TS_PC"
    lcb_beta: float = 2.0

    def __post_init__(self):
        k = self.kind.upper()
        if k not in ACQUISITIONS:
            raise ValueError(f"unknown acquisition {self.kind!r}; expected one of {ACQUISITIONS}")
        if not self.lcb_beta > 0:
            raise ValueError("lcb_beta must be positive")
        object.__setattr__(self, "kind", k)

    @property
    def is_ts(self):
        return self.kind.startswith("TS")


def ei_pi_lcb(kind, mu, sigma, y_min, beta=2.0):
    """Acquisition values from posterior mean and standard deviation.

    EI and PI are returned as they are (to be maximized); LCB is to be
    minimized. At ``sigma == 0`` the limiting values are used.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if kind == "LCB":
        return mu - beta * sigma
    imp = y_min - mu
    pos = sigma > 0
    z = np.where(pos, imp / np.where(pos, sigma, 1.0), 0.0)
    if kind == "EI":
        return np.where(pos, imp * norm.cdf(z) + sigma * norm.pdf(z), np.maximum(imp, 0.0))
    if kind == "PI":
        return np.where(pos, norm.cdf(z), (imp > 0).astype(float))
    raise ValueError(f"unknown analytic acquisition {kind!r}")


def acquisition_value(kind, gp, x, y_min, beta=2.0):
    """Acquisition and gradient at one normalized point ``x``.

    Returns the value in its natural orientation (EI, PI maximized; LCB
    minimized) together with its gradient.
    """
    kind = kind.upper()
    mu, var, dmu, dvar = gp.mean_var_grad(x)
    sigma = np.sqrt(var)
    val = float(ei_pi_lcb(kind, mu, sigma, y_min, beta))
    if sigma <= 1e-12:
        if kind == "LCB":
            return val, dmu
        grad = -dmu if (kind == "EI" and y_min > mu) else np.zeros_like(dmu)
        return val, grad
    dsig = dvar / (2.0 * sigma)
    if kind == "LCB":
        return val, dmu - beta * dsig
    z = (y_min - mu) / sigma
    if kind == "EI":
        return val, -norm.cdf(z) * dmu + norm.pdf(z) * dsig
    dz = (-dmu * sigma - (y_min - mu) * dsig) / sigma ** 2
    return val, norm.pdf(z) * dz


def _acquisition_objective(acq, gp, y_min):
    """Minimization objective ``(f, f_and_grad, f_batch)`` in normalized space."""
    kind = acq.kind
    sign = 1.0 if kind == "LCB" else -1.0

    def f_and_grad(x):
        v, g = acquisition_value(kind, gp, x, y_min, acq.lcb_beta)
        return sign * v, sign * g

    def f_batch(X):
        mu, var = gp.predict_mean_var(X)
        return sign * ei_pi_lcb(kind, mu, np.sqrt(var), y_min, acq.lcb_beta)

    return f_and_grad, f_batch


# ------------------------------------------------------------------ inner optimizer
def _far_enough(x, exclude, min_dist):
    if exclude is None or len(exclude) == 0 or min_dist <= 0:
        return True
    return np.min(np.linalg.norm(np.asarray(exclude) - x, axis=1)) >= min_dist


def multistart_minimize(f_and_grad, bounds, n_starts=500, rng=0, exclude=None, min_dist=1e-6,
                        f_batch=None, n_polish=10, tol=1e-12, maxiter=200):
    """Minimize a differentiable function over a box from many starts.

    All ``n_starts`` uniform points are scored (vectorized when
    ``f_batch`` is given) and the best ``n_polish`` are refined with
    L-BFGS-B. Local minima closer than ``min_dist`` to any excluded point
    are discarded; if all are, the best is pushed ``min_dist`` away in a
    random direction.

    Returns
    -------
    x : ndarray
        The selected point.
    fx : float
        Objective value at ``x``.
    """
    rng = as_generator(rng)
    b = np.asarray(bounds, dtype=float)
    lo, hi = b[:, 0], b[:, 1]
    if np.any(~(hi > lo)):
        raise NoFeasiblePoint("bounds are degenerate")
    d = lo.size
    starts = lo + rng.random((n_starts, d)) * (hi - lo)
    if f_batch is not None:
        vals = np.asarray(f_batch(starts), dtype=float)
    else:
        vals = np.array([f_and_grad(s)[0] for s in starts])
    vals = np.where(np.isfinite(vals), vals, np.inf)
    order = np.argsort(vals, kind="stable")[:max(1, min(n_polish, n_starts))]

    cands = []
    for s in starts[order]:
        try:
            res = optimize.minimize(f_and_grad, s, jac=True, method="L-BFGS-B",
                                    bounds=list(zip(lo, hi)),
                                    options=dict(ftol=tol, gtol=tol, maxiter=maxiter))
            x, fx = np.clip(res.x, lo, hi), float(res.fun)
        except (ValueError, np.linalg.LinAlgError):
            continue
        if np.isfinite(fx):
            cands.append((fx, x))
    # raw starts remain valid candidates if polishing fails
    cands += [(float(vals[i]), starts[i]) for i in order if np.isfinite(vals[i])]
    if not cands:
        raise NoFeasiblePoint("no finite objective value found")
    cands.sort(key=lambda c: c[0])
    for fx, x in cands:
        if _far_enough(x, exclude, min_dist):
            return x, fx
    fx, x = cands[0]
    for _ in range(100):
        u = rng.standard_normal(d)
        y = np.clip(x + 1.01 * min_dist * u / np.linalg.norm(u), lo, hi)
        if _far_enough(y, exclude, min_dist):
            return y, float(f_and_grad(y)[0])
    raise NoFeasiblePoint("could not leave the exclusion region")


# ------------------------------------------------------------------ campaign
@dataclass
class BoCampaign:
    objective: object
    bounds: np.ndarray
    X: np.ndarray                        # raw inputs
    y: np.ndarray                        # noisy observations
    y_true: np.ndarray = None            # noise-free values where known
    c_star: float = None
    history: list = field(default_factory=list)
    gp: object = None

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=float)
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.y_true is None:
            self.y_true = self.y.copy()

    @property
    def incumbent(self):
        i = int(np.argmin(self.y))
        return self.X[i], self.y[i], self.y_true[i]

    @property
    def y_min(self):
        return float(self.y.min())

    def regret(self):
        """``log10(c(x_min) - c*)`` at the incumbent, using the noise-free value."""
        if self.c_star is None:
            raise ValueError("c_star is required for regret reporting")
        return float(np.log10(max(self.incumbent[2] - self.c_star, 1e-300)))


def new_campaign(objective, bounds, n_init, rng, noise_std=0.0, c_star=None):
    """Latin-hypercube start; noise is added in raw units with ``noise_std``."""
    rng = as_generator(rng)
    X = initial_design(bounds, n_init, rng)
    yt = np.asarray(objective(X), dtype=float)
    y = yt + noise_std * rng.standard_normal(yt.size)
    return BoCampaign(objective, bounds, X, y, yt, c_star)


def gp_ts_so(campaign, family="SE", sigma_n=1e-3, n_features=2000, K=200,
             acquisition="TS_PC", rng=0, n_starts=500, n_polish=10, min_dist=1e-6,
             restarts=3, add_noise=True, callback=None):
    """Run ``K`` iterations of GP Thompson sampling (or an analytic baseline).

    Observations receive Gaussian noise of standard deviation
    ``sigma_n * std(y)`` (``sigma_n`` is specified on the z-scored scale).
    """
    acq = acquisition if isinstance(acquisition, AcquisitionSpec) else AcquisitionSpec(acquisition)
    rng = as_generator(rng)
    prev = campaign.gp.kernel if campaign.gp is not None else None
    for it_rng in split(rng, K):
        t0 = time.perf_counter()
        fit_rng, path_rng, opt_rng, noise_rng = split(it_rng, 4)
        data = Dataset.from_raw(campaign.X, campaign.y, campaign.bounds)
        gp = fit(data, family, sigma_n, restarts, fit_rng, x0=prev)
        prev = gp.kernel
        U = data.to_unit(campaign.X)
        unit = np.column_stack([np.zeros(data.dim), np.ones(data.dim)])
        x = None
        for attempt in range(2):
            a_rng, o_rng = split(path_rng if attempt == 0 else opt_rng, 2)
            try:
                if acq.is_ts:
                    fmap = build_rff(gp.kernel, n_features, a_rng)
                    path = draw_path(gp, fmap, a_rng, acq.kind[3:])
                    fg = lambda u, p=path: (float(p(u[None, :])[0]), p.grad(u))
                    fb = path
                else:
                    fg, fb = _acquisition_objective(acq, gp, float(data.y.min()))
                x, _ = multistart_minimize(fg, unit, n_starts, o_rng, U, min_dist, fb, n_polish)
                break
            except (NoFeasiblePoint, NotPositiveDefinite, FloatingPointError):
                continue
        if x is None:
            raise IterationFailed(f"inner optimization failed twice at iteration {len(campaign.history)}")
        xr = data.from_unit(x)[0]
        yt = float(np.asarray(campaign.objective(xr[None, :])).reshape(-1)[0])
        y = yt + (sigma_n * data.y_std * as_generator(noise_rng).standard_normal() if add_noise else 0.0)
        campaign.X = np.vstack([campaign.X, xr])
        campaign.y = np.append(campaign.y, y)
        campaign.y_true = np.append(campaign.y_true, yt)
        campaign.gp = gp
        rec = {"iteration": len(campaign.history) + 1, "x": xr.tolist(), "y": y, "y_true": yt,
               "y_min": campaign.y_min, "y_min_true": float(campaign.incumbent[2]),
               "seconds": time.perf_counter() - t0}
        campaign.history.append(rec)
        if callback is not None:
            callback(rec)
    return campaign
