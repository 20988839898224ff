"""Exact GP regression in normalized space.

Inputs live in ``[0, 1]^d`` (affine map from the problem bounds) and
outputs are z-scored. ``FittedGP`` is immutable; refitting returns a new
object.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import optimize
from scipy.linalg import lapack, solve_triangular
from scipy.stats import qmc

from .errors import DimensionMismatch, EmptyData, FitFailed, NotPositiveDefinite
from .gaussian import GaussianDist, cholesky, chol_solve
from .kernels import KernelSpec
from .rng import as_generator

LOG_L_BOUNDS = (np.log(1e-3), np.log(1e2))
LOG_SF_BOUNDS = (np.log(1e-3), np.log(1e3))
LOG_SN_BOUNDS = (np.log(1e-6), np.log(1.0))
LOG2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class Dataset:
    """Training data in model space plus the maps back to problem units."""

    X: np.ndarray
    y: np.ndarray
    lower: np.ndarray = None
    upper: np.ndarray = None
    y_mean: float = 0.0
    y_std: float = 1.0

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.size:
            raise DimensionMismatch(f"{X.shape[0]} inputs but {y.size} outputs")
        d = X.shape[1]
        lo = np.zeros(d) if self.lower is None else np.asarray(self.lower, dtype=float)
        hi = np.ones(d) if self.upper is None else np.asarray(self.upper, dtype=float)
        if lo.shape != (d,) or hi.shape != (d,) or np.any(hi <= lo) or not np.all(np.isfinite(hi - lo)):
            raise DimensionMismatch("bounds must be finite with lower < upper in every dimension")
        for k, v in dict(X=X, y=y, lower=lo, upper=hi).items():
            object.__setattr__(self, k, v)

    @classmethod
    def from_raw(cls, X, y, bounds=None, standardize=True):
        """Normalize raw inputs by ``bounds`` (d x 2) and z-score ``y``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size == 0:
            raise EmptyData("dataset has no rows")
        if bounds is None:
            lo, hi = np.zeros(X.shape[1]), np.ones(X.shape[1])
        else:
            b = np.asarray(bounds, dtype=float)
            lo, hi = b[:, 0], b[:, 1]
        mu, sd = 0.0, 1.0
        if standardize:
            mu = float(y.mean())
            sd = float(y.std())
            if not sd > 0:
                sd = 1.0
        return cls((X - lo) / (hi - lo), (y - mu) / sd, lo, hi, mu, sd)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def bounds(self):
        return np.column_stack([self.lower, self.upper])

    def to_unit(self, Xraw):
        return (np.atleast_2d(Xraw) - self.lower) / (self.upper - self.lower)

    def from_unit(self, U):
        return self.lower + np.atleast_2d(U) * (self.upper - self.lower)

    def y_to_model(self, y):
        return (np.asarray(y) - self.y_mean) / self.y_std

    def y_from_model(self, z):
        return self.y_mean + np.asarray(z) * self.y_std

    def append_raw(self, Xraw, yraw, restandardize=True):
        """New dataset with extra raw rows; outputs are re-z-scored."""
        X = np.vstack([self.from_unit(self.X), np.atleast_2d(Xraw)])
        y = np.concatenate([self.y_from_model(self.y), np.atleast_1d(yraw)])
        return Dataset.from_raw(X, y, self.bounds, standardize=restandardize)


def _lml_from_chol(L, alpha, y):
    return -0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * y.size * LOG2PI


def log_marginal_likelihood(data, kernel, sigma_n=None):
    """``log N(y | 0, K + sigma_n^2 I)`` evaluated through a Cholesky factor."""
    sn = kernel.sigma_n if sigma_n is None else sigma_n
    C = kernel.gram(data.X, noise=sn)
    L = cholesky(C)
    alpha = chol_solve(L, data.y)
    return float(_lml_from_chol(L, alpha, data.y))


def _neg_lml_and_grad(theta, X, y, family, sigma_n, fit_noise):
    if fit_noise:
        sigma_n = np.exp(theta[-1])
        theta = theta[:-1]
    spec = KernelSpec(family, np.exp(theta[0]), np.exp(theta[1:]), sigma_n)
    try:
        K, dK = spec.grad_theta(X)
        C = K.copy()
        C[np.diag_indices_from(C)] += sigma_n ** 2
        L = cholesky(C)
    except (NotPositiveDefinite, FloatingPointError, ValueError):
        return np.inf, np.zeros(theta.size + fit_noise)
    alpha = chol_solve(L, y)
    val = _lml_from_chol(L, alpha, y)
    Ci, info = lapack.dpotri(L, lower=1)
    if info != 0:
        return np.inf, np.zeros(theta.size + fit_noise)
    Ci = np.tril(Ci) + np.tril(Ci, -1).T
    W = np.outer(alpha, alpha) - Ci
    grad = [0.5 * np.sum(W * D) for D in dK]
    if fit_noise:
        grad.append(np.trace(W) * sigma_n ** 2)
    if not np.isfinite(val):
        return np.inf, np.zeros(len(grad))
    return -val, -np.asarray(grad)


@dataclass(frozen=True)
class FittedGP:
    """Conditioned GP: data, kernel and the factor of ``C = K + sigma_n^2 I``."""

    data: Dataset
    kernel: KernelSpec
    lml: float = field(default=np.nan, compare=False)

    @cached_property
    def chol(self):
        return cholesky(self.kernel.gram(self.data.X))

    @cached_property
    def alpha(self):
        return chol_solve(self.chol, self.data.y)

    @property
    def sigma_n(self):
        return self.kernel.sigma_n

    @property
    def dim(self):
        return self.data.dim

    def _q(self, Xq):
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if Xq.shape[1] != self.dim:
            raise DimensionMismatch(f"query dimension {Xq.shape[1]} != {self.dim}")
        return Xq

    def predict(self, Xq, full_cov=True):
        """Posterior over latent values at model-space queries ``Xq``."""
        Xq = self._q(Xq)
        Kq = self.kernel(self.data.X, Xq)
        mean = Kq.T @ self.alpha
        V = solve_triangular(self.chol, Kq, lower=True, check_finite=False)
        if full_cov:
            cov = self.kernel(Xq) - V.T @ V
            return GaussianDist(mean, 0.5 * (cov + cov.T))
        var = np.maximum(self.kernel.diag(Xq) - (V * V).sum(0), 0.0)
        return mean, var

    def predict_mean_var(self, Xq):
        return self.predict(Xq, full_cov=False)

    def mean_var_grad(self, x):
        """Mean, variance and their gradients at a single query point."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        k = self.kernel(self.data.X, x)[:, 0]
        G = self.kernel.grad_x(x[0], self.data.X)
        Cik = chol_solve(self.chol, k)
        mu = k @ self.alpha
        var = max(self.kernel.sigma_f ** 2 - k @ Cik, 0.0)
        return mu, var, G.T @ self.alpha, -2.0 * G.T @ Cik


def fit(data, family="SE", sigma_n=1e-3, restarts=10, rng=0, fit_noise=False,
        x0=None, maxiter=200):
    """Maximum-likelihood hyperparameters via multi-start L-BFGS-B.

    Starting points are a Latin hypercube over the log-space bounds, plus
    the optional warm start ``x0`` (a KernelSpec or log-parameter vector).
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = as_generator(rng)
    d = data.dim
    bounds = [LOG_SF_BOUNDS] + [LOG_L_BOUNDS] * d
    if fit_noise:
        bounds.append(LOG_SN_BOUNDS)
    lo, hi = np.array(bounds).T
    starts = qmc.scale(qmc.LatinHypercube(d=len(bounds), seed=rng).random(restarts), lo, hi)
    if x0 is not None:
        t0 = x0.theta() if isinstance(x0, KernelSpec) else np.asarray(x0, dtype=float)
        if fit_noise and t0.size == d + 1:
            t0 = np.append(t0, np.log(max(sigma_n, 1e-6)))
        starts = np.vstack([np.clip(t0, lo, hi), starts])

    args = (data.X, data.y, family, sigma_n, fit_noise)
    best_val, best_theta = np.inf, None
    for s in starts:
        try:
            res = optimize.minimize(_neg_lml_and_grad, s, args=args, jac=True,
                                    method="L-BFGS-B", bounds=bounds,
                                    options=dict(gtol=1e-8, maxiter=maxiter))
        except (ValueError, np.linalg.LinAlgError):
            continue
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val, best_theta = res.fun, res.x
    if best_theta is None:
        raise FitFailed("no restart produced a finite log marginal likelihood")
    sn = np.exp(best_theta[-1]) if fit_noise else sigma_n
    th = best_theta[:-1] if fit_noise else best_theta
    spec = KernelSpec(family, np.exp(th[0]), np.exp(th[1:]), sn)
    return FittedGP(data, spec, -best_val)


def condition_on(data, kernel):
    """FittedGP with fixed hyperparameters (no optimization)."""
    return FittedGP(data, kernel, log_marginal_likelihood(data, kernel))


@dataclass(frozen=True)
class WeightPosterior:
    mean: np.ndarray
    cov: np.ndarray

    @cached_property
    def chol(self):
        return cholesky(self.cov)

    def sample(self, rng, count=None):
        rng = as_generator(rng)
        n = 1 if count is None else count
        w = self.mean + rng.standard_normal((n, self.mean.size)) @ self.chol.T
        return w[0] if count is None else w


def weight_posterior(Phi, y, sigma_n, use_smw=False):
    """Gaussian posterior of the weights in ``y = Phi w + eps``, ``w ~ N(0, I)``.

    With ``use_smw`` the inverse is formed through the ``N x N`` system
    ``sigma_n^2 I + Phi Phi^T`` instead of the feature-space one.
    """
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if not sigma_n > 0:
        raise ValueError("sigma_n must be positive for the weight posterior")
    n, m = Phi.shape
    s2 = sigma_n ** 2
    if use_smw:
        G = Phi @ Phi.T
        G[np.diag_indices(n)] += s2
        L = cholesky(G)
        mean = Phi.T @ chol_solve(L, y)
        V = solve_triangular(L, Phi, lower=True, check_finite=False)
        cov = np.eye(m) - V.T @ V
    else:
        A = Phi.T @ Phi
        A[np.diag_indices(m)] += s2
        L = cholesky(A)
        mean = chol_solve(L, Phi.T @ y)
        Li = solve_triangular(L, np.eye(m), lower=True, check_finite=False)
        cov = s2 * (Li.T @ Li)
    return WeightPosterior(mean, 0.5 * (cov + cov.T))
