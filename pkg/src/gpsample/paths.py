"""Posterior sample paths: weight-space (RFF) and pathwise conditioning.

A ``SamplePath`` may hold several paths at once (weights of shape
``(n_features, n_paths)``); evaluation then returns one column per path.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch
from .gaussian import chol_solve, cholesky, sample_mvn
from .regression import weight_posterior
from .rng import as_generator


@dataclass(frozen=True, eq=False)
class SamplePath:
    """``f(x) = phi(x)^T w + k(x, X)^T v`` (the second term only for PC paths)."""

    features: object
    weights: np.ndarray
    kind: str = "WeightSpace"
    X_train: np.ndarray = None
    update: np.ndarray = None
    kernel: object = None

    @property
    def dim(self):
        return self.features.dim

    @property
    def n_paths(self):
        return 1 if self.weights.ndim == 1 else self.weights.shape[1]

    def __call__(self, Xq, single=False):
        """Path values at ``Xq``; ``single`` evaluates Fourier features in float32."""
        Xq = np.asarray(Xq, dtype=float)
        if Xq.ndim == 1:
            Xq = Xq.reshape(-1, self.dim) if self.dim > 1 else Xq.reshape(-1, 1)
        if Xq.shape[1] != self.dim:
            raise DimensionMismatch(f"query dimension {Xq.shape[1]} != {self.dim}")
        # row blocks keep the feature matrix near 2^18 entries
        step = max(1, (1 << 18) // max(self.features.n_features, 1))
        if Xq.shape[0] > step:
            return np.concatenate([self(Xq[i:i + step], single)
                                   for i in range(0, Xq.shape[0], step)])
        if single and hasattr(self.features, "apply_single"):
            out = self.features.apply_single(Xq, self.weights)
        else:
            out = self.features(Xq) @ self.weights
        if self.update is not None:
            out = out + self.kernel(Xq, self.X_train) @ self.update
        return out

    def grad(self, x):
        """Gradient at one point: shape ``(d,)`` or ``(d, n_paths)``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise DimensionMismatch(f"expected a {self.dim}-vector")
        g = self.features.grad(x).T @ self.weights
        if self.update is not None:
            g = g + self.kernel.grad_x(x, self.X_train).T @ self.update
        return g

    def value_and_grad(self, x):
        return float(self(x[None, :])[0]), self.grad(x)

    def column(self, j):
        """The ``j``-th path of a batch as a single-path object."""
        if self.weights.ndim == 1:
            return self
        upd = None if self.update is None else self.update[:, j]
        return SamplePath(self.features, self.weights[:, j], self.kind,
                          self.X_train, upd, self.kernel)


def draw_weight_space_path(gp, fmap, rng, count=None, method="cholesky"):
    """Weight-space posterior path(s).

    ``method="cholesky"`` factors the feature-space posterior covariance;
    ``method="smw"`` draws the same law by Matheron's rule on the weights,
    which only needs an ``N x N`` factorization.
    """
    rng = as_generator(rng)
    n = 1 if count is None else count
    Phi = fmap(gp.data.X)
    sn = gp.sigma_n
    if method == "smw":
        w0 = rng.standard_normal((fmap.n_features, n))
        eps = sn * rng.standard_normal((gp.data.n, n))
        G = Phi @ Phi.T
        G[np.diag_indices_from(G)] += sn ** 2
        L = cholesky(G)
        W = w0 + Phi.T @ chol_solve(L, gp.data.y[:, None] - Phi @ w0 - eps)
    else:
        # w = mu + sigma_n L^-T z with L L^T = Phi^T Phi + sigma_n^2 I
        A = Phi.T @ Phi
        A[np.diag_indices_from(A)] += sn ** 2
        L = cholesky(A)
        mu = chol_solve(L, Phi.T @ gp.data.y)
        z = rng.standard_normal((fmap.n_features, n))
        W = mu[:, None] + sn * solve_triangular(L.T, z, lower=False, check_finite=False)
    W = W[:, 0] if count is None else W
    return SamplePath(fmap, W, "WeightSpace")


def draw_pathwise_path(gp, fmap, rng, count=None):
    """Pathwise-conditioned path(s).

    The prior path uses ``fmap``; the data update is exact:
    ``v = C^{-1} (y - f(X) - eps)``.
    """
    rng = as_generator(rng)
    n = 1 if count is None else count
    W = rng.standard_normal((fmap.n_features, n))
    f = fmap(gp.data.X) @ W
    eps = gp.sigma_n * rng.standard_normal((gp.data.n, n))
    V = chol_solve(gp.chol, gp.data.y[:, None] - f - eps)
    if count is None:
        W, V = W[:, 0], V[:, 0]
    return SamplePath(fmap, W, "Pathwise", gp.data.X, V, gp.kernel)


def draw_path(gp, fmap, rng, sampler="PC", count=None):
    sampler = sampler.upper()
    if sampler in ("PC", "PATHWISE", "TS_PC"):
        return draw_pathwise_path(gp, fmap, rng, count)
    if sampler in ("RFF", "WEIGHTSPACE", "TS_RFF"):
        return draw_weight_space_path(gp, fmap, rng, count)
    raise ValueError(f"unknown sampler {sampler!r}")


def exhaustive_sample(gp, Xq, count, rng):
    """Joint draws of the posterior at ``Xq`` through its Cholesky factor."""
    return sample_mvn(gp.predict(Xq), count, rng)


def weight_space_moments(gp, fmap, Xq):
    """Mean and covariance at ``Xq`` of weight-space paths for a fixed ``fmap``."""
    wp = weight_posterior(fmap(gp.data.X), gp.data.y, gp.sigma_n)
    Pq = fmap(Xq)
    return Pq @ wp.mean, Pq @ wp.cov @ Pq.T


def pathwise_moments(gp, fmap, Xq):
    """Mean and covariance at ``Xq`` of pathwise paths for a fixed ``fmap``.

    Conditional on the features the path is Gaussian with mean
    ``K_qX C^-1 y`` and covariance ``B B^T + sigma_n^2 K_qX C^-2 K_Xq`` where
    ``B = Phi_q - K_qX C^-1 Phi_X``.
    """
    Kq = gp.kernel(Xq, gp.data.X)
    mean = Kq @ gp.alpha
    G = chol_solve(gp.chol, Kq.T).T          # K_qX C^-1
    B = fmap(Xq) - G @ fmap(gp.data.X)
    cov = B @ B.T + gp.sigma_n ** 2 * (G @ G.T)
    return mean, cov


def psd_sqrt(S):
    """Symmetric square root with negative eigenvalues clipped to zero."""
    w, U = np.linalg.eigh(0.5 * (S + S.T))
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


def wasserstein2(exact, approx_mean, approx_cov, exact_sqrt=None):
    """2-Wasserstein distance between two Gaussians.

    ``exact`` is a ``GaussianDist``; square roots come from symmetric
    eigendecompositions with negative eigenvalues clipped to zero.
    ``exact_sqrt`` may supply a cached square root of ``exact.cov``.
    """
    m1 = exact.mean
    K1 = exact.cov
    m2 = np.asarray(approx_mean, dtype=float).reshape(-1)
    K2 = np.atleast_2d(np.asarray(approx_cov, dtype=float))
    if m2.shape != m1.shape or K2.shape != K1.shape:
        raise DimensionMismatch("distributions must have equal dimensions")
    S = psd_sqrt(K1) if exact_sqrt is None else exact_sqrt
    M = S @ K2 @ S
    cross = np.sqrt(np.clip(np.linalg.eigvalsh(0.5 * (M + M.T)), 0.0, None)).sum()
    d2 = np.sum((m1 - m2) ** 2) + np.trace(K1) + np.trace(K2) - 2.0 * cross
    return float(np.sqrt(max(d2, 0.0)))


__all__ = [
    "SamplePath", "draw_weight_space_path", "draw_pathwise_path", "draw_path",
    "exhaustive_sample", "weight_space_moments", "pathwise_moments", "psd_sqrt", "wasserstein2",
]
