"""Finite feature maps ``phi`` with ``phi(x)^T phi(x') ~ k(x, x')``.

Four constructions are provided: random Fourier features, quasi-Monte
Carlo Fourier features (Halton), the analytic Mercer expansion of the SE
kernel under a Gaussian measure, and the Hilbert-space (Dirichlet
Laplacian) basis. The last two are tensor products in ``d > 1`` and are
only sensible for small ``d``.
"""
import heapq
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import DimensionMismatch
from .kernels import sample_frequencies, spectral_density_of
from .rng import as_generator

MAX_TENSOR_DIM = 3


def _points(X, d):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, d) if d > 1 else X.reshape(-1, 1)
    if X.shape[1] != d:
        raise DimensionMismatch(f"expected {d}-dimensional points, got {X.shape}")
    return X


class FeatureMap:
    """Base class. Subclasses implement ``__call__`` and ``grad``."""

    kind = None
    dim = None
    n_features = None

    def __call__(self, X):
        raise NotImplementedError

    def grad(self, x):
        """Jacobian of ``phi`` at a single point, shape ``(n_features, d)``."""
        raise NotImplementedError

    def gram(self, X, X2=None):
        P = self(X)
        return P @ (P if X2 is None else self(X2)).T


@dataclass(frozen=True, eq=False)
class FourierFeatures(FeatureMap):
    """``phi_k(x) = sqrt(2 sigma_f^2 / m) cos(omega_k^T x + b_k)``."""

    omega: np.ndarray
    phase: np.ndarray
    sigma_f: float
    kind: str = "RFF"

    @property
    def dim(self):
        return self.omega.shape[1]

    @property
    def n_features(self):
        return self.omega.shape[0]

    @property
    def amplitude(self):
        return np.sqrt(2.0 * self.sigma_f ** 2 / self.n_features)

    def __call__(self, X):
        X = _points(X, self.dim)
        return self.amplitude * np.cos(X @ self.omega.T + self.phase)

    def apply_single(self, X, W):
        """``phi(X) @ W`` with the cosines taken in float32.

        Phases are formed in float64; the result carries a relative error
        near 1e-6, which is harmless for ranking candidates and about four
        times cheaper than the float64 cosine.
        """
        X = _points(X, self.dim)
        arg = X @ self.omega.T
        arg += self.phase
        c = np.cos(arg.astype(np.float32))
        out = c @ np.asarray(W, dtype=np.float32)
        return self.amplitude * out.astype(np.float64)

    def grad(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        s = np.sin(self.omega @ x + self.phase)
        return -self.amplitude * s[:, None] * self.omega


def build_rff(spec, n_features, rng):
    """Random Fourier features with frequencies from the kernel's spectral density."""
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    rng = as_generator(rng)
    omega = sample_frequencies(spectral_density_of(spec), n_features, rng)
    phase = rng.uniform(0.0, 2.0 * np.pi, n_features)
    return FourierFeatures(omega, phase, spec.sigma_f, "RFF")


def halton_points(dim, n):
    """Unscrambled Halton points skipping the origin, so the first row is 1/2's."""
    eng = qmc.Halton(d=dim, scramble=False)
    eng.fast_forward(1)
    return eng.random(n)


def build_qmc(spec, n_features):
    """Deterministic Fourier features from a Halton sequence.

    Columns ``0..d-1`` give frequencies by inverse CDF, a Student-t kernel
    uses one more column for the chi-square mixing variable, and the last
    column sets the phase ``b = 2 pi t``.
    """
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    sd = spectral_density_of(spec)
    extra = 1 if sd.kind == "student_t" else 0
    T = halton_points(spec.dim + extra + 1, n_features)
    omega = sd.ppf(T[:, :-1])
    return FourierFeatures(omega, 2.0 * np.pi * T[:, -1], spec.sigma_f, "QMC")


def _top_multi_indices(weights_1d, n):
    """The ``n`` multi-indices with the largest product of per-axis weights.

    Each entry of ``weights_1d`` must be non-increasing, which makes a
    best-first search exact.
    """
    d = len(weights_1d)
    logw = [np.log(np.maximum(w, 1e-300)) for w in weights_1d]
    start = (0,) * d
    heap = [(-sum(lw[0] for lw in logw), start)]
    seen = {start}
    out = []
    while heap and len(out) < n:
        negv, idx = heapq.heappop(heap)
        out.append(idx)
        for ax in range(d):
            nxt = list(idx)
            nxt[ax] += 1
            nxt = tuple(nxt)
            if nxt[ax] < len(logw[ax]) and nxt not in seen:
                seen.add(nxt)
                heapq.heappush(heap, (-sum(logw[a][nxt[a]] for a in range(d)), nxt))
    return np.array(out, dtype=int)


class _TensorMap(FeatureMap):
    """Product features ``prod_i f_{k_i}(x_i)`` over selected multi-indices."""

    def _axis(self, ax, x, deriv=False):
        raise NotImplementedError

    def __call__(self, X):
        X = _points(X, self.dim)
        out = self.coef[None, :] * np.ones((X.shape[0], 1))
        for ax in range(self.dim):
            out *= self._axis(ax, X[:, ax])[:, self.index[:, ax]]
        return out

    def grad(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        vals, ders = [], []
        for ax in range(self.dim):
            v, dv = self._axis(ax, x[ax:ax + 1], deriv=True)
            vals.append(v[0, self.index[:, ax]])
            ders.append(dv[0, self.index[:, ax]])
        J = np.empty((self.n_features, self.dim))
        for ax in range(self.dim):
            col = self.coef * ders[ax]
            for other in range(self.dim):
                if other != ax:
                    col = col * vals[other]
            J[:, ax] = col
        return J


def hermite_functions(t, n, log_prefactor=None, deriv=False):
    """Orthonormal Hermite functions ``h_0..h_{n-1}`` at ``t``, times ``exp(log_prefactor)``.

    The three-term recurrence runs on rescaled values with a running log
    scale so that extreme prefactors neither overflow nor underflow
    before they are needed. With ``deriv`` the derivative with respect to
    ``t`` of the *unscaled* Hermite functions, times the same prefactor, is
    returned as well (one extra order is computed for it).
    """
    t = np.asarray(t, dtype=float)
    m = n + 1 if deriv else n
    lp = -0.5 * t * t - 0.25 * np.log(np.pi)
    if log_prefactor is not None:
        lp = lp + log_prefactor
    H = np.empty((t.size, m))
    logs = lp.copy()
    prev = np.zeros_like(t)
    cur = np.ones_like(t)
    H[:, 0] = np.exp(logs)
    for k in range(m - 1):
        nxt = np.sqrt(2.0 / (k + 1)) * t * cur - np.sqrt(k / (k + 1.0)) * prev
        prev, cur = cur, nxt
        big = np.maximum(np.abs(prev), np.abs(cur))
        resc = (big > 1e150) | ((big < 1e-150) & (big > 0))
        if np.any(resc):
            s = big[resc]
            prev[resc] /= s
            cur[resc] /= s
            logs[resc] += np.log(s)
        H[:, k + 1] = cur * np.exp(logs)
    if not deriv:
        return H
    # h_k' = sqrt(k/2) h_{k-1} - sqrt((k+1)/2) h_{k+1}
    k = np.arange(n)
    D = -np.sqrt((k + 1) / 2.0) * H[:, 1:n + 1]
    D[:, 1:] += np.sqrt(k[1:] / 2.0) * H[:, :n - 1]
    return H[:, :n], D


class MercerSE(_TensorMap):
    """Mercer expansion of the SE kernel under the measure ``N(0, sigma^2)``.

    Per axis, with ``a = 1/(2 sigma^2)``, ``b = 1/(2 l^2)``,
    ``c = sqrt(a^2 + 4ab)`` and ``A = a/2 + b + c/2``::

        lambda_k = sqrt(a / A) * (b / A)**k
        psi_k(x) = (pi c / a)**(1/4) * h_k(sqrt(c) x) * exp(a x^2 / 2)

    where ``h_k`` are orthonormal Hermite functions.
    """

    kind = "MercerSE"

    def __init__(self, lengthscales, sigma_f, measure_scale, n_features, center=0.0):
        ell = np.atleast_1d(np.asarray(lengthscales, dtype=float))
        self.dim = ell.size
        if self.dim > MAX_TENSOR_DIM:
            raise DimensionMismatch(f"tensor-product maps support d <= {MAX_TENSOR_DIM}")
        sig = np.broadcast_to(np.asarray(measure_scale, dtype=float), ell.shape)
        self.center = np.broadcast_to(np.asarray(center, dtype=float), ell.shape).copy()
        self.sigma_f = float(sigma_f)
        self.a = 1.0 / (2.0 * sig ** 2)
        self.b = 1.0 / (2.0 * ell ** 2)
        self.c = np.sqrt(self.a ** 2 + 4.0 * self.a * self.b)
        self.A = 0.5 * self.a + self.b + 0.5 * self.c
        self.per_axis = n_features
        k = np.arange(n_features)
        lam = [np.sqrt(self.a[i] / self.A[i]) * (self.b[i] / self.A[i]) ** k for i in range(self.dim)]
        self.index = _top_multi_indices(lam, n_features)
        self.n_features = len(self.index)
        lam_sel = np.prod([lam[i][self.index[:, i]] for i in range(self.dim)], axis=0)
        self.eigenvalues = lam_sel
        self.coef = self.sigma_f * np.sqrt(lam_sel)

    def _axis(self, ax, x, deriv=False):
        a, c = self.a[ax], self.c[ax]
        u = x - self.center[ax]
        t = np.sqrt(c) * u
        norm = 0.25 * np.log(np.pi * c / a)
        lp = 0.5 * a * u * u + norm
        out = hermite_functions(t, self.per_axis, lp, deriv=deriv)
        if not deriv:
            return out
        H, D = out
        # d/du [exp(a u^2/2) h_k(sqrt(c) u)] = a u (.) + sqrt(c) exp(.) h_k'
        return H, a * u[:, None] * H + np.sqrt(c) * D


def build_mercer_se(lengthscales, sigma_f, measure_scale, n_features, center=0.0):
    return MercerSE(lengthscales, sigma_f, measure_scale, n_features, center)


class HilbertDirichlet(_TensorMap):
    """Laplacian eigenbasis on ``(-L, L)^d`` with Dirichlet boundaries.

    ``phi_k = sqrt(S(sqrt(lambda_k))) psi_k`` where ``S`` is the kernel's
    spectral density and ``psi_k(x) = L^{-1/2} sin(pi k (x + L) / (2 L))``.
    """

    kind = "HilbertDirichlet"

    def __init__(self, spec, halfwidth, n_features, center=0.0):
        self.dim = spec.dim
        if self.dim > MAX_TENSOR_DIM:
            raise DimensionMismatch(f"tensor-product maps support d <= {MAX_TENSOR_DIM}")
        self.L = np.broadcast_to(np.asarray(halfwidth, dtype=float), (self.dim,)).copy()
        self.center = np.broadcast_to(np.asarray(center, dtype=float), (self.dim,)).copy()
        self.sigma_f = spec.sigma_f
        self.per_axis = n_features
        j = np.arange(1, n_features + 1)
        sqrt_lam = [np.pi * j / (2.0 * self.L[i]) for i in range(self.dim)]
        sd = spectral_density_of(spec)
        # per-axis ranking by the spectral density along the axis; exact for
        # the SE kernel (separable) and a close proxy for Matern
        weights = []
        for i in range(self.dim):
            w = np.zeros((n_features, self.dim))
            w[:, i] = sqrt_lam[i]
            weights.append(sd.value(w))
        self.index = _top_multi_indices(weights, n_features)
        self.n_features = len(self.index)
        omega = np.column_stack([sqrt_lam[i][self.index[:, i]] for i in range(self.dim)])
        self.sqrt_eigenvalues = omega
        self.coef = np.sqrt(sd.value(omega))

    def _axis(self, ax, x, deriv=False):
        L = self.L[ax]
        j = np.arange(1, self.per_axis + 1)
        arg = np.pi * np.outer(x - self.center[ax] + L, j) / (2.0 * L)
        v = np.sin(arg) / np.sqrt(L)
        if not deriv:
            return v
        return v, np.cos(arg) * (np.pi * j / (2.0 * L)) / np.sqrt(L)


def build_hilbert(spec, halfwidth, n_features, center=0.0):
    return HilbertDirichlet(spec, halfwidth, n_features, center)


def build_feature_map(kind, spec, n_features, rng=None, **kw):
    """Dispatch helper used by the samplers and the CLI."""
    kind = kind.upper()
    if kind == "RFF":
        return build_rff(spec, n_features, rng)
    if kind == "QMC":
        return build_qmc(spec, n_features)
    if kind in ("MERCER", "MERCERSE", "OE"):
        if spec.family != "SE":
            raise ValueError("the Mercer expansion is implemented for the SE kernel only")
        return build_mercer_se(spec.ell, spec.sigma_f, kw.get("measure_scale", 1.0),
                               n_features, kw.get("center", 0.0))
    if kind in ("HILBERT", "HILBERTDIRICHLET"):
        return build_hilbert(spec, kw.get("halfwidth", 1.0), n_features, kw.get("center", 0.0))
    raise ValueError(f"unknown feature map {kind!r}")
