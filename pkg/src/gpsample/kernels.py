"""Stationary covariance functions: SE and Matern 3/2, 5/2.

All kernels are anisotropic. Written in terms of the scaled distance
``r = ||(x - x') / l||`` each family is ``sigma_f**2 * g(r)``. Derivatives
use ``h(r) = g'(r) / r``, which stays finite at ``r = 0``.
"""
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DimensionMismatch
from .rng import as_generator

FAMILIES = ("SE", "Matern32", "Matern52")
_NU = {"Matern32": 1.5, "Matern52": 2.5}
_ALIASES = {"se": "SE", "rbf": "SE", "matern32": "Matern32", "matern52": "Matern52"}

SQ3 = np.sqrt(3.0)
SQ5 = np.sqrt(5.0)


def _g(family, r):
    if family == "SE":
        return np.exp(-0.5 * r * r)
    if family == "Matern32":
        return (1.0 + SQ3 * r) * np.exp(-SQ3 * r)
    return (1.0 + SQ5 * r + 5.0 / 3.0 * r * r) * np.exp(-SQ5 * r)


def _h(family, r):
    if family == "SE":
        return -np.exp(-0.5 * r * r)
    if family == "Matern32":
        return -3.0 * np.exp(-SQ3 * r)
    return -5.0 / 3.0 * (1.0 + SQ5 * r) * np.exp(-SQ5 * r)


def canonical_family(name):
    fam = _ALIASES.get(str(name).lower().replace("_", "").replace("-", "").replace("/", ""))
    if fam is None:
        raise ValueError(f"unknown kernel family {name!r}; expected one of {FAMILIES}")
    return fam


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family with output scale, lengthscales and observation noise."""

    family: str
    sigma_f: float
    lengthscales: tuple
    sigma_n: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", canonical_family(self.family))
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "sigma_f", float(self.sigma_f))
        object.__setattr__(self, "sigma_n", float(self.sigma_n))
        if not self.sigma_f > 0:
            raise ValueError("sigma_f must be positive")
        if len(ls) < 1 or min(ls) <= 0:
            raise ValueError("lengthscales must be positive")
        if self.sigma_n < 0:
            raise ValueError("sigma_n must be non-negative")

    @property
    def dim(self):
        return len(self.lengthscales)

    @property
    def ell(self):
        return np.asarray(self.lengthscales)

    @property
    def nu(self):
        return _NU.get(self.family)

    # --- log-space parameter vector [log sigma_f, log l_1..l_d] ---
    def theta(self):
        return np.concatenate([[np.log(self.sigma_f)], np.log(self.ell)])

    def with_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        return KernelSpec(self.family, np.exp(theta[0]), np.exp(theta[1:]), self.sigma_n)

    def replace(self, **kw):
        d = dict(family=self.family, sigma_f=self.sigma_f,
                 lengthscales=self.lengthscales, sigma_n=self.sigma_n)
        d.update(kw)
        return KernelSpec(**d)

    # --- serialization ---
    def to_dict(self):
        return {"family": self.family, "sigma_f": self.sigma_f,
                "lengthscales": list(self.lengthscales), "sigma_n": self.sigma_n}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], d["sigma_f"], d["lengthscales"], d.get("sigma_n", 0.0))

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))

    # --- evaluation ---
    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.dim) if self.dim > 1 or X.size != 1 else X.reshape(1, 1)
        if X.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected {self.dim}-dimensional points, got {X.shape}")
        return X

    def scaled_sqdist(self, X, X2):
        A = self._check(X) / self.ell
        B = self._check(X2) / self.ell
        d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return np.maximum(d2, 0.0)

    def __call__(self, X, X2=None):
        """Cross-covariance matrix ``K(X, X2)`` without noise."""
        X2 = X if X2 is None else X2
        r2 = self.scaled_sqdist(X, X2)
        if self.family == "SE":
            return self.sigma_f ** 2 * np.exp(-0.5 * r2)
        return self.sigma_f ** 2 * _g(self.family, np.sqrt(r2))

    def gram(self, X, X2=None, noise=None):
        """Gram matrix; noise ``sigma_n**2`` is added only for a self-gram."""
        if X2 is None:
            K = self(X)
            s = self.sigma_n if noise is None else noise
            K[np.diag_indices_from(K)] += s * s
            return K
        return self(X, X2)

    def diag(self, X):
        return np.full(self._check(X).shape[0], self.sigma_f ** 2)

    def grad_x(self, x, X2):
        """Derivative of ``k(x, x2_j)`` with respect to ``x``; shape ``(m, d)``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise DimensionMismatch(f"expected a {self.dim}-vector")
        X2 = self._check(X2)
        delta = x[None, :] - X2
        r = np.sqrt(((delta / self.ell) ** 2).sum(1))
        coef = self.sigma_f ** 2 * _h(self.family, r)
        return coef[:, None] * delta / self.ell ** 2

    def grad_theta(self, X):
        """Derivatives of ``K(X, X)`` w.r.t. ``[log sigma_f, log l_i]``."""
        X = self._check(X) / self.ell
        D2 = [np.square(X[:, i:i + 1] - X[:, i:i + 1].T) for i in range(self.dim)]
        r2 = sum(D2)
        s2 = self.sigma_f ** 2
        if self.family == "SE":
            K = s2 * np.exp(-0.5 * r2)
            H = -K
        else:
            r = np.sqrt(r2)
            K = s2 * _g(self.family, r)
            H = s2 * _h(self.family, r)
        return K, [2.0 * K] + [-H * D for D in D2]

    # --- spectral side ---
    def spectral_density(self):
        return spectral_density_of(self)


def kernel_eval(spec, x, x2):
    """Scalar kernel value for two points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.size != spec.dim or x2.size != spec.dim:
        raise DimensionMismatch("point dimension does not match the kernel")
    r = np.sqrt(np.sum(((x - x2) / spec.ell) ** 2))
    return float(spec.sigma_f ** 2 * _g(spec.family, r))


@dataclass(frozen=True)
class SpectralDensity:
    """Normalized spectral density ``p(omega)`` of a stationary kernel.

    ``kind`` is ``"gaussian"`` (SE) or ``"student_t"`` (Matern). ``scale``
    holds the diagonal ``l**-2``; ``dof`` is ``2*nu`` for Student-t.
    """

    kind: str
    scale: np.ndarray
    dof: float = None
    sigma_f: float = 1.0

    @property
    def dim(self):
        return self.scale.size

    def sample(self, count, rng):
        return sample_frequencies(self, count, rng)

    def ppf(self, U):
        """Map uniforms of shape ``(n, d)`` (Gaussian) or ``(n, d+1)`` (Student-t).

        For Student-t the last column drives the chi-square mixing variable.
        """
        from scipy import stats
        U = np.asarray(U, dtype=float)
        sd = np.sqrt(self.scale)
        z = stats.norm.ppf(U[:, :self.dim])
        if self.kind == "gaussian":
            return z * sd
        chi = stats.chi2.ppf(U[:, self.dim], self.dof)
        return z * sd / np.sqrt(chi / self.dof)[:, None]

    def value(self, omega):
        """Unnormalized spectral density ``S(omega)`` so that
        ``k(tau) = (2 pi)^-d * int S(omega) exp(i omega tau) d omega``."""
        omega = np.atleast_2d(np.asarray(omega, dtype=float))
        ell = 1.0 / np.sqrt(self.scale)
        d = self.dim
        r2 = ((omega * ell) ** 2).sum(1)
        if self.kind == "gaussian":
            log_s0 = 0.5 * d * np.log(2 * np.pi) - 0.5 * r2
        else:
            nu = 0.5 * self.dof
            log_s0 = (d * np.log(2 * np.sqrt(np.pi)) + gammaln(nu + 0.5 * d) - gammaln(nu)
                      + nu * np.log(2 * nu) - (nu + 0.5 * d) * np.log(2 * nu + r2))
        return self.sigma_f ** 2 * np.prod(ell) * np.exp(log_s0)


def spectral_density_of(spec):
    scale = spec.ell ** -2.0
    if spec.family == "SE":
        return SpectralDensity("gaussian", scale, None, spec.sigma_f)
    return SpectralDensity("student_t", scale, 2.0 * spec.nu, spec.sigma_f)


def sample_frequencies(sd, count, rng):
    """I.i.d. frequencies; Student-t via a Gaussian / chi-square mixture."""
    rng = as_generator(rng)
    z = rng.standard_normal((count, sd.dim)) * np.sqrt(sd.scale)
    if sd.kind == "gaussian":
        return z
    w = rng.chisquare(sd.dof, size=count) / sd.dof
    return z / np.sqrt(w)[:, None]
