"""Finite-dimensional Gaussian sampling, conditioning and Matheron's rule."""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, NotPositiveDefinite
from .rng import as_generator

MAX_JITTER_RETRIES = 3


def cholesky(cov, jitter=0.0):
    """Lower Cholesky factor of ``cov + jitter*I`` with an escalating jitter ladder.

    The first attempt uses the requested jitter. On failure the jitter is
    raised to ``1e-10 * mean(diag(cov))`` (or the requested value if larger)
    and multiplied by 10 on each of at most three retries.

    Returns
    -------
    ndarray
        Lower-triangular ``L`` with exact zeros above the diagonal.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise DimensionMismatch(f"covariance must be square, got {cov.shape}")
    n = cov.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    scale = float(np.mean(np.diag(cov)))
    if not np.isfinite(scale):
        raise NotPositiveDefinite("covariance contains non-finite entries")
    base = max(1e-10 * abs(scale), 1e-300)
    ladder = [jitter] + [max(jitter, base) * 10.0**k for k in range(MAX_JITTER_RETRIES)]
    eye = np.eye(n)
    for jit in ladder:
        try:
            return linalg.cholesky(cov + jit * eye, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
    raise NotPositiveDefinite(f"factorization failed with jitter up to {ladder[-1]:.3g}")


def chol_solve(L, b):
    """Solve ``(L L^T) x = b`` given the lower factor."""
    return linalg.cho_solve((L, True), b, check_finite=False)


@dataclass(frozen=True)
class GaussianDist:
    """Multivariate normal ``N(mean, cov)`` with a lazily computed factor."""

    mean: np.ndarray
    cov: np.ndarray
    jitter: float = 0.0

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        c = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if c.shape != (m.size, m.size):
            raise DimensionMismatch(f"mean {m.shape} and cov {c.shape} disagree")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", c)

    @property
    def dim(self):
        return self.mean.size

    @cached_property
    def chol(self):
        return cholesky(self.cov, self.jitter)

    @property
    def var(self):
        return np.diag(self.cov).copy()

    def sample(self, count, rng):
        return sample_mvn(self, count, rng)


@dataclass(frozen=True)
class BlockGaussian:
    """Joint Gaussian split into an observed block 1 and a target block 2."""

    base: GaussianDist
    idx1: np.ndarray
    idx2: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.base.dim
        i1 = np.asarray(self.idx1, dtype=int).ravel()
        i2 = (np.setdiff1d(np.arange(n), i1) if self.idx2 is None
              else np.asarray(self.idx2, dtype=int).ravel())
        if i1.size + i2.size != n or np.intersect1d(i1, i2).size:
            raise DimensionMismatch("block indices must partition the joint")
        object.__setattr__(self, "idx1", i1)
        object.__setattr__(self, "idx2", i2)

    def blocks(self):
        m, S = self.base.mean, self.base.cov
        a, b = self.idx1, self.idx2
        return m[a], m[b], S[np.ix_(a, a)], S[np.ix_(a, b)], S[np.ix_(b, b)]


def sample_mvn(dist, count, rng):
    """Draw ``count`` rows ``m + L e`` with ``e ~ N(0, I)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = as_generator(rng)
    e = rng.standard_normal((count, dist.dim))
    return dist.mean + e @ dist.chol.T


def _gain(joint):
    m1, m2, S11, S12, S22 = joint.blocks()
    L11 = cholesky(S11, joint.base.jitter)
    # G = S21 S11^{-1}, stored transposed as S11^{-1} S12
    Gt = chol_solve(L11, S12)
    return m1, m2, S12, S22, Gt


def condition(joint, observed):
    """Conditional law of block 2 given block 1 equals ``observed``."""
    beta = np.atleast_1d(np.asarray(observed, dtype=float))
    if beta.size != joint.idx1.size:
        raise DimensionMismatch("observed value does not match block-1 size")
    m1, m2, S12, S22, Gt = _gain(joint)
    mean = m2 + Gt.T @ (beta - m1)
    cov = S22 - S12.T @ Gt
    cov = 0.5 * (cov + cov.T)
    return GaussianDist(mean, cov, joint.base.jitter)


def matheron_update(joint, observed, f1, f2):
    """Apply Matheron's rule to a given joint draw ``(f1, f2)``."""
    beta = np.atleast_1d(np.asarray(observed, dtype=float))
    if beta.size != joint.idx1.size:
        raise DimensionMismatch("observed value does not match block-1 size")
    _, _, _, _, Gt = _gain(joint)
    return f2 + (beta - f1) @ Gt


def matheron_conditional_sample(joint, observed, rng, count=None):
    """Conditional draw(s) of block 2 by updating joint prior draws.

    With ``count=None`` a single vector is returned, otherwise a
    ``(count, n2)`` matrix.
    """
    n = 1 if count is None else count
    F = sample_mvn(joint.base, n, rng)
    beta = np.atleast_1d(np.asarray(observed, dtype=float))
    if beta.size != joint.idx1.size:
        raise DimensionMismatch("observed value does not match block-1 size")
    _, _, _, _, Gt = _gain(joint)
    out = F[:, joint.idx2] + (beta - F[:, joint.idx1]) @ Gt
    return out[0] if count is None else out
