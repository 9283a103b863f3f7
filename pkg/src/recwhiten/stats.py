"""Second-order statistics and SPD linear algebra kernels.

Everything downstream (whitening stages, sub-corpus selection, PLDA) sits on
these four operations: shrunk moment estimation, Cholesky factorization, the
whitening matrix W = L^-1, and Gaussian log-density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COV_FLOOR = 1e-8


class NumericalError(ArithmeticError):
    """Numerical failure (non-SPD matrix, degenerate input)."""


@dataclass
class Moments:
    """Per-corpus mean and regularized covariance with sample count."""

    mean: np.ndarray
    cov: np.ndarray
    n: int
    corpus_id: str = ""

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise ValueError(f"cov shape {self.cov.shape} does not match dim {d}")
        if self.n < 1:
            raise ValueError("sample count must be >= 1")
        scale = max(np.abs(self.cov).max(), 1.0)
        if np.abs(self.cov - self.cov.T).max() > 1e-12 * scale:
            raise ValueError("covariance not symmetric")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def default_shrinkage(n: int, d: int) -> float:
    """Shrinkage weight used when the caller does not pin one: 0.1 in the
    small-sample regime (n <= 2d), 0 otherwise."""
    return 0.1 if n <= 2 * d else 0.0


def estimate_moments(vectors, corpus_id: str = "", shrinkage: float | None = None) -> Moments:
    """Sample mean and shrunk covariance of a stack of d-vectors.

    cov = S + (shrinkage * trace(S)/d + 1e-8) * I with S the unbiased (n-1)
    sample covariance, so the result is always SPD even for n <= d.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a 2-D (n, d) array of vectors")
    n, d = x.shape
    if n < 2:
        raise ValueError(f"need at least 2 vectors, got {n}")
    if shrinkage is None:
        shrinkage = default_shrinkage(n, d)
    if not 0.0 <= shrinkage < 1.0:
        raise ValueError(f"shrinkage must be in [0, 1), got {shrinkage}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / (n - 1)
    cov = 0.5 * (cov + cov.T)
    lam = shrinkage * np.trace(cov) / d + COV_FLOOR
    cov = cov + lam * np.eye(d)
    return Moments(mean, cov, n, corpus_id)


def cholesky_lower(m: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = m; raises NumericalError if not SPD."""
    m = np.asarray(m, dtype=float)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise NumericalError("matrix is not symmetric positive definite")


def whitening_matrix(m: Moments) -> np.ndarray:
    """W = L^-1 for cov = L L^T, so that W cov W^T = I."""
    chol = cholesky_lower(m.cov)
    return np.linalg.solve(chol, np.eye(m.dim))


def gaussian_loglik(m: Moments, v: np.ndarray) -> float:
    """Log-density of v under N(mean, cov); logdet taken off the Cholesky
    diagonal for conditioning."""
    v = np.asarray(v, dtype=float)
    if v.shape != m.mean.shape:
        raise ValueError(f"dimension mismatch: {v.shape} vs {m.mean.shape}")
    chol = cholesky_lower(m.cov)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    y = np.linalg.solve(chol, v - m.mean)
    maha = float(y @ y)
    d = m.dim
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + maha)


def gaussian_loglik_many(m: Moments, vectors: np.ndarray) -> np.ndarray:
    """Vectorized gaussian_loglik over the rows of an (n, d) array."""
    x = np.asarray(vectors, dtype=float)
    chol = cholesky_lower(m.cov)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    y = np.linalg.solve(chol, (x - m.mean).T)
    maha = np.einsum("ij,ij->j", y, y)
    d = m.dim
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + maha)
