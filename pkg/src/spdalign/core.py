"""SPD matrices, symmetric eigendecomposition and spectral matrix functions.

SPD matrices are plain ``float64`` ndarrays of shape ``(n, n)``; :func:`check_spd`
validates one. Eigendecompositions carry a fixed eigenvector sign so that
repeated calls give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    DimensionError,
    InsufficientSamplesError,
    NotPositiveDefiniteError,
    NumericalError,
    ValidationError,
)

SYMMETRY_RTOL = 1e-12


class EigenDecomposition(NamedTuple):
    """Orthonormal eigenvectors (columns) and ascending eigenvalues."""

    vectors: np.ndarray
    values: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


@dataclass(frozen=True)
class FeatureBatch:
    """An ``L x d`` block of feature rows, optionally with integer labels."""

    rows: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise DimensionError(f"feature rows must be 2-D, got shape {rows.shape}")
        if rows.shape[0] < 2:
            raise InsufficientSamplesError(
                f"a feature batch needs at least 2 rows, got {rows.shape[0]}"
            )
        object.__setattr__(self, "rows", rows)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (rows.shape[0],):
                raise DimensionError(
                    f"expected {rows.shape[0]} labels, got shape {labels.shape}"
                )
            if labels.size and (
                not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0
            ):
                raise ValidationError("labels must be nonnegative integers")
            object.__setattr__(self, "labels", labels.astype(np.int64))

    @property
    def n_samples(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self):
        return self.n_samples

    def take(self, index) -> FeatureBatch:
        labels = None if self.labels is None else self.labels[index]
        return FeatureBatch(self.rows[index], labels)


def _as_square(m, name="matrix") -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


def _check_same_dim(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")


def symmetrize(m) -> np.ndarray:
    """Return the symmetric part ``(m + m.T) / 2`` of a square matrix."""
    m = _as_square(m)
    return (m + m.T) / 2


def check_symmetric(m, name="matrix") -> np.ndarray:
    m = _as_square(m, name)
    if not np.all(np.isfinite(m)):
        raise NumericalError(f"{name} has non-finite entries")
    tol = SYMMETRY_RTOL * np.maximum(1.0, np.abs(m))
    if np.any(np.abs(m - m.T) > tol):
        raise ValidationError(f"{name} is not symmetric")
    return m


def _eigh(m: np.ndarray) -> EigenDecomposition:
    try:
        values, vectors = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigensolver failed ({exc}); n={m.shape[0]}, "
            f"frobenius norm={np.linalg.norm(m):.3e}, "
            f"diag range=[{m.diagonal().min():.3e}, {m.diagonal().max():.3e}]"
        ) from exc
    # largest-magnitude entry of each eigenvector made positive
    pivots = np.abs(vectors).argmax(axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return EigenDecomposition(vectors * signs, values)


def check_spd(a, name="matrix") -> np.ndarray:
    """Validate an SPD matrix and return it as a float64 array.

    Raises
    ------
    ValidationError
        If ``a`` is not square or not symmetric to ``1e-12`` relative.
    NotPositiveDefiniteError
        If the smallest eigenvalue is not strictly positive.
    """
    a = check_symmetric(a, name)
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        lam_min = np.linalg.eigvalsh(a)[0]
        raise NotPositiveDefiniteError(
            f"{name} is not positive definite (smallest eigenvalue {lam_min:.3e})"
        ) from None
    return a


def sym_eig(a) -> EigenDecomposition:
    """Eigendecomposition of an SPD matrix with ascending positive eigenvalues.

    Each eigenvector is signed so that its largest-magnitude entry is
    positive, which makes the output deterministic.
    """
    a = check_symmetric(a)
    eig = _eigh(a)
    if eig.values[0] <= 0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (smallest eigenvalue {eig.values[0]:.3e}, "
            f"largest {eig.values[-1]:.3e})"
        )
    return eig


def spectral_function(eig: EigenDecomposition, f) -> np.ndarray:
    """Apply a scalar function to the eigenvalues: ``U f(L) U^T``."""
    u = eig.vectors
    out = (u * f(eig.values)) @ u.T
    return (out + out.T) / 2


def matrix_log(a) -> np.ndarray:
    """Principal matrix logarithm of an SPD matrix (symmetric, not SPD in general)."""
    return spectral_function(sym_eig(a), np.log)


def matrix_exp(s) -> np.ndarray:
    """Matrix exponential of a symmetric matrix; the result is SPD."""
    s = check_symmetric(s)
    return spectral_function(_eigh(s), np.exp)


def matrix_power(a, p: float) -> np.ndarray:
    """Real power ``a**p`` of an SPD matrix via its eigendecomposition."""
    return spectral_function(sym_eig(a), lambda lam: lam**p)


def _rows_of(batch) -> np.ndarray:
    if isinstance(batch, FeatureBatch):
        return batch.rows
    rows = np.asarray(batch, dtype=np.float64)
    if rows.ndim != 2:
        raise DimensionError(f"feature rows must be 2-D, got shape {rows.shape}")
    return rows


def batch_covariance(batch, gamma: float = 1e-5) -> np.ndarray:
    """Regularized sample covariance ``Dc^T Dc / (L - 1) + gamma I``.

    Parameters
    ----------
    batch : FeatureBatch or ndarray, shape (L, d)
        Feature rows; the per-column mean is removed first.
    gamma : float
        Nonnegative ridge added to the diagonal.

    Returns
    -------
    C : ndarray, shape (d, d)
        SPD covariance.

    Raises
    ------
    InsufficientSamplesError
        If ``L < 2``.
    NotPositiveDefiniteError
        If the result is singular, which can only happen for ``gamma == 0``.
    """
    rows = _rows_of(batch)
    if gamma < 0:
        raise ValidationError(f"gamma must be nonnegative, got {gamma}")
    n = rows.shape[0]
    if n < 2:
        raise InsufficientSamplesError(f"covariance needs at least 2 rows, got {n}")
    centered = rows - rows.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2
    cov[np.diag_indices_from(cov)] += gamma
    return check_spd(cov, "covariance")


def random_spd(n: int, rng: np.random.Generator) -> np.ndarray:
    """Well-conditioned random SPD matrix ``G^T G / n + 0.1 I``."""
    g = rng.standard_normal((n, n))
    a = g.T @ g / n + 0.1 * np.eye(n)
    return (a + a.T) / 2


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_spd_with_condition(n: int, cond: float, rng: np.random.Generator) -> np.ndarray:
    """Random SPD matrix whose eigenvalues span ``[1, cond]`` log-uniformly."""
    q = random_orthogonal(n, rng)
    lam = np.logspace(0.0, np.log10(cond), n)
    a = (q * lam) @ q.T
    return (a + a.T) / 2
