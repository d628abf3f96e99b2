"""Hand-derived gradients of the alignment losses and a finite-difference checker.

The derivative of the matrix logarithm uses the Daleckii-Krein formula: for
``A = U diag(lam) U^T`` and a symmetric upstream ``G``,

    dL/dA = U (K * (U^T G U)) U^T,
    K_ij  = (log lam_i - log lam_j) / (lam_i - lam_j),   K_ii = 1 / lam_i.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import (
    EigenDecomposition,
    _check_same_dim,
    _rows_of,
    batch_covariance,
    check_spd,
    random_spd,
    spectral_function,
    sym_eig,
    symmetrize,
)
from .errors import DimensionError, NumericalError, ValidationError
from .metrics import LossValue, loss_coral, loss_log

DEGENERATE_RTOL = 1e-10
FD_STEP = 1e-4
GRAD_CHECK_THRESHOLDS = {"coral": 1e-7, "log": 1e-5}


def loewner_log(values: np.ndarray) -> np.ndarray:
    """Divided differences of ``log`` on the given positive eigenvalues.

    Nearly coincident pairs (``|lam_i - lam_j| < 1e-10 max``) use the limit
    form ``2 / (lam_i + lam_j)``.
    """
    li = values[:, None]
    lj = values[None, :]
    diff = li - lj
    close = np.abs(diff) < DEGENERATE_RTOL * np.maximum(li, lj)
    safe = np.where(close, 1.0, diff)
    k = np.where(close, 2.0 / (li + lj), (np.log(li) - np.log(lj)) / safe)
    return k


def _grad_log_from_eig(eig: EigenDecomposition, upstream: np.ndarray) -> np.ndarray:
    u = eig.vectors
    g = (upstream + upstream.T) / 2
    inner = loewner_log(eig.values) * (u.T @ g @ u)
    out = u @ inner @ u.T
    return (out + out.T) / 2


def grad_matrix_log(a, upstream) -> np.ndarray:
    """Pull a gradient with respect to ``log(A)`` back to a gradient with respect to ``A``.

    Parameters
    ----------
    a : ndarray, shape (d, d)
        SPD matrix.
    upstream : ndarray, shape (d, d)
        ``dL/d log(A)``; symmetrized before use.
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    eig = sym_eig(a)
    if upstream.shape != eig.vectors.shape:
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match matrix {eig.vectors.shape}"
        )
    return _grad_log_from_eig(eig, upstream)


def grad_loss_coral_wrt_cov(c_s, c_t) -> np.ndarray:
    """``dL_coral / dC_S = (C_S - C_T) / (2 d^2)``; the ``C_T`` gradient is its negation."""
    c_s = np.asarray(c_s, dtype=np.float64)
    c_t = np.asarray(c_t, dtype=np.float64)
    _check_same_dim(c_s, c_t)
    d = c_s.shape[0]
    return symmetrize(c_s - c_t) / (2 * d * d)


def grad_loss_log_wrt_cov(c_s, c_t) -> np.ndarray:
    """``dL_log / dC_S``. Use :func:`loss_log_and_grads` to get both sides at once."""
    return loss_log_and_grads(c_s, c_t)[1]


def loss_coral_and_grads(c_s, c_t) -> tuple[LossValue, np.ndarray, np.ndarray]:
    """CORAL loss with its gradients with respect to both covariances."""
    value = loss_coral(c_s, c_t)
    g = grad_loss_coral_wrt_cov(c_s, c_t)
    return value, g, -g


def loss_log_and_grads(c_s, c_t) -> tuple[LossValue, np.ndarray, np.ndarray]:
    """Log-Euclidean loss with its gradients with respect to both covariances.

    Each covariance is decomposed once and the decomposition is shared by
    the forward value and the backward pass.
    """
    c_s = check_spd(c_s, "C_S")
    c_t = check_spd(c_t, "C_T")
    _check_same_dim(c_s, c_t)
    d = c_s.shape[0]
    eig_s, eig_t = sym_eig(c_s), sym_eig(c_t)
    delta = spectral_function(eig_s, np.log) - spectral_function(eig_t, np.log)
    value = LossValue(float(np.sum(delta * delta)) / (4 * d * d), d)
    upstream = delta / (2 * d * d)
    return value, _grad_log_from_eig(eig_s, upstream), _grad_log_from_eig(eig_t, -upstream)


def grad_cov_wrt_features(batch, grad_cov) -> np.ndarray:
    """Chain a covariance gradient back to the feature rows.

    For ``C = Dc^T Dc / (L - 1) + gamma I`` the result is
    ``2 / (L - 1) * Dc @ sym(grad_cov)``. Columns sum to zero since ``Dc`` does.
    """
    rows = _rows_of(batch)
    grad_cov = np.asarray(grad_cov, dtype=np.float64)
    n, d = rows.shape
    if grad_cov.shape != (d, d):
        raise DimensionError(
            f"covariance gradient shape {grad_cov.shape} does not match feature dim {d}"
        )
    if n < 2:
        raise ValidationError("batch needs at least 2 rows")
    centered = rows - rows.mean(axis=0)
    return (2.0 / (n - 1)) * centered @ ((grad_cov + grad_cov.T) / 2)


def central_differences(f, point, h: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function, one entry at a time."""
    if h <= 0:
        raise ValidationError(f"step must be positive, got {h}")
    point = np.array(point, dtype=np.float64)
    fd = np.empty_like(point)
    flat = point.reshape(-1)
    out = fd.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        fp = float(f(point))
        flat[k] = orig - h
        fm = float(f(point))
        flat[k] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError(f"non-finite function value at entry {k}")
        out[k] = (fp - fm) / (2 * h)
    return fd


def finite_diff_check(f, point, analytic, h: float = FD_STEP) -> float:
    """Max relative error between ``analytic`` and central differences of ``f``.

    Every entry of ``point`` is perturbed by ``+-h``; the error per entry is
    ``|fd - an| / max(1e-12, |fd|, |an|)``. Entries whose true derivative is
    close to zero dominate this measure; see :func:`gradient_errors`.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != np.shape(point):
        raise DimensionError(f"analytic shape {analytic.shape} != point shape {np.shape(point)}")
    fd = central_differences(f, point, h)
    denom = np.maximum(np.maximum(np.abs(fd), np.abs(analytic)), 1e-12)
    return float(np.max(np.abs(fd - analytic) / denom))


class GradientErrors(NamedTuple):
    entrywise: float
    scaled: float


def gradient_errors(f, point, analytic, h: float = FD_STEP) -> GradientErrors:
    """Entry-wise relative error and error relative to the largest gradient entry.

    ``scaled = max|fd - an| / max(1e-12, max|fd|, max|an|)`` does not blow
    up on near-zero entries, so it separates a wrong gradient from
    finite-difference noise.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != np.shape(point):
        raise DimensionError(f"analytic shape {analytic.shape} != point shape {np.shape(point)}")
    fd = central_differences(f, point, h)
    err = np.abs(fd - analytic)
    denom = np.maximum(np.maximum(np.abs(fd), np.abs(analytic)), 1e-12)
    scale = max(1e-12, float(np.abs(fd).max()), float(np.abs(analytic).max()))
    return GradientErrors(float(np.max(err / denom)), float(err.max() / scale))


def _loss_fn(loss: str):
    if loss == "coral":
        return loss_coral, loss_coral_and_grads
    if loss == "log":
        return loss_log, loss_log_and_grads
    raise ValidationError(f"unknown loss {loss!r}; expected 'coral' or 'log'")


def check_cov_gradient(loss: str, c_s, c_t, h: float = FD_STEP) -> GradientErrors:
    """Finite-difference check of the gradient with respect to ``C_S``.

    Perturbations are taken on the symmetric part, since both losses only
    see symmetric arguments.
    """
    value_fn, grad_fn = _loss_fn(loss)
    _, g_s, _ = grad_fn(c_s, c_t)
    return gradient_errors(lambda x: value_fn(symmetrize(x), c_t).value, c_s, g_s, h)


def check_feature_gradient(
    loss: str, rows, c_t, gamma: float = 1e-5, h: float = FD_STEP
) -> GradientErrors:
    """Finite-difference check of the gradient with respect to raw feature rows."""
    value_fn, grad_fn = _loss_fn(loss)
    rows = np.asarray(rows, dtype=np.float64)
    _, g_s, _ = grad_fn(batch_covariance(rows, gamma), c_t)
    analytic = grad_cov_wrt_features(rows, g_s)
    return gradient_errors(
        lambda x: value_fn(batch_covariance(x, gamma), c_t).value, rows, analytic, h
    )


def run_grad_check(
    loss: str = "log", dim: int = 8, trials: int = 100, seed: int = 0, h: float = FD_STEP
) -> float:
    """Max entry-wise relative gradient error over ``trials`` seeded random SPD pairs."""
    if dim < 2:
        raise ValidationError(f"dim must be at least 2, got {dim}")
    if trials < 1:
        raise ValidationError(f"trials must be positive, got {trials}")
    _loss_fn(loss)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        c_s = random_spd(dim, rng)
        c_t = random_spd(dim, rng)
        worst = max(worst, check_cov_gradient(loss, c_s, c_t, h).entrywise)
    return worst

