"""Dissimilarities between SPD matrices and the two covariance-alignment losses."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import _check_same_dim, _as_square, check_spd, matrix_log, sym_eig
from .errors import NumericalError

STEIN_CLAMP = 1e-12


class LossValue(NamedTuple):
    """A loss value together with the feature dimension used to normalize it."""

    value: float
    dim: int

    def __float__(self):
        return float(self.value)


def _pair(a, b, spd=True):
    if spd:
        a, b = check_spd(a, "A"), check_spd(b, "B")
    else:
        a, b = _as_square(a, "A"), _as_square(b, "B")
    _check_same_dim(a, b)
    return a, b


def dist_euclidean(a, b) -> float:
    r"""Frobenius distance :math:`\Vert A - B \Vert_F`."""
    a, b = _pair(a, b, spd=False)
    return float(np.linalg.norm(a - b, "fro"))


def dist_log_euclidean(a, b) -> float:
    r"""Log-Euclidean distance :math:`\Vert \log A - \log B \Vert_F`."""
    a, b = _pair(a, b)
    return float(np.linalg.norm(matrix_log(a) - matrix_log(b), "fro"))


def _inv_sqrt(b: np.ndarray) -> np.ndarray:
    eig = sym_eig(b)
    u = eig.vectors
    return (u / np.sqrt(eig.values)) @ u.T


def dist_affine_invariant(a, b) -> float:
    r"""Affine-invariant Riemannian distance.

    Computed as :math:`\sqrt{\sum_i \log^2 \hat\lambda_i}` where
    :math:`\hat\lambda_i` are the eigenvalues of the symmetric congruence
    :math:`B^{-1/2} A B^{-1/2}`. These coincide with the eigenvalues of the
    non-symmetric product :math:`A B^{-1}`, so the value equals
    :math:`\Vert \log(A B^{-1}) \Vert_F`.
    """
    a, b = _pair(a, b)
    w = _inv_sqrt(b)
    c = w @ a @ w
    lam = np.linalg.eigvalsh((c + c.T) / 2)
    if lam[0] <= 0:
        raise NumericalError(f"congruence lost positive definiteness (min eig {lam[0]:.3e})")
    return float(np.sqrt(np.sum(np.log(lam) ** 2)))


def div_jeffrey(a, b) -> float:
    r"""Jeffrey divergence :math:`\frac12 tr(A^{-1}B) + \frac12 tr(B^{-1}A) - n`.

    Symmetric and nonnegative, but it does not satisfy the triangle inequality.
    """
    a, b = _pair(a, b)
    n = a.shape[0]
    t1 = np.trace(np.linalg.solve(a, b))
    t2 = np.trace(np.linalg.solve(b, a))
    return float(max(0.5 * t1 + 0.5 * t2 - n, 0.0))


def _logdet(a: np.ndarray) -> float:
    l_factor = np.linalg.cholesky(a)
    return 2.0 * float(np.sum(np.log(np.diag(l_factor))))


def div_stein(a, b) -> float:
    r"""Stein divergence :math:`\sqrt{\log|\frac{A+B}{2}| - \frac12 \log|AB|}`.

    Log-determinants come from Cholesky factors, never from raw determinants.
    Radicands in ``[-1e-12, 0)`` are clamped to zero.
    """
    a, b = _pair(a, b)
    radicand = _logdet((a + b) / 2) - 0.5 * (_logdet(a) + _logdet(b))
    if radicand < -STEIN_CLAMP:
        raise NumericalError(f"negative Stein radicand {radicand:.3e}")
    return float(np.sqrt(max(radicand, 0.0)))


def loss_coral(c_s, c_t) -> LossValue:
    r"""Euclidean alignment loss :math:`\frac{1}{4d^2}\Vert C_S - C_T \Vert_F^2`."""
    d = np.shape(c_s)[0]
    return LossValue(dist_euclidean(c_s, c_t) ** 2 / (4 * d * d), d)


def loss_log(c_s, c_t) -> LossValue:
    r"""Log-Euclidean alignment loss :math:`\frac{1}{4d^2}\Vert \log C_S - \log C_T \Vert_F^2`."""
    d = np.shape(c_s)[0]
    return LossValue(dist_log_euclidean(c_s, c_t) ** 2 / (4 * d * d), d)


METRICS = {
    "euclidean": dist_euclidean,
    "logE": dist_log_euclidean,
    "affine": dist_affine_invariant,
    "jeffrey": div_jeffrey,
    "stein": div_stein,
}
