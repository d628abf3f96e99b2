"""Closed-form correlation alignment: whiten with the source, recolor with the target."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FeatureBatch, _check_same_dim, check_spd, matrix_power
from .errors import DimensionError
from .metrics import dist_affine_invariant, dist_euclidean, dist_log_euclidean, div_jeffrey


@dataclass(frozen=True)
class AlignmentTransform:
    """Linear map ``A`` acting on row features as ``X @ A``."""

    matrix: np.ndarray
    gamma: float | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def aligned_covariance(self, c_s) -> np.ndarray:
        """``A^T C_S A``, the covariance of the transformed source."""
        out = self.matrix.T @ np.asarray(c_s) @ self.matrix
        return (out + out.T) / 2


def coral_transform(c_s, c_t, gamma: float | None = None) -> AlignmentTransform:
    """CORAL map ``A = C_S^{-1/2} C_T^{1/2}`` between two regularized covariances.

    Both inputs must already be full-rank SPD (add ``gamma I`` beforehand,
    e.g. through :func:`~spdalign.core.batch_covariance`). ``gamma`` is only
    recorded on the returned transform.
    """
    c_s = check_spd(c_s, "C_S")
    c_t = check_spd(c_t, "C_T")
    _check_same_dim(c_s, c_t)
    a = matrix_power(c_s, -0.5) @ matrix_power(c_t, 0.5)
    return AlignmentTransform(a, gamma)


def apply_alignment(t: AlignmentTransform, batch: FeatureBatch) -> FeatureBatch:
    """Map every row through the transform; labels pass through unchanged."""
    if batch.dim != t.dim:
        raise DimensionError(f"batch dim {batch.dim} does not match transform dim {t.dim}")
    return FeatureBatch(batch.rows @ t.matrix, batch.labels)


REPORT_METRICS = {
    "euclidean": dist_euclidean,
    "logE": dist_log_euclidean,
    "affine": dist_affine_invariant,
    "jeffrey": div_jeffrey,
}


def verify_alignment(c_s, c_t, t: AlignmentTransform) -> dict:
    """Dissimilarities between source and target covariances before and after alignment."""
    c_s = check_spd(c_s, "C_S")
    c_t = check_spd(c_t, "C_T")
    aligned = t.aligned_covariance(c_s)
    return {
        "before": {name: fn(c_s, c_t) for name, fn in REPORT_METRICS.items()},
        "after": {name: fn(aligned, c_t) for name, fn in REPORT_METRICS.items()},
    }
