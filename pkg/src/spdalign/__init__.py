"""Correlation alignment on the manifold of SPD matrices.

Matrix functions of SPD matrices, Euclidean / Log-Euclidean / affine-invariant
distances, Jeffrey and Stein divergences, closed-form CORAL, and the Euclidean
and Log-Euclidean alignment losses with their gradients.
"""

from .coral import AlignmentTransform, apply_alignment, coral_transform, verify_alignment
from .core import (
    EigenDecomposition,
    FeatureBatch,
    batch_covariance,
    check_spd,
    matrix_exp,
    matrix_log,
    matrix_power,
    random_spd,
    sym_eig,
    symmetrize,
)
from .errors import (
    DimensionError,
    InsufficientSamplesError,
    NotPositiveDefiniteError,
    NumericalError,
    SpdAlignError,
    ValidationError,
)
from .grad import (
    finite_diff_check,
    grad_cov_wrt_features,
    grad_loss_coral_wrt_cov,
    grad_loss_log_wrt_cov,
    grad_matrix_log,
)
from .metrics import (
    LossValue,
    dist_affine_invariant,
    dist_euclidean,
    dist_log_euclidean,
    div_jeffrey,
    div_stein,
    loss_coral,
    loss_log,
)

__version__ = "0.1.0"
