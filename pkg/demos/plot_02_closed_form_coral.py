"""
Closed-form correlation alignment
=================================

Whitening the source with C_S^{-1/2} and re-coloring with C_T^{1/2}
maps the source covariance exactly onto the target covariance.
"""

import numpy as np

from spdalign import FeatureBatch, batch_covariance
from spdalign.coral import apply_alignment, coral_transform, verify_alignment

rng = np.random.default_rng(1)

# Source features: isotropic-ish cloud. Target: a stretched and rotated copy.
source = FeatureBatch(rng.standard_normal((400, 4)))
mix = np.array([[2.0, 0.3, 0.0, 0.0],
                [0.0, 0.5, 0.4, 0.0],
                [0.0, 0.0, 1.0, 0.8],
                [0.1, 0.0, 0.0, 1.5]])
target = FeatureBatch(rng.standard_normal((400, 4)) @ mix)

gamma = 1e-5
c_s = batch_covariance(source, gamma)
c_t = batch_covariance(target, gamma)

t = coral_transform(c_s, c_t, gamma)
print("A =")
print(np.round(t.matrix, 3))

# The dissimilarities before and after alignment. "after" should be round-off.
report = verify_alignment(c_s, c_t, t)
for name in report["before"]:
    print(f"{name:>9s}  before {report['before'][name]:.4f}   after {report['after'][name]:.2e}")

# Applying A to the raw rows and re-estimating adds the ridge a second time,
# so cov(X A) = C_T + gamma (I - A^T A), not C_T exactly.
aligned = apply_alignment(t, source)
gap = batch_covariance(aligned, gamma) - c_t
print("re-estimated gap:", np.abs(gap).max())
print("predicted gap:   ", np.abs(gamma * (np.eye(4) - t.matrix.T @ t.matrix)).max())
