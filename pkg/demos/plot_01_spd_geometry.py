"""
Distances between covariance matrices
=====================================

Covariances live on the cone of symmetric positive definite matrices.
Here we compare the flat Frobenius distance with the Log-Euclidean and
affine-invariant distances, plus the Jeffrey and Stein divergences.
"""

import numpy as np

from spdalign import matrix_exp, matrix_log, random_spd
from spdalign.metrics import METRICS

rng = np.random.default_rng(0)

# Two diagonal matrices first, where everything is easy to check by hand.
# log(diag(4, 1)) = diag(log 4, 0), so the Log-Euclidean distance to I is log 4.
a = np.diag([4.0, 1.0])
b = np.eye(2)
for name, fn in METRICS.items():
    print(f"{name:>9s}  {fn(a, b):.6f}")
print("log 4 =", np.log(4))

# The matrix log and exp are inverse to each other on SPD matrices.
c = random_spd(5, rng)
print("exp(log C) - C:", np.abs(matrix_exp(matrix_log(c)) - c).max())

# Scaling both matrices shifts log C by log(s) I, which cancels in the difference.
# The Frobenius distance on the other hand scales linearly with s.
c1, c2 = random_spd(5, rng), random_spd(5, rng)
for s in (1e-3, 1.0, 1e3):
    print(f"s={s:g}  euclidean={METRICS['euclidean'](s * c1, s * c2):.4g}"
          f"  logE={METRICS['logE'](s * c1, s * c2):.6f}")

# The affine-invariant distance does not move under any invertible congruence X C X^T
x = rng.standard_normal((5, 5)) + 2 * np.eye(5)
print("affine before", METRICS["affine"](c1, c2))
print("affine after ", METRICS["affine"](x @ c1 @ x.T, x @ c2 @ x.T))
