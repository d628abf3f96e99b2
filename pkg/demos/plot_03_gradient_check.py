"""
Checking the log-covariance gradient
====================================

The gradient of ||log C_S - log C_T||^2 passes through an eigendecomposition.
We compare the analytic gradient with central finite differences, first
w.r.t. the covariance, then end to end w.r.t. the raw feature rows.
"""

import numpy as np

from spdalign import random_spd
from spdalign.grad import check_cov_gradient, check_feature_gradient, run_grad_check

rng = np.random.default_rng(2)
c_s, c_t = random_spd(8, rng), random_spd(8, rng)

# Two error summaries. "entrywise" divides each entry's error by that entry's
# own size, so a gradient entry that happens to be ~0 inflates it.
# "scaled" divides the worst absolute error by the size of the whole gradient.
for loss in ("coral", "log"):
    err = check_cov_gradient(loss, c_s, c_t)
    print(f"{loss:>5s}  entrywise {err.entrywise:.2e}  scaled {err.scaled:.2e}")

# The finite-difference truncation error shrinks like h^2.
for h in (1e-2, 1e-3, 1e-4):
    print(f"h={h:g}  log scaled error {check_cov_gradient('log', c_s, c_t, h=h).scaled:.2e}")

# End to end through the covariance estimate of a 32-row batch
rows = rng.standard_normal((32, 8))
err = check_feature_gradient("log", rows, c_t)
print("features: entrywise", f"{err.entrywise:.2e}", "scaled", f"{err.scaled:.2e}")

# The same summary the command line grad-check reports (max entrywise error)
print("grad-check log, 20 trials:", f"{run_grad_check('log', dim=8, trials=20, seed=0):.2e}")
