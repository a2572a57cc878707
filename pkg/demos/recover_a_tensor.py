"""Recover a random rank-one function in each regime and report cost and error.

Run with ``python3 demos/recover_a_tensor.py``.
"""

import math

from rankone import Config, SmoothnessClass, approximate, sup_error_estimate
from rankone.recover import trial_function

EPS = 0.1

for r in (1, 2, 3):
    small, large = math.factorial(r), 2**r * math.factorial(r)
    for M in (small, (small + large) / 2, large):
        cls = SmoothnessClass(r, M, 2)
        f = trial_function(cls, EPS, seed=1, trial=0)
        approx, report = approximate(f, cls, EPS, Config())
        err = sup_error_estimate(f, approx)
        print(
            f"r={r} M={M:<5g} {report.regime.value:<8} |f|={f.sup_norm:.3f} "
            f"detector={report.detector_evals:>5}/{report.detector_size:<5} "
            f"interp={report.interpolation_evals:>4} error={err:.2e} (eps={EPS})"
        )
