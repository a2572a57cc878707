"""Print how the cost bounds scale with accuracy and dimension in each regime.

Large: polynomial in 1/eps but exponential in d.  Moderate: quasi-polynomial.
Small: quadratic in d.  Run with ``python3 demos/cost_shapes.py``.
"""

import math

from rankone import SmoothnessClass, classify_tractability, cost_bound
from rankone.detectors import detector_cardinality

print("dimension sweep at eps=0.1")
print(f"{'d':>3} {'Large':>12} {'Moderate':>12} {'Small':>12}")
for d in (1, 2, 4, 8, 16):
    row = [cost_bound(SmoothnessClass(1, M, d), 0.1) for M in (2.0, 1.5, 1.0)]
    print(f"{d:>3} " + " ".join(f"{b:12.4g}" for b in row))

print("\naccuracy sweep for the Large regime, r=2, d=2 (formula-mode detector)")
cls = SmoothnessClass(2, 8.0, 2)
for k in range(2, 11, 2):
    eps = 2.0**-k
    print(f"eps=2^-{k:<2} bound={cost_bound(cls, eps):10.4g} |P|={detector_cardinality(cls, eps, 'formula')}")

print("\ntractability by (r, M)")
for r in (1, 2, 3):
    f = math.factorial(r)
    print(r, [classify_tractability(r, M).value for M in (f, 1.5 * f, 2**r * f)])
