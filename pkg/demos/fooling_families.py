"""Show why too few points cannot work: a class member hides from every small point set.

Run with ``python3 demos/fooling_families.py``.
"""

import numpy as np

from rankone import SmoothnessClass, evade, fooling_family_large, fooling_family_moderate, fooling_family_small
from rankone.adversary import hitting_points, random_points, witnessed_error

rng = np.random.default_rng(3)

d = 5
fam = fooling_family_large(1, 2.0, d)
P = random_points(2**d - 1, d, rng)
k, err = witnessed_error(fam, P, SmoothnessClass(1, 2.0, d), 0.5)
print(f"Large, d={d}: {fam.size} members, {len(P)} random points, member {k} evades, error {err:.3f}")
print(f"  with one point per member: evading member = {evade(hitting_points(fam), fam)}")

for d in (4, 8, 16):
    fam = fooling_family_moderate(1, 1.5, d, 0.1)
    print(f"Moderate, d={d}: family size {fam.size}, guaranteed norm {fam.guaranteed_norm:.3f}")

d = 64
P = rng.random((int(np.log2(d)), d))
f = fooling_family_small(1, 1.0, d, P)
print(f"Small, d={d}: {len(P)} points, fooling norm {f.sup_norm:.3f}, values on points {f(P)}")
