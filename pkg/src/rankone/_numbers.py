import math

SNAP = 1e-12


def ceil_snap(x: float) -> int:
    """``ceil`` that ignores relative floating noise below ``SNAP`` (4.0000000000000004 -> 4)."""
    n = round(x)
    if abs(x - n) <= SNAP * max(1.0, abs(x)):
        return int(n)
    return math.ceil(x)


def floor_snap(x: float) -> int:
    n = round(x)
    if abs(x - n) <= SNAP * max(1.0, abs(x)):
        return int(n)
    return math.floor(x)


def first_primes(k: int) -> list:
    out, n = [], 2
    while len(out) < k:
        if all(n % p for p in out if p * p <= n):
            out.append(n)
        n += 1
    return out
