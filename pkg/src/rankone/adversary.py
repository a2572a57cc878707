"""Fooling functions behind the lower bounds.

Each family consists of class members with pairwise disjoint supports, so a
point is non-zero for at most one member.  An algorithm that sees only zeros
on ``n`` points, with ``n`` below the family size, misses some member ``f``
entirely.  It cannot tell ``f``, ``-f`` and ``0`` apart, so it errs by at
least ``|f|``.
"""

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .detectors import largest_power_above
from .errors import DomainError, UsageError
from .pointsets import PointSet
from .tensor_model import RankOneFunction, Regime, SmoothnessClass, UnivariateFactor, constant_factor, regime_of


class Tractability(str, enum.Enum):
    CURSE = "Curse"
    QUASI_POLYNOMIAL = "QuasiPolynomial"
    POLYNOMIAL = "Polynomial"


def classify_tractability(r: int, M: float) -> Tractability:
    """Curse for ``M >= 2^r r!``, polynomial for ``M <= r!``, quasi-polynomial in between."""
    if r < 1 or not M > 0:
        raise UsageError("need r >= 1 and M > 0")
    return {
        Regime.LARGE: Tractability.CURSE,
        Regime.MODERATE: Tractability.QUASI_POLYNOMIAL,
        Regime.SMALL: Tractability.POLYNOMIAL,
    }[regime_of(r, M)]


@dataclass(frozen=True)
class FoolingFamily:
    """Lazily enumerated members with disjoint supports.

    Attributes
    ----------
    member : callable
        ``index -> RankOneFunction``.
    owner : callable
        ``point -> index`` of the only member that can be non-zero there, or
        ``None`` when every member vanishes at the point.
    """

    regime: Regime
    d: int
    size: int
    guaranteed_norm: float
    member: Callable
    owner: Callable
    info: tuple = ()

    def __len__(self) -> int:
        return self.size

    def members(self):
        for k in range(self.size):
            yield self.member(k)


def _split_factor(r: int, coef: float, cut: float, side: str) -> UnivariateFactor:
    """``coef (x - cut)^r`` on one side of ``cut`` and zero on the other."""
    zero = np.zeros(r + 1)
    if side == "left":
        # local variable t = x on [0, cut]
        rows = [coef * np.polynomial.polynomial.polypow([-cut, 1.0], r), zero]
    else:
        rows = [zero, coef * np.eye(r + 1)[r]]
    return UnivariateFactor([0.0, cut, 1.0], np.array(rows), r)


def fooling_family_large(r: int, M: float, d: int) -> FoolingFamily:
    """``2^d`` products of ``g = 2^r (x - 1/2)^r`` on ``[0, 1/2]`` and ``h`` its mirror on ``[1/2, 1]``.

    Member ``b`` takes ``h`` on coordinate ``i`` iff bit ``d - 1 - i`` of
    ``b`` is set (coordinate 1 is the most significant bit).  Every member
    has norm 1 and ``r``-th derivative ``2^r r!``.
    """
    if regime_of(r, M) != Regime.LARGE:
        raise DomainError(f"the Large family needs M >= 2^r r! = {2**r * math.factorial(r)}, got M={M}")
    g = _split_factor(r, 2.0**r, 0.5, "left")
    h = _split_factor(r, 2.0**r, 0.5, "right")

    def member(b: int) -> RankOneFunction:
        if not 0 <= b < 2**d:
            raise UsageError(f"member index {b} out of range")
        return RankOneFunction([h if (b >> (d - 1 - i)) & 1 else g for i in range(d)])

    def owner(x) -> Optional[int]:
        x = np.asarray(x, dtype=float)
        if np.any(x == 0.5):
            return None
        return int(sum(1 << (d - 1 - i) for i in range(d) if x[i] > 0.5))

    return FoolingFamily(Regime.LARGE, d, 2**d, 1.0, member, owner, (("g", g), ("h", h)))


def colex_unrank(index: int, d: int, k: int) -> tuple:
    """``index``-th ``k``-subset of ``{0, .., d-1}`` in colexicographic order."""
    out = []
    for i in range(k, 0, -1):
        c = i - 1
        while math.comb(c + 1, i) <= index:
            c += 1
        out.append(c)
        index -= math.comb(c, i)
    return tuple(sorted(out))


def colex_rank(subset) -> int:
    return sum(math.comb(c, i + 1) for i, c in enumerate(sorted(subset)))


def moderate_kink(r: int, M: float) -> float:
    """``x0 = (r!/M)^(1/r)``, where ``M (x - x0)^r / r!`` reaches 1 at ``x = 0``."""
    return (math.factorial(r) / M) ** (1.0 / r)


def fooling_family_moderate(r: int, M: float, d: int, eps: float) -> FoolingFamily:
    """``binom(d, k)`` products of ``g`` (left of ``x0``) and ``h`` (right of ``x0``).

    ``g = M (x - x0)^r / r!`` on ``[0, x0]`` has norm 1 and ``h``, the same
    polynomial on ``[x0, 1]``, has norm ``|h(1)| < 1``.  ``k`` is the largest
    integer ``<= d`` with ``|h(1)|^k > eps``.  Member ``J`` (``k``-subsets in
    colex order) places ``h`` on ``J`` and ``g`` elsewhere, so its norm is
    ``|h(1)|^k > eps``.
    """
    if regime_of(r, M) != Regime.MODERATE:
        raise DomainError(f"the Moderate family needs r! < M < 2^r r!, got M={M}")
    if not 0.0 < eps < 1.0:
        raise UsageError(f"eps must lie in (0, 1), got {eps}")
    x0 = moderate_kink(r, M)
    coef = M / math.factorial(r)
    g = _split_factor(r, coef, x0, "left")
    h = _split_factor(r, coef, x0, "right")
    h1 = coef * (1.0 - x0) ** r
    k = largest_power_above(h1, eps, d)
    size = math.comb(d, k)

    def member(index: int) -> RankOneFunction:
        if not 0 <= index < size:
            raise UsageError(f"member index {index} out of range")
        J = set(colex_unrank(index, d, k))
        return RankOneFunction([h if i in J else g for i in range(d)])

    def owner(x) -> Optional[int]:
        x = np.asarray(x, dtype=float)
        if np.any(x == x0):
            return None
        J = [i for i in range(d) if x[i] > x0]
        return colex_rank(J) if len(J) == k else None

    kappa = math.ceil(math.log(1.0 / eps) / math.log(1.0 / h1)) - 1
    info = (("x0", x0), ("h1", h1), ("kappa", kappa), ("k", k), ("g", g), ("h", h))
    return FoolingFamily(Regime.MODERATE, d, size, h1**k, member, owner, info)


def hitting_points(family: FoolingFamily) -> PointSet:
    """One point inside the support of every member, in member order."""
    info = dict(family.info)
    d = family.d
    if family.regime == Regime.LARGE:
        lo, hi = 0.25, 0.75
    else:
        lo, hi = info["x0"] / 2.0, (1.0 + info["x0"]) / 2.0
    pts = np.empty((family.size, d))
    for b in range(family.size):
        f = family.member(b)
        pts[b] = [hi if f.factors[i] is info["h"] else lo for i in range(d)]
    return PointSet(d, pts, f"hitting({family.regime.value}, d={d})")


def evade(points, family: FoolingFamily) -> Optional[int]:
    """Smallest member index vanishing on every point, or ``None`` if all are hit."""
    pts = points.points if isinstance(points, PointSet) else np.asarray(points, dtype=float).reshape(-1, family.d)
    hit = {family.owner(p) for p in pts}
    for k in range(min(family.size, len(hit) + 1)):
        if k not in hit:
            return k
    return None


# ---------------------------------------------------------------------------
# small regime

PAIR_PATTERNS = (("low", "high"), ("low", "low"), ("high", "high"))


def pair_search(points: np.ndarray, d: int):
    """Coordinates ``(j, l)`` and half-interval pattern on which no point is non-zero.

    A point ``p`` defeats pattern ``(low, high)`` on ``(j, l)`` when
    ``p_j < 1/2`` and ``p_l > 1/2``; analogously for the other patterns.
    Ordered pairs are scanned row by row for ``(low, high)`` first, then
    unordered pairs for ``(low, low)`` and ``(high, high)``.

    Returns
    -------
    (j, l, pattern) or None
    """
    P = np.asarray(points, dtype=float).reshape(-1, d)
    low = (P < 0.5).astype(np.int64)
    high = (P > 0.5).astype(np.int64)
    side = {"low": low, "high": high}
    for pat in PAIR_PATTERNS:
        conflicts = side[pat[0]].T @ side[pat[1]]
        ok = conflicts == 0
        np.fill_diagonal(ok, False)
        if pat[0] == pat[1]:
            ok = np.triu(ok)
        hits = np.argwhere(ok)
        if len(hits):
            j, l = hits[0]
            return int(j), int(l), pat
    return None


def _half_factor(M: float, side: str) -> UnivariateFactor:
    """``M (x - 1/2)`` on one half of ``[0, 1]``, zero on the other (``r = 1``)."""
    if side == "low":
        rows = [[-M / 2.0, M], [0.0, 0.0]]
    else:
        rows = [[0.0, 0.0], [0.0, M]]
    return UnivariateFactor([0.0, 0.5, 1.0], rows, 1)


def small_point_cap(r: int, d: int) -> int:
    """Most points the Small-regime construction can fool: ``d`` for ``r >= 2``, ``floor(log2 d)`` for ``r = 1``."""
    return d if r >= 2 else int(math.floor(math.log2(d)))


def fooling_family_small(r: int, M: float, d: int, points) -> RankOneFunction:
    """Class member of known norm vanishing on all ``points``.

    For ``r >= 2`` factor ``i`` is the normalised linear function vanishing
    at the ``i``-th coordinate of point ``i`` (norm 1).  For ``r = 1`` two
    coordinates from :func:`pair_search` carry ``M (x - 1/2)`` on opposite
    or equal halves (norm ``M^2 / 4``).

    Raises
    ------
    DomainError
        Outside the Small regime, with too many points, or for ``r = 1,
        d = 1`` (two distinct coordinates are needed).
    """
    if regime_of(r, M) != Regime.SMALL:
        raise DomainError(f"the Small construction needs M <= r!, got M={M}")
    pts = points.points if isinstance(points, PointSet) else np.asarray(points, dtype=float).reshape(-1, d)
    if pts.shape[1] != d:
        raise UsageError(f"points have dimension {pts.shape[1]}, expected {d}")
    n = len(pts)
    if r == 1 and d < 2:
        raise DomainError("the r = 1 construction needs two distinct coordinates (d >= 2)")
    if n > small_point_cap(r, d):
        raise DomainError(f"too many points to fool: {n} > {small_point_cap(r, d)}")
    one = constant_factor(1.0, r)
    if r >= 2:
        factors = [one] * d
        for i, p in enumerate(pts):
            a = float(p[i])
            s = 1.0 / max(a, 1.0 - a)
            factors[i] = UnivariateFactor([0.0, 1.0], [[-a * s, s] + [0.0] * (r - 1)], r)
        return RankOneFunction(factors)
    found = pair_search(pts, d)
    if found is None:
        raise DomainError("no coordinate pair leaves an empty box; the size precondition should have prevented this")
    j, l, (pj, pl) = found
    factors = [constant_factor(1.0, 1)] * d
    factors[j] = _half_factor(M, pj)
    factors[l] = _half_factor(M, pl)
    return RankOneFunction(factors)


# ---------------------------------------------------------------------------
# demonstrations


def witnessed_error(family: FoolingFamily, points, cls: SmoothnessClass, eps: float) -> tuple:
    """Run recovery with ``points`` as the detector against the member that evades them.

    Returns ``(member_index, error)``; the recovery sees only zeros, so it
    returns the zero function and its error on the member equals the
    member's norm.  ``(None, 0.0)`` when no member evades.
    """
    from .recover import approximate_with_detector

    P = points if isinstance(points, PointSet) else PointSet(family.d, points)
    k = evade(P, family)
    if k is None:
        return None, 0.0
    f = family.member(k)
    worst = 0.0
    for sign_f in (f, f.negated()):
        a, _ = approximate_with_detector(sign_f, cls, eps, P)
        if a.scale != 0.0:
            raise AssertionError("evaded member produced a non-zero sample")
        worst = max(worst, sign_f.sup_norm)
    return k, worst


def random_points(n: int, d: int, rng: np.random.Generator) -> PointSet:
    return PointSet(d, rng.random((n, d)), f"uniform(n={n}, d={d})")


def pair_search_cases(d: int, count: int, rng: np.random.Generator):
    """``count`` random sets of ``floor(log2 d)`` points each, for exercising :func:`pair_search`."""
    n = small_point_cap(1, d)
    return [rng.random((n, d)) for _ in range(count)]


def subsets_colex(d: int, k: int):
    """All ``k``-subsets in colex order (for cross-checking the ranking)."""
    return sorted(itertools.combinations(range(d), k), key=lambda s: tuple(reversed(s)))
