"""Rank-one tensors with certifiable class membership.

A member of the class is a product ``f(x) = f_1(x_1) * ... * f_d(x_d)`` where
each factor maps ``[0, 1]`` into ``[-1, 1]`` and has ``r``-th weak derivative
bounded by ``M``.  Factors are stored as piecewise polynomials with
``C^(r-1)`` joins, which makes both constraints checkable exactly (up to
rounding) instead of by sampling.
"""

import bisect
import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _poly
from .errors import DomainError, UsageError

MEMBERSHIP_TOL = 1e-12
KINDS = ("random", "bump", "edge", "rooted")


class Regime(str, enum.Enum):
    LARGE = "large"
    MODERATE = "moderate"
    SMALL = "small"


def regime_of(r: int, M: float) -> Regime:
    """Large iff ``M >= 2^r r!``, Small iff ``M <= r!``, Moderate in between."""
    rf = math.factorial(r)
    if M >= 2**r * rf:
        return Regime.LARGE
    if M <= rf:
        return Regime.SMALL
    return Regime.MODERATE


@dataclass(frozen=True)
class SmoothnessClass:
    """Parameters ``(r, M, d)`` of the class of rank-one tensors."""

    r: int
    M: float
    d: int = 1

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise UsageError(f"r must be an integer >= 1, got {self.r!r}")
        if not (self.M > 0) or not math.isfinite(self.M):
            raise UsageError(f"M must be a positive finite real, got {self.M!r}")
        if int(self.d) != self.d or self.d < 1:
            raise UsageError(f"d must be an integer >= 1, got {self.d!r}")
        object.__setattr__(self, "r", int(self.r))
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "M", float(self.M))

    @property
    def regime(self) -> Regime:
        return regime_of(self.r, self.M)

    @property
    def rho(self) -> float:
        return max(float(self.r), self.M ** (1.0 / self.r))

    def with_d(self, d: int) -> "SmoothnessClass":
        return SmoothnessClass(self.r, self.M, d)


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based random stream for ``(seed, *key)``.

    Streams are independent of the order in which they are requested, so
    trial ``t`` draws the same numbers whether it runs first, last, or on
    another thread.
    """
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# univariate factors


@dataclass(frozen=True)
class ZeroSet:
    """Zeros of a piecewise polynomial: isolated points plus closed intervals."""

    points: np.ndarray
    intervals: tuple = ()

    def blocked(self):
        """Sorted list of ``(start, end)`` segments, points as degenerate ones."""
        segs = [(float(z), float(z)) for z in self.points] + [tuple(map(float, iv)) for iv in self.intervals]
        return sorted(segs)

    def max_gap(self) -> float:
        """Length of the longest open subinterval of ``[0, 1]`` free of zeros."""
        best, cursor = 0.0, 0.0
        for s, e in self.blocked():
            best = max(best, s - cursor)
            cursor = max(cursor, e)
        return max(best, 1.0 - cursor)

    def count_in(self, lo: float, hi: float, tol: float = 0.0) -> float:
        """Number of zeros strictly inside ``(lo + tol, hi - tol)``; ``inf`` for a zero interval."""
        a, b = lo + tol, hi - tol
        for s, e in self.intervals:
            if s < b and e > a:
                return math.inf
        return int(np.count_nonzero((self.points > a) & (self.points < b)))

    def min_window_count(self, length: float, tol: float = 1e-12) -> float:
        """Fewest zeros in any open window of the given length inside ``[0, 1]``."""
        top = 1.0 - length
        if top < 0:
            raise UsageError("window longer than the unit interval")
        cands = [0.0, top]
        for s, e in self.blocked():
            cands += [e, s - length]
        best = math.inf
        for a in cands:
            a = min(max(a, 0.0), top)
            best = min(best, self.count_in(a, a + length, tol))
        return best


@dataclass(frozen=True, eq=False)
class UnivariateFactor:
    """Piecewise polynomial on ``[0, 1]`` with cached exact bounds.

    ``coeffs[k]`` holds ascending coefficients in the local variable
    ``x - breakpoints[k]``.  Evaluation is right-continuous at breakpoints
    (irrelevant for members, which are continuous).

    Attributes
    ----------
    sup_norm : float
        Maximum of ``|f|`` over ``[0, 1]`` from critical-point evaluation.
    deriv_r_sup : float
        Essential supremum of the ``r``-th derivative over all pieces.
    """

    breakpoints: np.ndarray
    coeffs: np.ndarray
    r: int
    sup_norm: float = field(default=math.nan)
    deriv_r_sup: float = field(default=math.nan)

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=float)
        c = np.atleast_2d(np.array(self.coeffs, dtype=float))
        if b.ndim != 1 or len(b) < 2 or b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
            raise UsageError("breakpoints must increase strictly from 0 to 1")
        if c.shape[0] != len(b) - 1:
            raise UsageError("need one coefficient row per piece")
        b.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "coeffs", c)
        if math.isnan(self.sup_norm):
            widths = np.diff(b)
            object.__setattr__(self, "sup_norm", max(_poly.abs_max(p, w) for p, w in zip(c, widths)))
            object.__setattr__(self, "deriv_r_sup", self.derivative_sup(self.r))

    @property
    def n_pieces(self) -> int:
        return self.coeffs.shape[0]

    @property
    def degree(self) -> int:
        return max(len(_poly.trim(p)) - 1 for p in self.coeffs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1, 0, self.n_pieces - 1)
        return _poly.horner_rows(self.coeffs[k], x - self.breakpoints[k])

    @functools.cached_property
    def _scalar_tables(self):
        return self.breakpoints.tolist(), [list(p) for p in self.coeffs.tolist()]

    def at(self, t: float) -> float:
        """Scalar evaluation without numpy overhead (same piece rule as ``__call__``)."""
        b, c = self._scalar_tables
        k = min(max(bisect.bisect_right(b, t) - 1, 0), len(c) - 1)
        return _poly._horner_py(c[k], t - b[k])

    def derivative_sup(self, order: int) -> float:
        widths = np.diff(self.breakpoints)
        return max(_poly.abs_max(_poly.deriv(p, order), w) for p, w in zip(self.coeffs, widths))

    def scaled(self, c: float) -> "UnivariateFactor":
        # both cached bounds are positively homogeneous
        a = abs(float(c))
        return UnivariateFactor(self.breakpoints, self.coeffs * c, self.r, self.sup_norm * a, self.deriv_r_sup * a)

    def negated(self) -> "UnivariateFactor":
        return UnivariateFactor(
            self.breakpoints, -self.coeffs, self.r, self.sup_norm, self.deriv_r_sup
        )

    def is_member(self, M: float, tol: float = MEMBERSHIP_TOL) -> bool:
        return (
            self.sup_norm <= 1.0 + tol
            and self.deriv_r_sup <= M * (1.0 + tol)
            and self.join_defect() <= 1e-9
        )

    def join_defect(self) -> float:
        """Largest relative jump of derivatives ``0..r-1`` across interior breakpoints."""
        worst = 0.0
        widths = np.diff(self.breakpoints)
        for k in range(self.n_pieces - 1):
            left, right = self.coeffs[k], self.coeffs[k + 1]
            for j in range(self.r):
                a = _poly.horner(_poly.deriv(left, j), widths[k])
                b = _poly.horner(_poly.deriv(right, j), 0.0)
                worst = max(worst, abs(float(a - b)) / max(1.0, abs(float(a)), abs(float(b))))
        return worst

    def zeros(self) -> ZeroSet:
        pts, ivs = [], []
        b = self.breakpoints
        for k, p in enumerate(self.coeffs):
            if _poly.is_zero(p):
                if ivs and abs(ivs[-1][1] - b[k]) == 0.0:
                    ivs[-1] = (ivs[-1][0], b[k + 1])
                else:
                    ivs.append((b[k], b[k + 1]))
                continue
            pts.extend(b[k] + _poly.real_roots(p, b[k + 1] - b[k]))
        pts = np.sort(np.array(pts, dtype=float))
        keep = []
        for z in pts:
            if any(s - _poly.ROOT_MERGE_TOL <= z <= e + _poly.ROOT_MERGE_TOL for s, e in ivs):
                continue
            if keep and z - keep[-1] <= _poly.ROOT_MERGE_TOL:
                continue
            keep.append(z)
        return ZeroSet(np.array(keep), tuple(ivs))


def constant_factor(value: float, r: int = 1) -> UnivariateFactor:
    return UnivariateFactor([0.0, 1.0], [[float(value)]], r)


def _integrate(breaks, rth, initial, r):
    """Pieces whose ``r``-th derivative is ``rth[k]`` on piece ``k``, C^(r-1) joins.

    ``initial[j]`` is the ``j``-th derivative at ``x = 0``.
    """
    fact = [float(math.factorial(j)) for j in range(r + 1)]
    y = [float(v) for v in initial]
    coeffs = np.zeros((len(breaks) - 1, r + 1))
    for k in range(len(breaks) - 1):
        w = float(breaks[k + 1] - breaks[k])
        c = [y[j] / fact[j] for j in range(r)] + [float(rth[k]) / fact[r]]
        coeffs[k] = c
        # derivatives of the piece at its right end seed the next piece
        y = [
            sum(c[i] * math.perm(i, j) * w ** (i - j) for i in range(j, r + 1))
            for j in range(r)
        ]
    return coeffs


def fit_to_class(f: UnivariateFactor, M: float, maximal: bool = False) -> UnivariateFactor:
    """Rescale ``f`` into the class: shrink if needed, or blow up as far as allowed.

    With ``maximal=False`` divides by ``max(1, sup)`` (and by the derivative
    excess, if any).  With ``maximal=True`` multiplies by the largest constant
    that keeps both ``sup <= 1`` and ``deriv <= M``.
    """
    if f.sup_norm == 0.0:
        return f
    room = 1.0 / f.sup_norm
    if f.deriv_r_sup > 0:
        room = min(room, M / f.deriv_r_sup)
    c = room if maximal else min(1.0, room)
    g = f.scaled(c) if c != 1.0 else f
    for _ in range(8):
        if g.sup_norm <= 1.0 and g.deriv_r_sup <= M:
            return g
        g = g.scaled(1.0 - 2.0**-50)
    return g


def random_factor(cls: SmoothnessClass, rng: np.random.Generator) -> UnivariateFactor:
    """Draw a member factor: random piecewise-constant ``r``-th derivative, integrated.

    Between 1 and 8 interior breakpoints, ``r``-th derivative values uniform in
    ``[-M, M]``, initial derivatives uniform in ``[-1, 1]``, then division by
    ``max(1, sup)``.
    """
    r, M = cls.r, cls.M
    k = int(rng.integers(1, 9))
    inner = np.unique(rng.uniform(0.0, 1.0, size=k))
    inner = inner[(inner > 0.0) & (inner < 1.0)]
    breaks = np.concatenate([[0.0], inner, [1.0]])
    rth = rng.uniform(-M, M, size=len(breaks) - 1)
    init = rng.uniform(-1.0, 1.0, size=r)
    return fit_to_class(UnivariateFactor(breaks, _integrate(breaks, rth, init, r), r), M)


def rooted_factor(cls: SmoothnessClass, roots: Sequence[float], rng=None) -> UnivariateFactor:
    """Member factor vanishing at the given points (at most ``r`` of them).

    Without ``rng`` this is the extremal polynomial ``(M/r!) prod (x - x_j)``,
    shrunk if its norm exceeds 1.  With ``rng`` a random factor has its
    degree-``<len(roots)`` interpolant at the roots subtracted, which leaves
    the ``r``-th derivative untouched.
    """
    roots = np.asarray(roots, dtype=float)
    r, M = cls.r, cls.M
    if len(roots) > r:
        raise UsageError(f"at most r={r} prescribed roots are supported")
    if rng is None:
        c = np.polynomial.polynomial.polyfromroots(roots) * (M / math.factorial(r)) if len(roots) else np.array([1.0])
        return fit_to_class(UnivariateFactor([0.0, 1.0], [c], r), M)
    q = random_factor(cls, rng)
    if len(roots) == 0:
        return q
    p = _poly.newton_to_monomial(roots, _poly.newton_coefficients(roots, q(roots)))
    width = max(q.coeffs.shape[1], len(p))
    rows = []
    for a, c in zip(q.breakpoints[:-1], q.coeffs):
        shifted = _poly.taylor_shift(p, a)
        rows.append(np.pad(c, (0, width - len(c))) - np.pad(shifted, (0, width - len(shifted))))
    return fit_to_class(UnivariateFactor(q.breakpoints, np.array(rows), r), M)


def bump_factor(cls: SmoothnessClass, a: float, b: float, sign: float = 1.0) -> UnivariateFactor:
    """Degree-``r`` B-spline bump supported on ``(a, b)``, scaled as large as the class allows."""
    r, M = cls.r, cls.M
    if not (0.0 <= a < b <= 1.0):
        raise UsageError("need 0 <= a < b <= 1")
    h = (b - a) / (r + 1)
    knots = a + h * np.arange(r + 2)
    knots[-1] = b
    breaks = np.unique(np.concatenate([[0.0], knots, [1.0]]))
    rth = np.zeros(len(breaks) - 1)
    first = int(np.searchsorted(breaks, a))
    for k in range(r + 1):
        rth[first + k] = (-1) ** k * math.comb(r, k) / h**r
    coeffs = np.zeros((len(breaks) - 1, r + 1))
    coeffs[first:first + r + 1] = _integrate(breaks[first:first + r + 2], rth[first:first + r + 1], np.zeros(r), r)
    return fit_to_class(UnivariateFactor(breaks, sign * coeffs, r), M, maximal=True)


def edge_factor(cls: SmoothnessClass, cut: float, side: str = "left", sign: float = 1.0) -> UnivariateFactor:
    """``(cut - x)^r`` on ``[0, cut]`` (``side='left'``) or ``(x - cut)^r`` on ``[cut, 1]``, zero elsewhere."""
    r, M = cls.r, cls.M
    if not (0.0 < cut < 1.0):
        raise UsageError("cut must lie in (0, 1)")
    mono = np.zeros(r + 1)
    mono[r] = 1.0
    if side == "left":
        rows = [np.polynomial.polynomial.polypow([cut, -1.0], r), np.zeros(r + 1)]
    elif side == "right":
        rows = [np.zeros(r + 1), mono]
    else:
        raise UsageError("side must be 'left' or 'right'")
    return fit_to_class(UnivariateFactor([0.0, cut, 1.0], sign * np.array(rows), r), M, maximal=True)


def class_member(cls: SmoothnessClass, rng: np.random.Generator, kind: str = "mixed") -> UnivariateFactor:
    """Draw a member factor of the requested kind (``'mixed'`` picks one at random)."""
    if kind == "mixed":
        kind = KINDS[int(rng.integers(len(KINDS)))]
    sign = 1.0 if rng.random() < 0.5 else -1.0
    if kind == "random":
        return random_factor(cls, rng)
    if kind == "bump":
        a, b = np.sort(rng.uniform(0.0, 1.0, size=2))
        if b - a < 1e-3:
            b = min(1.0, a + 1e-3)
            a = b - 1e-3
        return bump_factor(cls, float(a), float(b), sign)
    if kind == "edge":
        return edge_factor(cls, float(rng.uniform(0.02, 0.98)), "left" if rng.random() < 0.5 else "right", sign)
    if kind == "rooted":
        roots = rng.uniform(0.0, 1.0, size=int(rng.integers(1, cls.r + 1)))
        return rooted_factor(cls, roots, rng)
    raise UsageError(f"unknown factor kind {kind!r}")


# ---------------------------------------------------------------------------
# rank-one functions


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.ndim != 2 or pts.shape[1] != d:
        raise UsageError(f"expected points of dimension {d}, got shape {x.shape}")
    return pts, single


@dataclass(frozen=True, eq=False)
class RankOneFunction:
    """``f(x) = prod_i f_i(x_i)``; callable on a point ``(d,)`` or a batch ``(n, d)``."""

    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise UsageError("need at least one factor")

    @property
    def d(self) -> int:
        return len(self.factors)

    def __call__(self, x):
        pts, single = _as_points(x, self.d)
        if np.any((pts < 0.0) | (pts > 1.0)):
            raise UsageError("points must lie in [0, 1]^d")
        out = self.factors[0](pts[:, 0])
        for i in range(1, self.d):
            out = out * self.factors[i](pts[:, i])
        return float(out[0]) if single else out

    def grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Values on the tensor grid ``axes[0] x ... x axes[d-1]``."""
        out = self.factors[0](axes[0])
        for i in range(1, self.d):
            out = np.multiply.outer(out, self.factors[i](axes[i]))
        return out

    @property
    def sup_norm(self) -> float:
        out = 1.0
        for g in self.factors:
            out *= g.sup_norm
        return out

    def negated(self) -> "RankOneFunction":
        return RankOneFunction((self.factors[0].negated(),) + self.factors[1:])

    def is_member(self, cls: SmoothnessClass) -> bool:
        return self.d == cls.d and all(g.is_member(cls.M) for g in self.factors)


def ones(d: int, r: int = 1) -> RankOneFunction:
    return RankOneFunction([constant_factor(1.0, r)] * d)


def zeros(d: int, r: int = 1) -> RankOneFunction:
    return RankOneFunction([constant_factor(0.0, r)] + [constant_factor(1.0, r)] * (d - 1))


def random_function(cls: SmoothnessClass, seed: int, *key: int, kind: str = "mixed") -> RankOneFunction:
    """Member of the class; factor ``i`` draws from stream ``(seed, *key, i)``."""
    return RankOneFunction([class_member(cls, stream(seed, *key, i), kind) for i in range(cls.d)])


def maximal_rescale(f: RankOneFunction, cls: SmoothnessClass) -> RankOneFunction:
    return RankOneFunction([fit_to_class(g, cls.M, maximal=True) for g in f.factors])


def eval_product(f: RankOneFunction, x) -> float:
    """Left-to-right product of factor values, one factor at a time."""
    out = 1.0
    for g, xi in zip(f.factors, x):
        out *= float(g(xi))
    return out


def fiber(f, i: int, z) -> Callable:
    """Univariate restriction ``x -> f(z_1, ..., z_{i-1}, x, z_{i+1}, ..., z_d)``.

    For a :class:`RankOneFunction` the result is an exact
    :class:`UnivariateFactor` (the ``i``-th factor times the off-coordinate
    product), so its derivative bound can be inspected.  For a generic oracle
    it is a closure that forwards batched evaluations to ``f``.
    """
    z = np.asarray(z, dtype=float)
    d = len(z)
    if not 0 <= i < d:
        raise UsageError(f"coordinate index {i} out of range for d={d}")
    if isinstance(f, RankOneFunction):
        if f.d != d:
            raise UsageError("anchor dimension does not match the function")
        c = 1.0
        for j, g in enumerate(f.factors):
            if j != i:
                c *= float(g(z[j]))
        return f.factors[i].scaled(c)

    def g(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        pts = np.repeat(z[None, :], len(x), axis=0)
        pts[:, i] = x
        return np.asarray(f(pts), dtype=float)

    return g


# ---------------------------------------------------------------------------
# error estimation

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(h, lo, hi, iters):
    a, b = lo, hi
    x1, x2 = b - _GOLD * (b - a), a + _GOLD * (b - a)
    f1, f2 = h(x1), h(x2)
    best_x, best = (x1, f1) if f1 >= f2 else (x2, f2)
    for _ in range(iters):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLD * (b - a)
            f1 = h(x1)
            if f1 > best:
                best_x, best = x1, f1
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLD * (b - a)
            f2 = h(x2)
            if f2 > best:
                best_x, best = x2, f2
    return best_x, best


def _line_functions(f, a):
    """``along(x, j)`` returns ``t -> |f - a|`` on the line through ``x`` parallel to axis ``j``."""
    fs = getattr(f, "factors", None)
    ps = getattr(a, "coordinate_interpolants", None)
    if fs is not None and ps is not None and hasattr(a, "scale"):
        # separable: the other coordinates only contribute constant products
        def along(x, j):
            cf, ca = 1.0, float(a.scale)
            for i in range(len(fs)):
                if i != j:
                    cf *= fs[i].at(float(x[i]))
                    ca *= ps[i].at(float(x[i]))
            fj, pj = fs[j], ps[j]
            return lambda t: abs(cf * fj.at(t) - ca * pj.at(t))

        return along

    def along(x, j):
        def g(t):
            y = x.copy()
            y[j] = t
            return abs(float(f(y)) - float(a(y)))

        return g

    return along


def sup_error_estimate(f, a, budget: int = 4096, sweeps: int = 3, iters: int = 50) -> float:
    """Lower estimate of ``sup |f - a|`` over the cube (an estimate, not a certificate).

    Evaluates on a tensor grid with ``floor(budget^(1/d))`` points per axis
    (endpoints included), then refines around the best grid point by
    coordinate-wise golden-section search.
    """
    d = f.d
    if budget < 2**d:
        raise UsageError(f"budget must be at least 2^d = {2**d}")
    n = int(math.floor(budget ** (1.0 / d) + 1e-9))
    while (n + 1) ** d <= budget:
        n += 1
    axis = np.linspace(0.0, 1.0, n)
    axes = [axis] * d
    if hasattr(f, "grid") and hasattr(a, "grid"):
        err = np.abs(f.grid(axes) - a.grid(axes))
    else:
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        err = np.abs(np.asarray(f(mesh)) - np.asarray(a(mesh))).reshape((n,) * d)
    idx = np.unravel_index(int(np.argmax(err)), err.shape)
    best = float(err[idx])
    x = axis[list(idx)].astype(float)
    h = 1.0 / (n - 1)

    along = _line_functions(f, a)
    for _ in range(sweeps):
        for j in range(d):
            lo, hi = max(0.0, x[j] - h), min(1.0, x[j] + h)
            t, val = _golden_max(along(x, j), lo, hi, iters)
            if val > best:
                best = val
                x[j] = t
    return best


def grid_sup(g: Callable, n: int = 10_001) -> float:
    """Sup of ``|g|`` on an ``n``-point uniform grid of ``[0, 1]``."""
    return float(np.max(np.abs(g(np.linspace(0.0, 1.0, n)))))


def check_domain(cls: SmoothnessClass, regime: Regime):
    if cls.regime != regime:
        raise DomainError(f"(r={cls.r}, M={cls.M}) is in the {cls.regime.value} regime, not {regime.value}")
