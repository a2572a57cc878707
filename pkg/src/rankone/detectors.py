"""Detector point sets for the three smoothness regimes.

A point set ``P`` is an ``eps``-detector if every class member with sup
norm above ``eps`` is non-zero somewhere on ``P``.

* Large ``M``: any set with dispersion ``rho^-d eps^(1/r)`` works, since each
  factor avoids zeros on an interval of length ``L(g) >= rho^-1 |g|^(1/r)``.
* Moderate ``M``: at most ``d0`` factors can have ``r`` zeros near ``1/2``.
  The detector guesses those ``d0`` coordinates, covers them with a
  low-dispersion set, and covers the rest with a short diagonal.
* Small ``M``: shifted copies of a shrunk low-dispersion set along the
  diagonal.
"""

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._numbers import ceil_snap
from .errors import DomainError, ResourceError, UsageError
from .pointsets import (
    MAX_COORDINATES,
    PointSet,
    diagonal_set,
    digital_net_points,
    larcher_size,
    low_dispersion_set,
    verified_size,
)
from .tensor_model import (
    RankOneFunction,
    Regime,
    SmoothnessClass,
    UnivariateFactor,
    class_member,
    maximal_rescale,
    stream,
)

MAX_EMPIRICAL_ATTEMPTS = 10


# ---------------------------------------------------------------------------
# regime parameters


def empty_interval_length(g: UnivariateFactor, cls: SmoothnessClass) -> float:
    """``L(g) = min(1/r, (|g| / M)^(1/r))``: some interval of this length holds no zero of ``g``."""
    return min(1.0 / cls.r, (g.sup_norm / cls.M) ** (1.0 / cls.r))


def zero_free_interval_exists(g: UnivariateFactor, length: float, grid_step: float = 1e-4) -> bool:
    """Whether ``[0, 1]`` contains an open interval of ``length`` free of zeros of ``g``.

    Zeros come from exact root isolation on every piece, merged with sign
    changes and exact zeros on a uniform grid of spacing ``grid_step``.
    """
    zs = g.zeros()
    x = np.linspace(0.0, 1.0, int(round(1.0 / grid_step)) + 1)
    v = g(x)
    flips = np.flatnonzero((v[:-1] * v[1:] < 0.0))
    extra = np.concatenate([x[v == 0.0], (x[flips] + x[flips + 1]) / 2.0])
    # a sign change between grid nodes already holds an exact root; keep the
    # grid witness only where root isolation found nothing nearby
    pts = list(zs.points)
    for e in extra:
        if not any(abs(e - p) <= grid_step for p in pts) and not any(s <= e <= t for s, t in zs.intervals):
            pts.append(float(e))
    merged = type(zs)(np.sort(np.array(pts, dtype=float)), zs.intervals)
    return merged.max_gap() >= length * (1.0 - 1e-12) - 1e-12


def zeros_in(g: UnivariateFactor, lo: float, hi: float) -> float:
    """Number of distinct zeros of ``g`` in the closed interval ``[lo, hi]`` (``inf`` if it vanishes on a segment)."""
    return g.zeros().count_in(lo, hi, tol=-1e-12)


def almost_empty_interval_exists(g: UnivariateFactor, r: int) -> bool:
    """Whether some open interval of length ``|g|^(1/r)`` holds at most ``r - 1`` zeros of ``g``."""
    length = min(1.0, g.sup_norm ** (1.0 / r))
    return g.zeros().min_window_count(length) <= r - 1


def c_delta(r: int, M: float, delta: float) -> float:
    """``M (1 + 2 delta)^r / (2^r r!)``: norm cap for factors with ``r`` zeros in ``[1/2 - delta, 1/2 + delta]``."""
    if not 0.0 < delta <= 0.5:
        raise UsageError(f"delta must lie in (0, 1/2], got {delta}")
    return M * (1.0 + 2.0 * delta) ** r / (2.0**r * math.factorial(r))


def choose_delta(r: int, M: float) -> float:
    """``min(1/2, (B - 1) / 4)`` with ``B = 2 (r!/M)^(1/r)``, which keeps ``c_delta < 1``."""
    if M >= 2**r * math.factorial(r):
        raise DomainError(f"no admissible delta for M={M} >= 2^r r!")
    B = 2.0 * (math.factorial(r) / M) ** (1.0 / r)
    return min(0.5, (B - 1.0) / 4.0)


def largest_power_above(base: float, eps: float, cap: int) -> int:
    """Largest ``k`` in ``{0, .., cap}`` with ``base^k > eps`` for ``0 < base < 1``.

    The closed form ``ceil(ln eps / ln base) - 1`` is corrected by a direct
    search, which is authoritative at exact powers.
    """
    if not 0.0 < base < 1.0:
        raise DomainError(f"base must lie in (0, 1), got {base}")
    if not 0.0 < eps < 1.0:
        raise UsageError(f"eps must lie in (0, 1), got {eps}")
    k = min(ceil_snap(math.log(eps) / math.log(base)) - 1, cap)
    while k < cap and base ** (k + 1) > eps:
        k += 1
    while k > 0 and not base**k > eps:
        k -= 1
    return k


def pseudo_dimension(r: int, M: float, d: int, eps: float, delta: float) -> int:
    """Largest ``k <= d`` with ``c_delta^k > eps``."""
    return largest_power_above(c_delta(r, M, delta), eps, d)


def ru16_size(d: int, r: int, eps: float) -> int:
    """``ceil(16 d eps^(-1/r) ln(66 eps^(-1/r)))``, a size at which dispersion ``eps^(1/r)/2`` is attainable."""
    s = eps ** (-1.0 / r)
    return ceil_snap(16.0 * d * s * math.log(66.0 * s))


@dataclass(frozen=True)
class DetectorParams:
    """Everything a detector construction depends on; unused fields stay ``None``."""

    regime: Regime
    rho: float
    target_dispersion: float
    delta: Optional[float] = None
    c_delta: Optional[float] = None
    d0: Optional[int] = None
    gamma: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False)

    def items(self):
        out = [("rho", self.rho), ("target_dispersion", self.target_dispersion)]
        for key in ("delta", "c_delta", "d0", "gamma"):
            val = getattr(self, key)
            if val is not None:
                out.append((key, val))
        return out + sorted(self.extra.items())


def _fmt(v) -> str:
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def detector_header(cls: SmoothnessClass, eps: float, params: DetectorParams) -> str:
    body = ";".join(f"{k}={_fmt(v)}" for k, v in params.items())
    return f"# regime={params.regime.value} r={cls.r} M={_fmt(cls.M)} d={cls.d} eps={_fmt(eps)} params={body}"


def _check_eps(eps):
    if not 0.0 < eps < 1.0:
        raise UsageError(f"eps must lie in (0, 1), got {eps}")


def _check_regime(cls, regime, force):
    if not force and cls.regime != regime:
        raise DomainError(
            f"(r={cls.r}, M={cls.M}) is in the {cls.regime.value} regime; pass force=True to build the {regime.value} detector"
        )


def _guard(n, d):
    if n * d > MAX_COORDINATES:
        raise ResourceError(f"detector with {n} points in dimension {d} exceeds the materialisation cap")


# ---------------------------------------------------------------------------
# constructions


def large_params(cls: SmoothnessClass, eps: float) -> DetectorParams:
    return DetectorParams(Regime.LARGE, cls.rho, cls.rho ** (-cls.d) * eps ** (1.0 / cls.r))


def detector_large(cls: SmoothnessClass, eps: float, mode: str = "verified") -> PointSet:
    """Sobol prefix with dispersion at most ``rho^-d eps^(1/r)``; valid for every ``M``."""
    _check_eps(eps)
    params = large_params(cls, eps)
    P = low_dispersion_set(params.target_dispersion, cls.d, mode)
    return _wrap(P, cls, eps, params, mode)


def moderate_params(cls: SmoothnessClass, eps: float, delta: Optional[float] = None) -> DetectorParams:
    r, M, d = cls.r, cls.M, cls.d
    delta = choose_delta(r, M) if delta is None else delta
    cd = c_delta(r, M, delta)
    if not cd < 1.0:
        raise DomainError(f"c_delta = {cd} >= 1 for delta = {delta}; choose a smaller delta")
    d0 = largest_power_above(cd, eps, d)
    target = cls.rho ** (-d0) * eps ** (1.0 / r)
    return DetectorParams(Regime.MODERATE, cls.rho, target, delta, cd, d0)


def detector_moderate(
    cls: SmoothnessClass,
    eps: float,
    mode: str = "verified",
    force: bool = False,
    delta: Optional[float] = None,
    dedup: bool = False,
) -> PointSet:
    """Union over ``d0``-subsets ``J`` of ``{x : x_J in P1, x_rest in P2}``.

    ``P1`` is a low-dispersion set in ``d0`` dimensions and ``P2`` the
    diagonal of ``(r-1)(d-d0)+1`` points in ``[1/2 - delta, 1/2 + delta]``.
    Subsets are visited in lexicographic order; within a subset ``P1`` is the
    outer loop.  Duplicates are kept unless ``dedup`` is set.
    """
    _check_eps(eps)
    _check_regime(cls, Regime.MODERATE, force)
    params = moderate_params(cls, eps, delta)
    r, d, d0 = cls.r, cls.d, params.d0
    n_sub = math.comb(d, d0)
    n2 = (r - 1) * (d - d0) + 1 if d0 < d else 1
    if d0 > 0:
        n1 = moderate_p1_size(params, d0, mode)
        _guard(n_sub * n1 * n2, d)
        P1 = low_dispersion_set(params.target_dispersion, d0, mode).points
    else:
        P1 = np.zeros((1, 0))
    P2 = diagonal_set(n2, 0.5, params.delta, d - d0).points if d0 < d else np.zeros((1, 0))
    n1, n2 = len(P1), len(P2)
    blocks = []
    for J in itertools.combinations(range(d), d0):
        rest = [i for i in range(d) if i not in J]
        block = np.empty((n1 * n2, d))
        block[:, list(J)] = np.repeat(P1, n2, axis=0)
        block[:, rest] = np.tile(P2, (n1, 1))
        blocks.append(block)
    pts = np.concatenate(blocks)
    if dedup:
        _, first = np.unique(pts, axis=0, return_index=True)
        pts = pts[np.sort(first)]
    return _wrap(PointSet(d, pts, "moderate"), cls, eps, params, mode)


def moderate_p1_size(params: DetectorParams, d0: int, mode: str) -> int:
    if d0 == 0:
        return 1
    if mode == "formula":
        return larcher_size(params.target_dispersion, d0)
    return verified_size(params.target_dispersion, d0)


def small_params(cls: SmoothnessClass, eps: float) -> DetectorParams:
    gamma = (1.0 - 2.0 ** (-1.0 / cls.d)) * eps ** (1.0 / cls.r)
    return DetectorParams(Regime.SMALL, cls.rho, eps ** (1.0 / cls.r) / 2.0, gamma=gamma)


def small_base_set(cls: SmoothnessClass, eps: float, mode: str) -> PointSet:
    """``P0``: verified Sobol prefix, or in formula mode the first ``ru16_size`` Sobol points (not certified)."""
    target = eps ** (1.0 / cls.r) / 2.0
    if mode == "formula":
        n = ru16_size(cls.d, cls.r, eps)
        _guard(n, cls.d)
        return PointSet(cls.d, digital_net_points(0, n, cls.d), f"sobol-ru16(n={n}, d={cls.d})", target, False)
    return low_dispersion_set(target, cls.d, mode)


def detector_small(cls: SmoothnessClass, eps: float, mode: str = "verified", force: bool = False) -> PointSet:
    """``{(1 - gamma) x + gamma j / ((r-1) d) * 1 : x in P0, 0 <= j <= (r-1) d}``; only ``j = 0`` for ``r = 1``.

    Points are ordered with ``x`` outer and ``j`` inner.
    """
    _check_eps(eps)
    _check_regime(cls, Regime.SMALL, force)
    params = small_params(cls, eps)
    r, d, gamma = cls.r, cls.d, params.gamma
    P0 = small_base_set(cls, eps, mode).points
    steps = (r - 1) * d
    shifts = gamma * np.arange(steps + 1) / steps if steps else np.zeros(1)
    _guard(len(P0) * len(shifts), d)
    pts = (1.0 - gamma) * P0[:, None, :] + shifts[None, :, None]
    return _wrap(PointSet(d, pts.reshape(-1, d), "small"), cls, eps, params, mode)


def _wrap(P: PointSet, cls, eps, params, mode) -> PointSet:
    meta = {"params": params, "header": detector_header(cls, eps, params), "mode": mode}
    prov = f"detector-{params.regime.value}(r={cls.r}, M={cls.M:.17g}, d={cls.d}, eps={eps:.17g}, mode={mode})"
    # only the Large construction is itself a low-dispersion set
    claimed = params.target_dispersion if params.regime == Regime.LARGE else None
    return PointSet(P.d, P.points, prov, claimed, mode == "verified", meta)


def params_for(cls: SmoothnessClass, eps: float, regime: Optional[Regime] = None, delta=None) -> DetectorParams:
    regime = cls.regime if regime is None else Regime(regime)
    if regime == Regime.LARGE:
        return large_params(cls, eps)
    if regime == Regime.MODERATE:
        return moderate_params(cls, eps, delta)
    return small_params(cls, eps)


@functools.lru_cache(maxsize=256)
def _build_cached(r, M, d, eps, mode, regime, delta, dedup):
    cls = SmoothnessClass(r, M, d)
    force = regime != cls.regime
    if regime == Regime.LARGE:
        return detector_large(cls, eps, mode)
    if regime == Regime.MODERATE:
        return detector_moderate(cls, eps, mode, force=force, delta=delta, dedup=dedup)
    return detector_small(cls, eps, mode, force=force)


def build_detector(
    cls: SmoothnessClass,
    eps: float,
    mode: str = "verified",
    regime: Optional[Regime] = None,
    delta: Optional[float] = None,
    dedup: bool = False,
) -> PointSet:
    """Detector for the class's own regime, or for ``regime`` when overridden (memoised)."""
    regime = cls.regime if regime is None else Regime(regime)
    if mode not in ("verified", "formula"):
        raise UsageError(f"mode must be 'verified' or 'formula', got {mode!r}")
    return _build_cached(cls.r, cls.M, cls.d, float(eps), mode, regime, delta, dedup)


def detector_cardinality(
    cls: SmoothnessClass, eps: float, mode: str = "formula", regime: Optional[Regime] = None, delta=None
) -> int:
    """``|P|`` without building ``P``.

    Large: ``|net|``.  Moderate: ``binom(d, d0) |P1| ((r-1)(d-d0)+1)``.
    Small: ``((r-1) d + 1) |P0|``.  Exact integers, so huge formula-mode
    sizes are fine.
    """
    _check_eps(eps)
    params = params_for(cls, eps, regime, delta)
    r, d = cls.r, cls.d
    if params.regime == Regime.LARGE:
        return larcher_size(params.target_dispersion, d) if mode == "formula" else verified_size(params.target_dispersion, d)
    if params.regime == Regime.MODERATE:
        d0 = params.d0
        n2 = (r - 1) * (d - d0) + 1 if d0 < d else 1
        return math.comb(d, d0) * moderate_p1_size(params, d0, mode) * n2
    n0 = ru16_size(d, r, eps) if mode == "formula" else verified_size(params.target_dispersion, d)
    return ((r - 1) * d + 1) * n0


# ---------------------------------------------------------------------------
# scanning and empirical checks


@dataclass(frozen=True)
class ScanResult:
    """Outcome of :func:`find_nonzero`; ``index is None`` on a miss."""

    index: Optional[int]
    point: Optional[np.ndarray]
    value: float
    evaluations: int

    @property
    def found(self) -> bool:
        return self.index is not None


def find_nonzero(P: PointSet, f: Callable, threshold: float = 0.0, chunk: int = 1) -> ScanResult:
    """First point of ``P`` (by index) with ``|f(x)| > threshold``.

    ``evaluations`` is ``index + 1`` on a hit and ``|P|`` on a miss.  With
    ``chunk > 1`` points are evaluated in batches, so the oracle may see up
    to ``chunk - 1`` calls beyond that count; keep ``chunk = 1`` when the
    oracle's own counter must agree.
    """
    pts = P.points
    n = len(pts)
    fd = getattr(f, "d", None)
    if n and fd is not None and fd != P.d:
        raise UsageError(f"point set has d={P.d} but the oracle expects d={fd}")
    if chunk <= 1:
        for k in range(n):
            v = float(f(pts[k]))
            if abs(v) > threshold:
                return ScanResult(k, pts[k].copy(), v, k + 1)
        return ScanResult(None, None, 0.0, n)
    for start in range(0, n, chunk):
        vals = np.asarray(f(pts[start:start + chunk]), dtype=float)
        hits = np.flatnonzero(np.abs(vals) > threshold)
        if hits.size:
            k = start + int(hits[0])
            return ScanResult(k, pts[k].copy(), float(vals[hits[0]]), k + 1)
    return ScanResult(None, None, 0.0, n)


@dataclass
class DetectorReport:
    """Result of :func:`is_detector_empirical`.

    ``tested`` functions had norm above ``eps``; ``skipped`` draws stayed at
    or below ``eps`` after every retry.  Each failure is recorded as
    ``(draw, attempt, norm)``.
    """

    tested: int = 0
    skipped: int = 0
    failures: list = field(default_factory=list)

    @property
    def n_failures(self) -> int:
        return len(self.failures)

    @property
    def passed(self) -> bool:
        return not self.failures


def draw_above(cls: SmoothnessClass, eps: float, seed: int, draw: int, kind: str = "mixed"):
    """Class member with norm above ``eps`` from streams ``(seed, draw, attempt, i)``, or ``None``.

    Each attempt that lands at or below ``eps`` is first blown up to the
    largest in-class multiple; after ``MAX_EMPIRICAL_ATTEMPTS`` it gives up.
    """
    for attempt in range(MAX_EMPIRICAL_ATTEMPTS):
        # factors are drawn one by one; once even the rescaled norms multiply
        # to at most eps the attempt is lost, and the remaining streams are
        # never touched, so the outcome equals drawing everything first
        factors, reach = [], 1.0
        for i in range(cls.d):
            g = class_member(cls, stream(seed, draw, attempt, i), kind)
            reach *= rescaled_norm(g, cls.M)
            if reach <= eps:
                break
            factors.append(g)
        if len(factors) < cls.d:
            continue
        f = RankOneFunction(factors)
        if f.sup_norm <= eps:
            f = maximal_rescale(f, cls)
        if f.sup_norm > eps:
            return f, attempt
    return None, MAX_EMPIRICAL_ATTEMPTS


def rescaled_norm(g: UnivariateFactor, M: float) -> float:
    """Sup norm of the largest in-class multiple of ``g``."""
    if g.sup_norm == 0.0:
        return 0.0
    if g.deriv_r_sup == 0.0:
        return 1.0
    return min(1.0, g.sup_norm * M / g.deriv_r_sup)


def is_detector_empirical(
    P: PointSet,
    cls: SmoothnessClass,
    eps: float,
    trials: int,
    seed: int,
    kind: str = "mixed",
    max_draws: Optional[int] = None,
) -> DetectorReport:
    """Try to falsify the detector property with ``trials`` in-class functions of norm above ``eps``.

    Draws that cannot be pushed above ``eps`` are skipped and replaced, up
    to ``max_draws`` draws in total (default ``50 * trials``).
    """
    if trials < 1:
        raise UsageError("trials must be >= 1")
    if P.d != cls.d:
        raise UsageError(f"point set has d={P.d} but the class has d={cls.d}")
    max_draws = 50 * trials if max_draws is None else max_draws
    report = DetectorReport()
    draw = 0
    while report.tested < trials and draw < max_draws:
        f, attempt = draw_above(cls, eps, seed, draw, kind)
        if f is None:
            report.skipped += 1
        else:
            report.tested += 1
            if not find_nonzero(P, f, chunk=4096).found:
                report.failures.append((draw, attempt, f.sup_norm))
        draw += 1
    return report
