"""Detect-then-interpolate recovery with exact cost accounting.

``approximate`` scans a detector for a non-zero of ``f``.  On a hit at
``z`` it rebuilds ``f`` from fibers through ``z``; on a miss it returns the
zero function, which is within ``eps`` whenever the detector is valid.  The
oracle is wrapped in a counter, so the reported costs are the calls that
actually happened.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .detectors import build_detector, choose_delta, c_delta, draw_above, find_nonzero
from .errors import UsageError
from .pointsets import PointSet
from .interpolation import Approximant, choose_m, interpolation_constant, reconstruct
from .tensor_model import Regime, SmoothnessClass, random_function, sup_error_estimate


class CountingOracle:
    """Wraps an oracle and counts evaluated points per phase.

    A batch of ``n`` points counts as ``n`` calls.
    """

    def __init__(self, f: Callable, phase: str = "detector"):
        self.f = f
        self.phase = phase
        self.counts: dict = {}

    @property
    def d(self):
        return getattr(self.f, "d", None)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        n = 1 if x.ndim == 1 else x.shape[0]
        self.counts[self.phase] = self.counts.get(self.phase, 0) + n
        return self.f(x)


@dataclass(frozen=True)
class Config:
    """Knobs for :func:`approximate`.

    ``regime`` overrides the class's own regime when choosing the detector;
    ``threshold`` replaces the exact zero test by ``|f(x)| > threshold``.
    """

    mode: str = "verified"
    c1: float = 1.0
    regime: Optional[Regime] = None
    delta: Optional[float] = None
    dedup: bool = False
    threshold: float = 0.0


@dataclass(frozen=True)
class CostReport:
    detector_evals: int
    interpolation_evals: int
    total: int
    predicted_bound: float
    regime: Regime
    detector_size: int
    m: int
    oracle_calls: int

    @property
    def worst_case(self) -> int:
        """``|P| + m``: the most any input can cost."""
        return self.detector_size + self.m


def approximate(f: Callable, cls: SmoothnessClass, eps: float, config: Optional[Config] = None):
    """Recover ``f`` to sup error ``eps`` (given a valid detector and a large enough ``c1``).

    Returns
    -------
    (Approximant, CostReport)
    """
    config = Config() if config is None else config
    if not 0.0 < eps < 1.0:
        raise UsageError(f"eps must lie in (0, 1), got {eps}")
    regime = cls.regime if config.regime is None else Regime(config.regime)
    P = build_detector(cls, eps, config.mode, regime, config.delta, config.dedup)
    return approximate_with_detector(f, cls, eps, P, config, regime)


def approximate_with_detector(
    f: Callable,
    cls: SmoothnessClass,
    eps: float,
    P: PointSet,
    config: Optional[Config] = None,
    regime: Optional[Regime] = None,
):
    """Same as :func:`approximate` but scanning the given point set ``P``."""
    config = Config() if config is None else config
    fd = getattr(f, "d", cls.d)
    if fd != cls.d or P.d != cls.d:
        raise UsageError(f"oracle (d={fd}) and point set (d={P.d}) must match the class (d={cls.d})")
    regime = cls.regime if regime is None else Regime(regime)
    m = choose_m(cls, eps, config.c1)
    oracle = CountingOracle(f, "detector")
    hit = find_nonzero(P, oracle, threshold=config.threshold)
    if hit.found:
        oracle.phase = "interpolation"
        a = reconstruct(oracle, hit.point, cls, m, anchor_value=hit.value)
    else:
        a = Approximant.zero(cls.d)
    det = oracle.counts.get("detector", 0)
    interp = oracle.counts.get("interpolation", 0)
    report = CostReport(
        detector_evals=det,
        interpolation_evals=interp,
        total=det + interp,
        predicted_bound=cost_bound(cls, eps, config.c1, regime, config.delta),
        regime=regime,
        detector_size=len(P),
        m=m,
        oracle_calls=oracle.total,
    )
    return a, report


# ---------------------------------------------------------------------------
# cost bounds


def bound_constants(cls: SmoothnessClass, eps: float, c1: float = 1.0, delta: Optional[float] = None) -> dict:
    """Constants of the three cost bounds.

    ``c1 = 2^8 rho + C``, ``c2 = 2r + C``, ``c4 = 85 r + C`` with ``C`` the
    interpolation constant, and ``c3 = ln(2^7 rho) (1 + 1/ln(1/c_delta))``
    when ``M < 2^r r!``.
    """
    C = interpolation_constant(cls, c1)
    rho, r = cls.rho, cls.r
    out = {"C": C, "c1": 2.0**8 * rho + C, "c2": 2.0 * r + C, "c4": 85.0 * r + C}
    if cls.M < 2**r * math.factorial(r):
        dl = choose_delta(r, cls.M) if delta is None else delta
        cd = c_delta(r, cls.M, dl)
        out["c_delta"] = cd
        out["c3"] = math.log(2.0**7 * rho) * (1.0 + 1.0 / math.log(1.0 / cd))
    return out


def cost_bound(
    cls: SmoothnessClass,
    eps: float,
    c1: float = 1.0,
    regime: Optional[Regime] = None,
    delta: Optional[float] = None,
) -> float:
    """Worst-case cost bound for the regime.

    Large: ``c1^d eps^(-1/r)``.  Moderate:
    ``c2 exp(c3 (1 + ln(1/eps)) (1 + ln d))``.  Small:
    ``c4 d^2 eps^(-1/r) max(1, ln eps^(-1/r))``.  A Moderate bound past
    the double range is returned as ``inf``.
    """
    if not 0.0 < eps < 1.0:
        raise UsageError(f"eps must lie in (0, 1), got {eps}")
    regime = cls.regime if regime is None else Regime(regime)
    k = bound_constants(cls, eps, c1, delta)
    r, d = cls.r, cls.d
    if regime == Regime.LARGE:
        return k["c1"] ** d * eps ** (-1.0 / r)
    if regime == Regime.MODERATE:
        expo = log_moderate_exponent(k["c3"], eps, d)
        # beyond double range the bound is reported as infinite
        return k["c2"] * math.exp(expo) if expo < 700.0 else math.inf
    s = eps ** (-1.0 / r)
    return k["c4"] * d**2 * s * max(1.0, math.log(s))


def log_moderate_exponent(c3: float, eps: float, d: int) -> float:
    return c3 * (1.0 + math.log(1.0 / eps)) * (1.0 + math.log(d))


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class TrialRow:
    seed: int
    trial: int
    regime: str
    d: int
    eps: float
    detector_size: int
    m: int
    detector_evals: int
    interp_evals: int
    total: int
    bound: float
    measured_error: float
    norm: float
    passed: bool

    def as_dict(self) -> dict:
        return asdict(self)


def trial_function(cls: SmoothnessClass, eps: float, seed: int, trial: int, source: str = "generated"):
    """Function used by trial ``trial``: a member with norm above ``eps`` when one is found, else a plain draw."""
    if source == "zero":
        from .tensor_model import zeros

        return zeros(cls.d, cls.r)
    f, _ = draw_above(cls, eps, seed, trial)
    return f if f is not None else random_function(cls, seed, trial, 0)


def run_trial(
    cls: SmoothnessClass,
    eps: float,
    seed: int,
    trial: int,
    config: Optional[Config] = None,
    source: str = "generated",
    error_budget: int = 8192,
    detector: Optional[PointSet] = None,
) -> TrialRow:
    """One recovery with every check applied.

    A trial passes when the measured error is at most ``eps``, the cost is
    at most ``|P| + m``, the counter agrees with the phase totals, a miss
    only happens for norm at most ``eps``, and (formula mode) the cost is at
    most the bound.  ``detector`` replaces the built detector (replay).
    """
    config = Config() if config is None else config
    f = trial_function(cls, eps, seed, trial, source)
    if detector is None:
        a, rep = approximate(f, cls, eps, config)
    else:
        a, rep = approximate_with_detector(f, cls, eps, detector, config, config.regime)
    err = sup_error_estimate(f, a, budget=max(error_budget, 2**cls.d))
    ok = err <= eps and rep.total <= rep.worst_case and rep.total == rep.oracle_calls
    if rep.interpolation_evals == 0:
        ok = ok and f.sup_norm <= eps
    if config.mode == "formula":
        ok = ok and rep.total <= rep.predicted_bound
    return TrialRow(
        seed, trial, rep.regime.value, cls.d, eps, rep.detector_size, rep.m,
        rep.detector_evals, rep.interpolation_evals, rep.total, rep.predicted_bound,
        err, f.sup_norm, bool(ok),
    )


def cost_actual_vs_bound(
    cls: SmoothnessClass,
    eps: float,
    trials: int,
    seed: int,
    config: Optional[Config] = None,
    threads: int = 1,
    source: str = "generated",
    detector: Optional[PointSet] = None,
) -> list:
    """Rows of :func:`run_trial` for ``trials`` trials, in trial order regardless of ``threads``."""
    if trials < 1:
        raise UsageError("trials must be >= 1")
    config = Config() if config is None else config
    # build shared state once so worker threads only read it
    if detector is None:
        build_detector(cls, eps, config.mode, config.regime, config.delta, config.dedup)

    def one(t):
        return run_trial(cls, eps, seed, t, config, source, detector=detector)

    if threads <= 1:
        return [one(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(trials)))
