"""Deterministic recovery of rank-one tensors from point evaluations.

The main entry points are :func:`rankone.recover.approximate` (detect a
non-zero, then interpolate along fibers), the detector constructions in
:mod:`rankone.detectors`, and the fooling families in
:mod:`rankone.adversary`.
"""

from .adversary import (
    FoolingFamily,
    Tractability,
    classify_tractability,
    evade,
    fooling_family_large,
    fooling_family_moderate,
    fooling_family_small,
)
from .detectors import (
    DetectorParams,
    build_detector,
    detector_large,
    detector_moderate,
    detector_small,
    find_nonzero,
    is_detector_empirical,
)
from .errors import DomainError, NumericError, RankOneError, ResourceError, UsageError
from .interpolation import Approximant, PiecewisePolynomial, choose_m, interpolate_univariate, reconstruct
from .pointsets import PointSet, diagonal_set, digital_net, dispersion_exact, halton_baseline_size, low_dispersion_set
from .recover import Config, CostReport, CountingOracle, approximate, cost_bound
from .tensor_model import (
    RankOneFunction,
    Regime,
    SmoothnessClass,
    UnivariateFactor,
    fiber,
    random_function,
    sup_error_estimate,
)

__version__ = "0.1.0"
