import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rankone.detectors import (
    DetectorParams,
    build_detector,
    c_delta,
    choose_delta,
    detector_cardinality,
    detector_header,
    detector_large,
    detector_moderate,
    detector_small,
    empty_interval_length,
    find_nonzero,
    is_detector_empirical,
    largest_power_above,
    moderate_params,
    pseudo_dimension,
    ru16_size,
    small_params,
    zero_free_interval_exists,
)
from rankone.errors import DomainError
from rankone.pointsets import PointSet, dispersion_exact
from rankone.tensor_model import (
    RankOneFunction,
    Regime,
    SmoothnessClass,
    UnivariateFactor,
    ones,
    zeros,
)


def linear(a, b, r=1):
    return UnivariateFactor([0.0, 1.0], [[a, b] + [0.0] * (r - 1)], r)


def factor_with_norm(norm, r):
    return UnivariateFactor([0.0, 1.0], [[norm] + [0.0] * r], r)


# --- parameters ---------------------------------------------------------------


def test_empty_interval_examples():
    assert empty_interval_length(linear(0.0, 1.0), SmoothnessClass(1, 1.0)) == 1.0
    assert empty_interval_length(factor_with_norm(0.5, 2), SmoothnessClass(2, 2.0)) == 0.5
    assert empty_interval_length(factor_with_norm(1.0, 1), SmoothnessClass(1, 4.0)) == 0.25


def test_zero_free_interval_for_linear():
    g = linear(-0.5, 1.0)  # single zero at 1/2
    assert zero_free_interval_exists(g, 0.5)
    assert not zero_free_interval_exists(g, 0.51)


def test_c_delta_examples():
    assert c_delta(1, 1.0, 0.25) == 0.75
    assert c_delta(1, 2.0, 0.5) == 2.0
    assert c_delta(3, 10.0, 1e-12) == pytest.approx(10.0 / 48.0)


def test_choose_delta_examples():
    assert choose_delta(1, 1.5) == pytest.approx(1.0 / 12.0)
    assert c_delta(1, 1.5, 1.0 / 12.0) == pytest.approx(0.875)
    assert choose_delta(1, 2.0 - 1e-9) == pytest.approx(0.0, abs=1e-8)
    B = 2.0 * math.sqrt(2.0 / 3.0)
    assert choose_delta(2, 3.0) == pytest.approx((B - 1.0) / 4.0)
    assert choose_delta(2, 3.0) == pytest.approx(0.158248, abs=1e-6)
    with pytest.raises(DomainError):
        choose_delta(1, 2.0)


@given(st.integers(1, 6), st.floats(0.01, 0.999))
def test_choose_delta_keeps_c_delta_below_one(r, frac):
    top = 2**r * math.factorial(r)
    M = frac * top
    delta = choose_delta(r, M)
    assert 0.0 < delta <= 0.5
    assert c_delta(r, M, delta) < 1.0


def test_pseudo_dimension_examples():
    assert largest_power_above(0.5, 0.1, 10) == 3
    assert largest_power_above(0.5, 0.25, 10) == 1
    assert largest_power_above(0.5, 0.001, 2) == 2


@given(st.floats(0.01, 0.99), st.floats(1e-6, 0.999), st.integers(0, 30))
def test_pseudo_dimension_is_largest_power(base, eps, cap):
    k = largest_power_above(base, eps, cap)
    direct = max(j for j in range(cap + 1) if j == 0 or base**j > eps)
    assert k == direct
    closed = min(math.ceil(math.log(eps) / math.log(base)) - 1, cap)
    assert abs(k - max(closed, 0)) <= 1


def test_pseudo_dimension_via_class():
    delta = choose_delta(1, 1.5)
    assert pseudo_dimension(1, 1.5, 3, 0.9, delta) == 0
    assert pseudo_dimension(1, 1.5, 30, 0.1, delta) == largest_power_above(0.875, 0.1, 30) == 17


def test_ru16_example():
    assert ru16_size(2, 2, 0.25) == 313


def test_params_invariants():
    p = moderate_params(SmoothnessClass(2, 5.0, 4), 0.05)
    assert p.c_delta == pytest.approx(5.0 * (1 + 2 * p.delta) ** 2 / 8.0)
    assert p.c_delta < 1.0
    assert p.d0 == 4 or p.c_delta ** (p.d0 + 1) <= 0.05
    s = small_params(SmoothnessClass(2, 2.0, 3), 0.3)
    assert s.gamma == pytest.approx((1.0 - 2.0 ** (-1.0 / 3.0)) * math.sqrt(0.3))
    assert s.gamma < 0.5


# --- Large ------------------------------------------------------------------------


def test_large_examples():
    cls = SmoothnessClass(2, 8.0, 2)
    P = detector_large(cls, 0.25, "verified")
    assert P.meta["params"].target_dispersion == pytest.approx(0.0625)
    assert detector_cardinality(cls, 0.25, "formula") == 2**15 * 8 * 2 == 524288
    P = detector_large(SmoothnessClass(1, 1.0, 1), 0.25)
    assert len(P) <= 4 and dispersion_exact(P) <= 0.25
    near_one = detector_large(SmoothnessClass(1, 4.0, 2), 1.0 - 1e-12).meta["params"]
    assert near_one.target_dispersion == pytest.approx(4.0**-2)


@pytest.mark.parametrize("r, M, d, eps", [(1, 2.0, 2, 0.5), (2, 8.0, 3, 0.5), (3, 48.0, 2, 0.1)])
def test_large_verified_dispersion(r, M, d, eps):
    P = detector_large(SmoothnessClass(r, M, d), eps)
    assert P.verified
    assert dispersion_exact(P) <= P.claimed_dispersion


# --- Moderate ---------------------------------------------------------------------


def test_moderate_trivial_pseudo_dimension():
    P = detector_moderate(SmoothnessClass(1, 1.5, 3), 0.9)
    assert P.meta["params"].d0 == 0
    assert np.array_equal(P.points, [[0.5, 0.5, 0.5]])
    P = detector_moderate(SmoothnessClass(3, 27.0, 2), 0.9)
    assert P.meta["params"].d0 == 0 and len(P) == 2 * 2 + 1


@pytest.mark.parametrize("r, M, d, eps", [(2, 3.0, 3, 0.5), (1, 1.5, 3, 0.1), (2, 5.0, 3, 0.1), (3, 27.0, 3, 0.5), (2, 5.0, 4, 0.6)])
def test_moderate_cardinality(r, M, d, eps):
    cls = SmoothnessClass(r, M, d)
    P = detector_moderate(cls, eps)
    p = P.meta["params"]
    n2 = (r - 1) * (d - p.d0) + 1 if p.d0 < d else 1
    assert len(P) % (math.comb(d, p.d0) * n2) == 0
    assert len(P) == detector_cardinality(cls, eps, "verified")


def test_moderate_structure_and_order():
    cls = SmoothnessClass(2, 3.0, 3)
    P = detector_moderate(cls, 0.3)
    p = P.meta["params"]
    d0 = p.d0
    assert 0 < d0 < 3
    subsets = list(itertools.combinations(range(3), d0))
    n2 = (2 - 1) * (3 - d0) + 1
    block = len(P) // len(subsets)
    diag = 0.5 - p.delta + 2.0 * p.delta * np.arange(n2) / (n2 - 1)
    for s, J in enumerate(subsets):
        rest = [i for i in range(3) if i not in J]
        pts = P.points[s * block:(s + 1) * block]
        # rest coordinates sit on the diagonal and cycle fastest
        assert np.allclose(pts[:n2, rest], np.repeat(diag[:, None], len(rest), axis=1))
        assert np.all(pts[:, rest] == pts[:, rest[:1]])
        assert np.all(pts[:n2, list(J)] == pts[0, list(J)])


def test_moderate_dedup():
    cls = SmoothnessClass(2, 3.0, 3)
    full = detector_moderate(cls, 0.3)
    slim = detector_moderate(cls, 0.3, dedup=True)
    assert len(slim) <= len(full)
    assert len({tuple(p) for p in full.points}) == len(slim)


def test_moderate_regime_check():
    with pytest.raises(DomainError):
        detector_moderate(SmoothnessClass(1, 1.0, 2), 0.5)
    with pytest.raises(DomainError):
        detector_moderate(SmoothnessClass(1, 2.0, 2), 0.5, force=True)


# --- Small ------------------------------------------------------------------------


def test_small_examples():
    cls = SmoothnessClass(2, 2.0, 2)
    assert len(detector_small(cls, 0.25, "formula")) == 939
    assert detector_cardinality(cls, 0.25, "formula") == 939
    p = small_params(SmoothnessClass(1, 1.0, 2), 0.01)
    assert p.gamma == pytest.approx(0.0029289, abs=1e-7)
    P = detector_small(SmoothnessClass(1, 1.0, 2), 0.01)
    assert len(P) == detector_cardinality(SmoothnessClass(1, 1.0, 2), 0.01, "verified")
    p = small_params(SmoothnessClass(2, 2.0, 1), 0.25)
    assert p.gamma == pytest.approx(0.25)


def test_small_shifts():
    cls = SmoothnessClass(2, 2.0, 1)
    P = detector_small(cls, 0.25)
    gamma = P.meta["params"].gamma
    pts = P.points.reshape(-1, 2)
    # x outer, j inner: consecutive pairs differ by exactly gamma
    assert np.allclose(pts[:, 1] - pts[:, 0], gamma)


@pytest.mark.parametrize("r, d, eps", [(1, 2, 0.1), (2, 2, 0.5), (2, 3, 0.1), (3, 3, 0.5)])
def test_small_cardinality(r, d, eps):
    cls = SmoothnessClass(r, math.factorial(r), d)
    P = detector_small(cls, eps)
    assert len(P) == ((r - 1) * d + 1) * (len(P) // ((r - 1) * d + 1))
    assert len(P) == detector_cardinality(cls, eps, "verified")


def test_small_regime_check():
    with pytest.raises(DomainError):
        detector_small(SmoothnessClass(1, 1.5, 2), 0.5)
    assert len(detector_small(SmoothnessClass(1, 1.5, 2), 0.5, force=True)) > 0


# --- headers ----------------------------------------------------------------------


def test_header_format():
    cls = SmoothnessClass(2, 3.0, 2)
    P = build_detector(cls, 0.5)
    h = P.meta["header"]
    assert h.startswith("# regime=moderate r=2 M=3 d=2 eps=0.5 params=")
    assert "delta=" in h and "d0=" in h and ";" in h
    assert detector_header(cls, 0.5, P.meta["params"]) == h


def test_override_builds_other_construction():
    cls = SmoothnessClass(1, 1.0, 2)
    P = build_detector(cls, 0.5, regime=Regime.LARGE)
    assert P.meta["params"].regime == Regime.LARGE
    assert dispersion_exact(P) <= P.claimed_dispersion


# --- scanning ---------------------------------------------------------------------


def test_find_nonzero_examples():
    P = PointSet(2, [[0.0, 0.5], [0.5, 0.5]])
    assert find_nonzero(P, ones(2)).index == 0
    miss = find_nonzero(P, zeros(2))
    assert miss.index is None and miss.evaluations == 2
    x = linear(0.0, 1.0)
    hit = find_nonzero(P, RankOneFunction([x, x]))
    assert hit.index == 1 and hit.evaluations == 2 and hit.value == 0.25


def test_find_nonzero_threshold_and_chunks():
    x = linear(0.0, 1.0)
    f = RankOneFunction([x])
    P = PointSet(1, [[0.0], [0.1], [0.2], [0.9]])
    assert find_nonzero(P, f, threshold=0.15).index == 2
    for chunk in (1, 2, 3, 10):
        assert find_nonzero(P, f, chunk=chunk).index == 1


def test_empirical_harness_examples():
    cls = SmoothnessClass(1, 1.0, 2)
    empty = PointSet(2, np.empty((0, 2)))
    assert is_detector_empirical(empty, cls, 0.5, 1, 0).n_failures == 1
    g = (np.arange(10) + 0.5) / 10.0
    grid = PointSet(2, np.array(list(itertools.product(g, g))))
    rep = is_detector_empirical(grid, cls, 0.5, 50, 1)
    assert rep.tested == 50 and rep.passed


def test_params_items_round_trip():
    p = DetectorParams(Regime.SMALL, 1.0, 0.25, gamma=0.1)
    keys = [k for k, _ in p.items()]
    assert keys[:2] == ["rho", "target_dispersion"] and "gamma" in keys
