import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rankone.errors import UsageError
from rankone.interpolation import Approximant, constant_polynomial
from rankone.tensor_model import (
    KINDS,
    RankOneFunction,
    Regime,
    SmoothnessClass,
    UnivariateFactor,
    class_member,
    constant_factor,
    eval_product,
    fiber,
    ones,
    random_factor,
    random_function,
    regime_of,
    rooted_factor,
    stream,
    sup_error_estimate,
    zeros,
)


def linear(a, b, r=1):
    """``a + b x`` as a one-piece factor."""
    return UnivariateFactor([0.0, 1.0], [[a, b] + [0.0] * (r - 1)], r)


def exact_values(g: UnivariateFactor, n: int):
    """Values at ``k/n`` in exact rational arithmetic from the stored float coefficients."""
    b = [Fraction(v) for v in g.breakpoints]
    rows = [[Fraction(c) for c in row] for row in g.coeffs]
    out, k = [], 0
    for i in range(n + 1):
        x = Fraction(i, n)
        while k < len(rows) - 1 and x >= b[k + 1]:
            k += 1
        t, acc = x - b[k], Fraction(0)
        for c in reversed(rows[k]):
            acc = acc * t + c
        out.append(acc)
    return out


def exact_max_difference(g: UnivariateFactor, n: int = 10_000) -> float:
    """Largest |r-th forward difference| / h^r on the grid, computed exactly."""
    v = exact_values(g, n)
    for _ in range(g.r):
        v = [b - a for a, b in zip(v, v[1:])]
    return float(max(abs(x) for x in v) * n**g.r)


# --- classes and regimes ------------------------------------------------------


@pytest.mark.parametrize(
    "r, M, regime",
    [
        (1, 1.0, Regime.SMALL),
        (1, 1.5, Regime.MODERATE),
        (1, 2.0, Regime.LARGE),
        (2, 2.0, Regime.SMALL),
        (2, 3.0, Regime.MODERATE),
        (2, 8.0, Regime.LARGE),
        (3, 6.0, Regime.SMALL),
        (3, 47.9, Regime.MODERATE),
        (3, 48.0, Regime.LARGE),
    ],
)
def test_regime_boundaries(r, M, regime):
    assert regime_of(r, M) == regime


@given(st.integers(1, 6), st.floats(1e-6, 1e6))
def test_regimes_partition(r, M):
    rf = math.factorial(r)
    flags = [M >= 2**r * rf, rf < M < 2**r * rf, M <= rf]
    assert sum(flags) == 1
    assert regime_of(r, M) == [Regime.LARGE, Regime.MODERATE, Regime.SMALL][flags.index(True)]


def test_rho():
    assert SmoothnessClass(2, 8.0).rho == pytest.approx(math.sqrt(8.0))
    assert SmoothnessClass(3, 1.0).rho == 3.0


@pytest.mark.parametrize("args", [(0, 1.0, 1), (1, 0.0, 1), (1, -1.0, 1), (1, 1.0, 0), (1.5, 1.0, 1)])
def test_class_validation(args):
    with pytest.raises(UsageError):
        SmoothnessClass(*args)


# --- evaluation ---------------------------------------------------------------


def test_eval_examples():
    assert ones(3)([0.2, 0.7, 1.0]) == 1.0
    assert zeros(3)([0.2, 0.7, 1.0]) == 0.0
    f = RankOneFunction([linear(0.0, 1.0), linear(0.0, 1.0)])
    assert f([0.5, 0.5]) == 0.25


def test_eval_dimension_mismatch():
    with pytest.raises(UsageError):
        ones(2)([0.5, 0.5, 0.5])
    with pytest.raises(UsageError):
        ones(2)([0.5, 1.5])


def test_eval_batch_matches_points():
    f = random_function(SmoothnessClass(2, 3.0, 3), 11, 0)
    X = stream(11, 99).random((50, 3))
    batch = f(X)
    assert np.array_equal(batch, [f(x) for x in X])


def test_eval_is_left_to_right_product():
    f = random_function(SmoothnessClass(3, 20.0, 4), 5, 1)
    for x in stream(5, 2).random((100, 4)):
        assert f(x) == eval_product(f, x)


# --- sup norms ----------------------------------------------------------------


def test_sup_norm_examples():
    assert ones(4).sup_norm == 1.0
    f = RankOneFunction([linear(0.0, 1.0), linear(1.0, -1.0)])
    assert f.sup_norm == 1.0
    # 2(x - 1/2) on [0, 1/2], zero on [1/2, 1]
    g = UnivariateFactor([0.0, 0.5, 1.0], [[-1.0, 2.0], [0.0, 0.0]], 1)
    assert RankOneFunction([g] * 3).sup_norm == 1.0


def test_sup_norm_of_interior_maximum():
    # 4x(1-x) peaks at 1/2 with value 1
    g = UnivariateFactor([0.0, 1.0], [[0.0, 4.0, -4.0]], 2)
    assert g.sup_norm == pytest.approx(1.0, abs=1e-15)
    assert g.deriv_r_sup == pytest.approx(8.0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_sup_norm_matches_grid(d):
    cls = SmoothnessClass(2, 4.0, d)
    n = 4001
    x = np.linspace(0.0, 1.0, n)
    for k in range(100 // 3 + 1):
        f = random_function(cls, 21, d, k)
        per_factor = [np.max(np.abs(g(x))) for g in f.factors]
        grid = math.prod(per_factor)
        # grid under-estimates by at most |g'| * h/2 per factor
        slack = sum(2.0 * (1.0 / (n - 1)) for _ in range(d))
        assert grid <= f.sup_norm + 1e-12
        assert f.sup_norm <= grid + slack


# --- generated factors --------------------------------------------------------


@pytest.mark.parametrize("r, M", [(1, 1.0), (1, 5.0), (2, 2.0), (2, 10.0), (3, 6.0), (3, 50.0)])
@pytest.mark.parametrize("kind", KINDS)
def test_generated_factors_are_members(r, M, kind):
    cls = SmoothnessClass(r, M)
    for k in range(20):
        g = class_member(cls, stream(3, r, k), kind)
        assert g.sup_norm <= 1.0
        assert g.deriv_r_sup <= M
        assert g.join_defect() <= 1e-9
        assert g.is_member(M)


def test_random_factor_derivative_by_exact_differences():
    # fixed seed, r = 2, M = 2: exact second differences on a 10^4 grid
    g = random_factor(SmoothnessClass(2, 2.0), stream(2024))
    assert g.deriv_r_sup <= 2.0
    assert exact_max_difference(g) <= g.deriv_r_sup + 1e-6


@pytest.mark.parametrize("r, M", [(1, 2.0), (2, 3.0), (3, 27.0)])
def test_derivative_cache_dominates_differences(r, M):
    cls = SmoothnessClass(r, M)
    for k in range(4):
        g = class_member(cls, stream(8, r, k), KINDS[k])
        assert exact_max_difference(g, 2000) <= g.deriv_r_sup + 1e-6


def test_sup_norm_cache_is_exact_maximum():
    cls = SmoothnessClass(3, 30.0)
    for k in range(30):
        g = random_factor(cls, stream(9, k))
        x = np.linspace(0.0, 1.0, 20001)
        assert np.max(np.abs(g(x))) <= g.sup_norm + 1e-14
        assert g.sup_norm - np.max(np.abs(g(x))) <= 3.0 / 20000


def test_rooted_factor_vanishes_at_roots():
    cls = SmoothnessClass(3, 10.0)
    roots = [0.2, 0.5, 0.9]
    for g in (rooted_factor(cls, roots), rooted_factor(cls, roots, stream(4))):
        assert np.max(np.abs(g(np.array(roots)))) <= 1e-12
        assert g.is_member(10.0)


def test_streams_are_order_independent():
    a = stream(7, 3, 1).random(5)
    stream(7, 0).random(100)
    assert np.array_equal(a, stream(7, 3, 1).random(5))
    assert not np.array_equal(a, stream(7, 3, 2).random(5))


# --- fibers -------------------------------------------------------------------


def test_fiber_examples():
    x = np.linspace(0.0, 1.0, 11)
    assert np.all(fiber(ones(3), 1, [0.2, 0.3, 0.4])(x) == 1.0)
    f = RankOneFunction([linear(0.0, 1.0), linear(0.0, 1.0)])
    assert np.allclose(fiber(f, 0, [0.3, 0.5])(x), 0.5 * x)
    assert np.all(fiber(f, 1, [0.0, 0.9])(x) == 0.0)


def test_fiber_index_out_of_range():
    with pytest.raises(UsageError):
        fiber(ones(2), 2, [0.5, 0.5])


def test_fiber_derivative_bound():
    for k in range(100):
        r = 1 + k % 3
        M = [1.0, 3.0, 30.0][k % 3]
        cls = SmoothnessClass(r, M, 3)
        f = random_function(cls, 31, k)
        rng = stream(31, k, 1000)
        i, z = int(rng.integers(3)), rng.random(3)
        g = fiber(f, i, z)
        assert g.deriv_r_sup <= M * (1.0 + 1e-12)
        t = rng.random(20)
        pts = np.repeat(z[None, :], 20, axis=0)
        pts[:, i] = t
        assert np.allclose(g(t), f(pts), rtol=1e-13, atol=1e-15)


def test_generic_oracle_fiber():
    f = RankOneFunction([linear(0.0, 1.0), linear(0.0, 1.0)])
    g = fiber(lambda pts: f(pts), 0, [0.3, 0.5])
    assert np.allclose(g(np.array([0.2, 0.4])), [0.1, 0.2])


# --- error estimation ---------------------------------------------------------


def test_error_estimate_examples():
    f = random_function(SmoothnessClass(2, 2.0, 2), 1, 1)
    assert sup_error_estimate(ones(2), Approximant(1.0, (constant_polynomial(1.0),) * 2)) == 0.0
    x1 = RankOneFunction([linear(0.0, 1.0)])
    budget = 64
    assert sup_error_estimate(x1, Approximant.zero(1), budget=budget) >= 1.0 - 1.0 / budget
    three_quarters = Approximant(0.75, (constant_polynomial(1.0),) * 3)
    assert sup_error_estimate(ones(3), three_quarters) == pytest.approx(0.25, abs=1e-15)
    assert sup_error_estimate(f, Approximant.zero(2)) <= f.sup_norm + 1e-15


def test_error_estimate_budget_floor():
    with pytest.raises(UsageError):
        sup_error_estimate(ones(3), Approximant.zero(3), budget=7)


def test_error_estimate_finds_narrow_peak():
    # a bump of width 0.01 is below grid resolution; the refinement must still climb it
    from rankone.tensor_model import bump_factor

    g = bump_factor(SmoothnessClass(2, 1e6), 0.4031, 0.4131)
    est = sup_error_estimate(RankOneFunction([g]), Approximant.zero(1), budget=200)
    assert est <= g.sup_norm + 1e-15
    assert est >= 0.5 * g.sup_norm


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_error_estimate_is_lower_bound_of_norm(seed, d):
    # never above the exact norm; close to it for smooth factors (narrow bumps can hide between grid nodes)
    f = random_function(SmoothnessClass(2, 5.0, d), seed)
    est = sup_error_estimate(f, Approximant.zero(d), budget=512)
    assert est <= f.sup_norm * (1.0 + 1e-12)
    smooth = random_function(SmoothnessClass(2, 5.0, d), seed, kind="random")
    assert sup_error_estimate(smooth, Approximant.zero(d), budget=512) >= 0.5 * smooth.sup_norm


def test_constant_factor_norm():
    assert constant_factor(-1.0).sup_norm == 1.0
