"""Piecewise polynomial interpolation and anchored rank-one reconstruction.

A univariate function is sampled at ``r`` Chebyshev nodes in each of ``K``
equal cells and replaced by the per-cell interpolant of degree ``r - 1``.
On a cell of width ``h`` the remainder is at most ``|g^(r)| h^r / r!``.

A rank-one tensor is recovered from its fibers through an anchor ``z`` with
``f(z) != 0``: if ``p_i`` interpolates ``x -> f(z_1, .., x, .., z_d)`` then

    f(x) ~ f(z)^(1 - d) * p_1(x_1) * ... * p_d(x_d).
"""

import bisect
import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import _poly
from ._numbers import floor_snap
from .errors import DomainError, NumericError, UsageError
from .tensor_model import SmoothnessClass

TINY_ANCHOR = 1e-300


@dataclass(frozen=True, eq=False)
class PiecewisePolynomial:
    """Newton-form polynomial on each cell ``[breakpoints[k], breakpoints[k+1])``.

    ``nodes[k]`` and ``coeffs[k]`` are the interpolation nodes and divided
    differences of cell ``k``.  Jumps at breakpoints are allowed; evaluation
    is right-continuous and the last cell is closed.
    """

    breakpoints: np.ndarray
    nodes: np.ndarray
    coeffs: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.breakpoints) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1, 0, self.n_cells - 1)
        nodes, coef = self.nodes[k], self.coeffs[k]
        acc = coef[..., -1].copy()
        for j in range(coef.shape[-1] - 2, -1, -1):
            acc = acc * (x - nodes[..., j]) + coef[..., j]
        return acc

    @functools.cached_property
    def _scalar_tables(self):
        return self.breakpoints.tolist(), self.nodes.tolist(), self.coeffs.tolist()

    def at(self, t: float) -> float:
        """Scalar evaluation without numpy overhead."""
        b, nodes, coef = self._scalar_tables
        k = min(max(bisect.bisect_right(b, t) - 1, 0), len(coef) - 1)
        c, z = coef[k], nodes[k]
        acc = c[-1]
        for j in range(len(c) - 2, -1, -1):
            acc = acc * (t - z[j]) + c[j]
        return acc

    def monomial_pieces(self):
        """Ascending coefficients of each cell in the local variable ``x - breakpoints[k]``."""
        out = []
        for a, t, c in zip(self.breakpoints[:-1], self.nodes, self.coeffs):
            out.append(_poly.newton_to_monomial(t - a, c))
        return out


def constant_polynomial(value: float) -> PiecewisePolynomial:
    return PiecewisePolynomial(np.array([0.0, 1.0]), np.array([[0.5]]), np.array([[float(value)]]))


def cell_nodes(n_cells: int, r: int) -> np.ndarray:
    """First-kind Chebyshev nodes, ``r`` per cell, shape ``(n_cells, r)``; ``r = 1`` gives midpoints."""
    k = np.arange(r)
    ref = (1.0 - np.cos((2 * k + 1) * math.pi / (2 * r))) / 2.0
    lo = np.arange(n_cells) / n_cells
    return lo[:, None] + ref[None, :] / n_cells


def _fit(nodes: np.ndarray, values: np.ndarray) -> PiecewisePolynomial:
    n_cells = nodes.shape[0]
    coeffs = np.array([_poly.newton_coefficients(t, v) for t, v in zip(nodes, values)])
    breaks = np.arange(n_cells + 1) / n_cells
    return PiecewisePolynomial(breaks, nodes, coeffs)


def interpolate_univariate(g: Callable, m: int, r: int) -> PiecewisePolynomial:
    """Interpolate ``g`` with ``floor(m / r)`` cells of ``r`` nodes each.

    Parameters
    ----------
    g : callable
        Vectorised univariate function on ``[0, 1]``.
    m : int
        Evaluation budget; exactly ``r * floor(m / r)`` values are used.
    r : int
        Order; pieces have degree ``r - 1``.

    Returns
    -------
    PiecewisePolynomial
    """
    if r < 1 or m < r:
        raise UsageError(f"need m >= r >= 1, got m={m}, r={r}")
    nodes = cell_nodes(m // r, r)
    values = np.asarray(g(nodes.ravel()), dtype=float).reshape(nodes.shape)
    return _fit(nodes, values)


@dataclass(frozen=True, eq=False)
class Approximant:
    """``x -> scale * prod_i coordinate_interpolants[i](x_i)``."""

    scale: float
    coordinate_interpolants: tuple

    @property
    def d(self) -> int:
        return len(self.coordinate_interpolants)

    @classmethod
    def zero(cls, d: int) -> "Approximant":
        return cls(0.0, tuple(constant_polynomial(1.0) for _ in range(d)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        pts = x[None, :] if x.ndim == 1 else x
        if pts.shape[-1] != self.d:
            raise UsageError(f"expected points of dimension {self.d}, got shape {x.shape}")
        out = np.full(pts.shape[0], self.scale)
        for i, p in enumerate(self.coordinate_interpolants):
            out = out * p(pts[:, i])
        return float(out[0]) if x.ndim == 1 else out

    def grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        out = self.scale * self.coordinate_interpolants[0](axes[0])
        for i in range(1, self.d):
            out = np.multiply.outer(out, self.coordinate_interpolants[i](axes[i]))
        return out


def choose_m(cls: SmoothnessClass, eps: float, c1: float = 1.0) -> int:
    """Interpolation budget ``floor(C d^(1+1/r) eps^(-1/r))`` with ``C = 4 max(1, c1 M)^(1/r)``.

    Never below ``d * r``, the least budget that allows order-``r`` pieces in
    every coordinate.
    """
    if not 0.0 < eps < 1.0:
        raise UsageError(f"eps must lie in (0, 1), got {eps}")
    if not c1 > 0:
        raise UsageError("c1 must be positive")
    r, d = cls.r, cls.d
    C = interpolation_constant(cls, c1)
    m = floor_snap(C * d ** (1.0 + 1.0 / r) * eps ** (-1.0 / r))
    return max(m, d * r)


def interpolation_constant(cls: SmoothnessClass, c1: float = 1.0) -> float:
    return 4.0 * max(1.0, c1 * cls.M) ** (1.0 / cls.r)


def reconstruct_evals(d: int, r: int, m: int) -> int:
    """Oracle calls made by :func:`reconstruct` when the anchor value is supplied."""
    return d * r * ((m // d) // r)


def reconstruct(
    f: Callable,
    z_star,
    cls: SmoothnessClass,
    m: int,
    anchor_value: Optional[float] = None,
) -> Approximant:
    """Rebuild a rank-one tensor from its fibers through ``z_star``.

    Each coordinate gets ``floor(m / d)`` evaluations.  Pass
    ``anchor_value = f(z_star)`` when it is already known; otherwise one
    extra evaluation is spent on it.

    Raises
    ------
    DomainError
        If ``f(z_star) == 0``.
    NumericError
        If ``|f(z_star)|`` is so small that the normalisation overflows.
    """
    z = np.asarray(z_star, dtype=float)
    d, r = cls.d, cls.r
    if z.shape != (d,):
        raise UsageError(f"anchor must have shape ({d},), got {z.shape}")
    if m < d * r:
        raise UsageError(f"m={m} is below the feasibility floor d*r={d * r}")
    value = float(f(z)) if anchor_value is None else float(anchor_value)
    if value == 0.0:
        raise DomainError("anchor is a zero of f")
    if abs(value) < TINY_ANCHOR:
        raise NumericError(f"anchor value {value!r} is too small to normalise")
    try:
        scale = math.pow(value, 1 - d)
    except OverflowError:
        raise NumericError(f"normalisation f(z)^(1-d) overflows for f(z)={value!r}") from None
    if not math.isfinite(scale):
        raise NumericError(f"normalisation f(z)^(1-d) overflows for f(z)={value!r}")
    nodes = cell_nodes((m // d) // r, r)
    flat = nodes.ravel()
    polys = []
    for i in range(d):
        pts = np.repeat(z[None, :], len(flat), axis=0)
        pts[:, i] = flat
        vals = np.asarray(f(pts), dtype=float).reshape(nodes.shape)
        polys.append(_fit(nodes, vals))
    return Approximant(scale, tuple(polys))
