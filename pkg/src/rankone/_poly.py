"""Small polynomial kernels used by the piecewise representations.

Coefficients are ascending (``c[0] + c[1] t + ...``) in a local variable
``t`` that runs over ``[0, w]`` for a piece of width ``w``.
"""

import math

import numpy as np
from numpy.polynomial import polynomial as P

ROOT_IMAG_TOL = 1e-7
ROOT_MERGE_TOL = 1e-9


def trim(c):
    c = np.asarray(c, dtype=float)
    nz = np.flatnonzero(c)
    return c[: nz[-1] + 1] if nz.size else c[:1]


def is_zero(c) -> bool:
    return not np.any(np.asarray(c))


def horner(c, t):
    """Evaluate ascending coefficients ``c`` at ``t`` (scalar or array)."""
    c = np.asarray(c, dtype=float)
    acc = np.zeros_like(np.asarray(t, dtype=float)) + c[-1]
    for a in c[-2::-1]:
        acc = acc * t + a
    return acc


def horner_rows(coeffs, t):
    """Row-wise Horner: ``coeffs`` has shape ``(n, D+1)`` and ``t`` shape ``(n,)``."""
    acc = coeffs[..., -1].copy()
    for j in range(coeffs.shape[-1] - 2, -1, -1):
        acc = acc * t + coeffs[..., j]
    return acc


def deriv(c, k: int = 1):
    c = np.asarray(c, dtype=float)
    if k == 0:
        return c
    if k >= len(c):
        return np.zeros(1)
    return c[k:] * np.array([math.perm(j, k) for j in range(k, len(c))], dtype=float)


def taylor_shift(c, a: float):
    """Coefficients of ``t -> p(a + t)``."""
    c = np.asarray(c, dtype=float)
    out = np.zeros_like(c)
    # p(a+t) = sum_j p^(j)(a) t^j / j!
    for j in range(len(c)):
        out[j] = horner(deriv(c, j), a) / math.factorial(j)
    return out


def _polish(c, dc, x, lo, hi, steps=3):
    for _ in range(steps):
        slope = horner(dc, x)
        if slope == 0.0:
            break
        nxt = x - horner(c, x) / slope
        if not (lo <= nxt <= hi):
            break
        x = nxt
    return x


def critical_candidates(c, w: float):
    """Points of ``[0, w]`` that include every critical point of ``p``.

    Real parts of *all* roots of ``p'`` are clipped into the interval; this
    never misses a real critical point and can only add harmless extra
    evaluation sites.
    """
    dc = trim(deriv(c))
    cands = [0.0, w]
    if len(dc) == 2:
        cands.append(float(np.clip(-dc[0] / dc[1], 0.0, w)))
    elif len(dc) > 2:
        roots = P.polyroots(dc)
        d2 = deriv(dc)
        for z in roots:
            x = float(np.clip(z.real, 0.0, w))
            if abs(z.imag) <= ROOT_IMAG_TOL * (1 + abs(z)):
                x = _polish(dc, d2, x, 0.0, w)
            cands.append(x)
    return np.array(cands)


def _horner_py(c, x):
    acc = 0.0
    for a in reversed(c):
        acc = acc * x + a
    return acc


def _small_candidates(c, w):
    # closed-form critical points for degree <= 3 (complex pairs contribute their real part)
    cands = [0.0, w]
    if len(c) == 3:
        cands.append(-c[1] / (2.0 * c[2]))
    elif len(c) == 4:
        a, b, k = 3.0 * c[3], 2.0 * c[2], c[1]
        disc = b * b - 4.0 * a * k
        if disc >= 0.0:
            s = math.sqrt(disc)
            q = -0.5 * (b + math.copysign(s, b))
            cands.append(q / a)
            if q != 0.0:
                cands.append(k / q)
        else:
            cands.append(-b / (2.0 * a))
    return [min(max(x, 0.0), w) for x in cands]


def abs_max(c, w: float) -> float:
    """Maximum of ``|p|`` over ``[0, w]``."""
    c = trim(c)
    if len(c) == 1:
        return abs(float(c[0]))
    if len(c) <= 4:
        cl = [float(v) for v in c]
        return max(abs(_horner_py(cl, x)) for x in _small_candidates(cl, float(w)))
    return float(np.max(np.abs(horner(c, critical_candidates(c, w)))))


def real_roots(c, w: float, tol: float = 1e-12):
    """Distinct real roots of a non-zero polynomial inside ``[0, w]``.

    Companion-matrix roots, Newton-polished, accepted only if the residual is
    below ``tol`` relative to the coefficient scale.
    """
    c = trim(c)
    if len(c) == 1:
        return np.empty(0)
    scale = float(np.max(np.abs(c))) * max(1.0, w) ** (len(c) - 1)
    dc = deriv(c)
    found = []
    for z in P.polyroots(c):
        if abs(z.imag) > 1e-6 * (1 + abs(z)):
            continue
        x = z.real
        if x < -1e-9 or x > w + 1e-9:
            continue
        x = float(np.clip(x, 0.0, w))
        x = _polish(c, dc, x, 0.0, w)
        if abs(horner(c, x)) <= tol * scale:
            found.append(x)
    found.sort()
    out = []
    for x in found:
        if not out or x - out[-1] > ROOT_MERGE_TOL:
            out.append(x)
    return np.array(out)


def newton_coefficients(nodes, values):
    """Divided-difference table diagonal for Newton-form interpolation."""
    nodes = np.asarray(nodes, dtype=float)
    coef = np.array(values, dtype=float, copy=True)
    n = len(nodes)
    for j in range(1, n):
        coef[j:] = (coef[j:] - coef[j - 1:-1]) / (nodes[j:] - nodes[:-j])
    return coef


def newton_to_monomial(nodes, coef):
    """Convert Newton form (nodes, coef) to ascending monomial coefficients."""
    out = np.array([coef[-1]], dtype=float)
    for j in range(len(coef) - 2, -1, -1):
        out = P.polyadd(P.polymul(out, [-nodes[j], 1.0]), [coef[j]])
    return out
