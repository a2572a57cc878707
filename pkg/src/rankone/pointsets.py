"""Point sets in the unit cube: digital nets, diagonals, and exact dispersion.

The dispersion of ``P`` is the largest volume of an axis-parallel box in
``[0, 1]^d`` that contains no point of ``P``.  Two exact routes are provided:

* :func:`dispersion_exact` inserts points one at a time and maintains the
  set of maximal empty boxes (a box containing the new point is split into
  ``2d`` pieces, non-maximal pieces are discarded).
* :func:`dispersion_bruteforce` enumerates every box whose sides come from
  ``{0, 1}`` and the point coordinates.  It is ``O(n^(2d+1))`` and exists to
  check the first route on small inputs.
"""

import itertools
import math
import threading
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple, Optional

import numpy as np

from ._numbers import ceil_snap, first_primes
from .errors import ResourceError, UsageError

MAX_NET_DIM = 32
NET_BITS = 32
DISPERSION_MAX_D = 6
VERIFIED_MAX_D = 4
VERIFIED_MAX_POINTS = 1 << 16
MAX_COORDINATES = 1 << 24


@dataclass(frozen=True, eq=False)
class PointSet:
    """Finite list of points in ``[0, 1]^d`` plus where it came from.

    ``claimed_dispersion`` is set by generators that promise a dispersion
    bound; ``verified`` records whether that promise was checked exactly.
    """

    d: int
    points: np.ndarray
    provenance: str = ""
    claimed_dispersion: Optional[float] = None
    verified: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, self.d) if self.d > 0 else np.zeros((len(self.points), 0))
        if pts.size and (np.any(pts < 0.0) or np.any(pts > 1.0) or not np.all(np.isfinite(pts))):
            raise UsageError("point coordinates must lie in [0, 1]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def to_text(self, header: Optional[str] = None) -> str:
        lines = [] if header is None else [header if header.startswith("#") else "# " + header]
        lines.append(f"{self.d} {len(self)}")
        lines += [" ".join(f"{v:.17g}" for v in row) for row in self.points]
        return "\n".join(lines) + "\n"

    def write(self, path, header: Optional[str] = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text(header))


def parse_pointset(text: str, provenance: str = "file") -> PointSet:
    """Parse the plain text format: ``"d n"`` then ``n`` rows of ``d`` numbers; ``#`` lines are comments."""
    rows = [(k + 1, ln.strip()) for k, ln in enumerate(text.splitlines())]
    rows = [(k, ln) for k, ln in rows if ln and not ln.startswith("#")]
    if not rows:
        raise UsageError("empty point-set file: missing 'd n' header")
    k, head = rows[0]
    try:
        d, n = (int(v) for v in head.split())
    except ValueError:
        raise UsageError(f"line {k}: expected 'd n', got {head!r}") from None
    if d < 1 or n < 0:
        raise UsageError(f"line {k}: bad header values d={d}, n={n}")
    if len(rows) - 1 != n:
        raise UsageError(f"header announces {n} points but {len(rows) - 1} rows follow")
    pts = np.empty((n, d))
    for i, (k, ln) in enumerate(rows[1:]):
        parts = ln.split()
        if len(parts) != d:
            raise UsageError(f"line {k}: expected {d} coordinates, got {len(parts)}")
        try:
            pts[i] = [float(v) for v in parts]
        except ValueError:
            raise UsageError(f"line {k}: non-numeric coordinate in {ln!r}") from None
    return PointSet(d, pts, provenance)


def read_pointset(path) -> PointSet:
    with open(path, encoding="utf-8") as fh:
        return parse_pointset(fh.read(), provenance=f"file:{path}")


# ---------------------------------------------------------------------------
# digital net


def _load_direction_table():
    text = resources.files("rankone").joinpath("data/new-joe-kuo-32.txt").read_text()
    table = {}
    for ln in text.splitlines():
        if not ln or ln.startswith("#") or ln.startswith("d "):
            continue
        vals = [int(v) for v in ln.split()]
        table[vals[0]] = (vals[1], vals[2], vals[3:])
    return table


_DIRECTIONS = None


def _direction_integers(d: int) -> np.ndarray:
    global _DIRECTIONS
    if _DIRECTIONS is None:
        _DIRECTIONS = _load_direction_table()
    V = np.zeros((d, NET_BITS), dtype=np.uint64)
    for k in range(NET_BITS):
        V[0, k] = 1 << (NET_BITS - 1 - k)
    for j in range(1, d):
        s, a, m = _DIRECTIONS[j + 1]
        v = [0] * NET_BITS
        for k in range(min(s, NET_BITS)):
            v[k] = m[k] << (NET_BITS - 1 - k)
        for k in range(s, NET_BITS):
            x = v[k - s] ^ (v[k - s] >> s)
            for ell in range(1, s):
                if (a >> (s - 1 - ell)) & 1:
                    x ^= v[k - ell]
            v[k] = x
        V[j] = v
    return V


def digital_net_points(start: int, stop: int, d: int) -> np.ndarray:
    """Rows ``start..stop-1`` of the base-2 Sobol sequence in natural (non-Gray) order."""
    if not 1 <= d <= MAX_NET_DIM:
        raise UsageError(f"digital net supports 1 <= d <= {MAX_NET_DIM}, got d={d}")
    if stop > 1 << NET_BITS:
        raise ResourceError("digital net index exceeds 2^32")
    V = _direction_integers(d)
    idx = np.arange(start, stop, dtype=np.uint64)
    X = np.zeros((len(idx), d), dtype=np.uint64)
    for b in range(max(int(stop).bit_length(), 1)):
        bit = (idx >> np.uint64(b)) & np.uint64(1)
        X ^= bit[:, None] * V[:, b][None, :]
    return X.astype(float) / float(1 << NET_BITS)


def digital_net(n: int, d: int) -> PointSet:
    """First ``n`` points of the base-2 Sobol sequence; point 0 is the origin."""
    if n < 0:
        raise UsageError("n must be non-negative")
    _check_size(n, d)
    return PointSet(d, digital_net_points(0, n, d), provenance=f"sobol(n={n}, d={d})")


def _check_size(n, d):
    if n * d > MAX_COORDINATES:
        raise ResourceError(f"{n} points in dimension {d} exceed the materialisation cap of {MAX_COORDINATES} coordinates")


# ---------------------------------------------------------------------------
# dispersion


class EmptyBoxes:
    """Maximal empty open boxes among the points inserted so far.

    Each box remembers, for every face, the index of one point lying on that
    face (``-1`` for faces on the cube boundary).  After a split only those
    supports need re-checking; a scan over all points is the fallback when
    the remembered support falls outside a piece (ties in coordinates).
    """

    def __init__(self, d: int):
        self.d = d
        self.pts = np.empty((64, d))
        self.npts = 0
        # axis-major storage keeps the per-axis containment scan contiguous
        self.lo = np.zeros((d, 256))
        self.hi = np.zeros((d, 256))
        self.sup = np.full((256, d, 2), -1, dtype=np.int64)
        self.hi[:, 0] = 1.0
        self.used = 1
        self.dead = 0
        # per axis: coordinate value -> multiplicity; only shared values need the fallback scan
        self.values = [dict() for _ in range(d)]
        self.shared = [set() for _ in range(d)]

    def _grow_points(self):
        if self.npts == len(self.pts):
            self.pts = np.concatenate([self.pts, np.empty_like(self.pts)])

    def _append(self, lo, hi, sup):
        k = len(lo)
        need = self.used + k
        if need > len(self.sup):
            extra = max(need, 2 * len(self.sup)) - len(self.sup)
            self.lo = np.concatenate([self.lo, np.zeros((self.d, extra))], axis=1)
            self.hi = np.concatenate([self.hi, np.zeros((self.d, extra))], axis=1)
            self.sup = np.concatenate([self.sup, np.full((extra, self.d, 2), -1, dtype=np.int64)])
        self.lo[:, self.used:need] = lo.T
        self.hi[:, self.used:need] = hi.T
        self.sup[self.used:need] = sup
        self.used = need

    def _compact(self):
        alive = self.hi[0, : self.used] > self.lo[0, : self.used]
        k = int(alive.sum())
        self.lo[:, :k] = self.lo[:, : self.used][:, alive]
        self.hi[:, :k] = self.hi[:, : self.used][:, alive]
        self.sup[:k] = self.sup[: self.used][alive]
        self.used, self.dead = k, 0

    def _find_support(self, lo, hi, axis, value):
        P = self.pts[: self.npts]
        ok = P[:, axis] == value
        for k in range(self.d):
            if k != axis:
                ok &= (P[:, k] > lo[k]) & (P[:, k] < hi[k])
        hits = np.flatnonzero(ok)
        return int(hits[0]) if hits.size else None

    def insert(self, q) -> None:
        q = np.asarray(q, dtype=float)
        self._grow_points()
        qi = self.npts
        self.pts[qi] = q
        self.npts += 1
        for a in range(self.d):
            v = float(q[a])
            c = self.values[a].get(v, 0) + 1
            self.values[a][v] = c
            if c == 2:
                self.shared[a].add(v)
        u = self.used
        idx = np.flatnonzero((self.lo[0, :u] < q[0]) & (q[0] < self.hi[0, :u]))
        for a in range(1, self.d):
            if idx.size == 0:
                break
            idx = idx[(self.lo[a, idx] < q[a]) & (q[a] < self.hi[a, idx])]
        if idx.size == 0:
            return
        blo, bhi, bsup = self.lo[:, idx].T.copy(), self.hi[:, idx].T.copy(), self.sup[idx].copy()
        self.lo[:, idx] = 0.0
        self.hi[:, idx] = 0.0
        self.dead += idx.size
        d = self.d
        for j in range(d):
            for side in (0, 1):
                plo, phi, psup = blo.copy(), bhi.copy(), bsup.copy()
                if side == 0:
                    phi[:, j] = q[j]
                    psup[:, j, 1] = qi
                else:
                    plo[:, j] = q[j]
                    psup[:, j, 0] = qi
                keep = np.ones(len(plo), dtype=bool)
                for a in range(d):
                    if a == j:
                        continue
                    for s in (0, 1):
                        sp = psup[:, a, s]
                        spj = self.pts[np.maximum(sp, 0), j]
                        ok = (sp < 0) | ((spj > plo[:, j]) & (spj < phi[:, j]))
                        lost = ~ok & keep
                        if not self.shared[a]:
                            keep &= ~lost
                            continue
                        face_vals = plo[:, a] if s == 0 else phi[:, a]
                        tied = np.isin(face_vals, list(self.shared[a]))
                        keep &= ~(lost & ~tied)
                        for row in np.flatnonzero(lost & tied):
                            face = plo[row, a] if s == 0 else phi[row, a]
                            alt = self._find_support(plo[row], phi[row], a, face)
                            if alt is None:
                                keep[row] = False
                            else:
                                psup[row, a, s] = alt
                if keep.any():
                    self._append(plo[keep], phi[keep], psup[keep])
        if self.dead > self.used // 2:
            self._compact()

    def count(self) -> int:
        return int(np.count_nonzero(self.hi[0, : self.used] > self.lo[0, : self.used]))

    def largest(self):
        """``(volume, lo, hi)`` of a largest empty box."""
        vol = np.prod(self.hi[:, : self.used] - self.lo[:, : self.used], axis=0)
        k = int(np.argmax(vol))
        return float(vol[k]), self.lo[:, k].copy(), self.hi[:, k].copy()


def _points_of(P):
    if isinstance(P, PointSet):
        return P.d, P.points
    pts = np.asarray(P, dtype=float)
    if pts.ndim != 2:
        raise UsageError("points must be an (n, d) array or a PointSet")
    return pts.shape[1], pts


def dispersion_exact(P, d: Optional[int] = None) -> float:
    """Exact dispersion (largest empty box volume) of a point set.

    Parameters
    ----------
    P : PointSet or array of shape (n, d)
    d : int, optional
        Required only for an empty array without a second dimension.

    Raises
    ------
    ResourceError
        For ``d > 6``.
    """
    dim, pts = _points_of(P) if not (d is not None and np.size(P) == 0) else (d, np.empty((0, d)))
    if d is not None and dim != d:
        raise UsageError(f"point dimension {dim} does not match d={d}")
    if dim > DISPERSION_MAX_D:
        raise ResourceError(f"exact dispersion is limited to d <= {DISPERSION_MAX_D}")
    boxes = EmptyBoxes(dim)
    for q in pts:
        boxes.insert(q)
    return boxes.largest()[0]


def dispersion_bruteforce(P) -> float:
    """Enumerate all boxes with sides drawn from ``{0, 1}`` and the point coordinates."""
    d, pts = _points_of(P)
    axes = [sorted({0.0, 1.0, *pts[:, j].tolist()}) for j in range(d)]
    pairs = [[(a, b) for a, b in itertools.combinations(ax, 2)] for ax in axes]
    best = 0.0
    for box in itertools.product(*pairs):
        vol = math.prod(b - a for a, b in box)
        if vol <= best:
            continue
        inside = np.ones(len(pts), dtype=bool)
        for j, (a, b) in enumerate(box):
            inside &= (pts[:, j] > a) & (pts[:, j] < b)
        if not inside.any():
            best = vol
    return best


class _NetProfile:
    """Dispersion of Sobol prefixes, extended lazily and shared between callers."""

    def __init__(self, d):
        self.d = d
        self.boxes = EmptyBoxes(d)
        self.known = {0: 1.0}
        self.lock = threading.Lock()

    def dispersion(self, n: int) -> float:
        with self.lock:
            if n not in self.known:
                have = self.boxes.npts
                if n < have:
                    return dispersion_exact(digital_net_points(0, n, self.d))
                chunk = digital_net_points(have, n, self.d)
                for q in chunk:
                    self.boxes.insert(q)
                self.known[n] = self.boxes.largest()[0]
            return self.known[n]


_PROFILES: dict = {}
_PROFILES_LOCK = threading.Lock()


def net_dispersion(n: int, d: int) -> float:
    """Exact dispersion of the first ``n`` Sobol points (memoised per dimension)."""
    with _PROFILES_LOCK:
        prof = _PROFILES.setdefault(d, _NetProfile(d))
    return prof.dispersion(n)


def larcher_size(target: float, d: int) -> int:
    """Net size ``ceil(2^(7d+1) / target)`` from Larcher's dispersion bound ``2^(7d+1)/N``."""
    return ceil_snap(2.0 ** (7 * d + 1) / target)


def verified_size(target: float, d: int) -> int:
    """Smallest ``n = 2d * 2^k`` whose Sobol prefix has exact dispersion at most ``target``."""
    if d > VERIFIED_MAX_D:
        raise ResourceError(f"verified mode is limited to d <= {VERIFIED_MAX_D}; use mode='formula'")
    n = 2 * d
    while net_dispersion(n, d) > target:
        n *= 2
        if n > VERIFIED_MAX_POINTS:
            raise ResourceError(f"no Sobol prefix up to {VERIFIED_MAX_POINTS} points reaches dispersion {target}")
    return n


def low_dispersion_set(target: float, d: int, mode: str = "verified") -> PointSet:
    """Sobol prefix whose dispersion is at most ``target``.

    ``mode='verified'`` doubles ``n`` from ``2d`` until the exact dispersion
    meets the target (``d <= 4``).  ``mode='formula'`` takes ``n`` from
    Larcher's bound without checking.
    """
    if not 0.0 < target < 1.0:
        raise UsageError(f"target dispersion must lie in (0, 1), got {target}")
    if mode == "formula":
        n = larcher_size(target, d)
        _check_size(n, d)
        return PointSet(d, digital_net_points(0, n, d), f"sobol-larcher(n={n}, d={d})", target, False)
    if mode != "verified":
        raise UsageError(f"mode must be 'verified' or 'formula', got {mode!r}")
    n = verified_size(target, d)
    return PointSet(d, digital_net_points(0, n, d), f"sobol-verified(n={n}, d={d})", target, True,
                    {"dispersion": net_dispersion(n, d)})


def diagonal_set(count: int, center: float, halfwidth: float, d: int) -> PointSet:
    """``count`` equispaced points ``t * (1, ..., 1)`` with ``t`` spanning ``[center - halfwidth, center + halfwidth]``.

    A single point sits at the center.
    """
    if count < 1:
        raise UsageError("count must be >= 1")
    lo, hi = center - halfwidth, center + halfwidth
    if halfwidth < 0 or lo < 0.0 or hi > 1.0:
        raise UsageError(f"interval [{lo}, {hi}] is not inside [0, 1]")
    if count == 1:
        t = np.array([center])
    else:
        t = lo + 2.0 * halfwidth * np.arange(count) / (count - 1)
    return PointSet(d, np.repeat(t[:, None], d, axis=1), f"diagonal(count={count}, center={center}, halfwidth={halfwidth})")


class BaselineSize(NamedTuple):
    size: int
    saturated: bool


HALTON_SATURATION = 2**63 - 1


def halton_baseline_size(cls, eps: float) -> BaselineSize:
    """Point count ``ceil((2^d M^d / eps)^(1/r) 2^d pi_d)`` of the Halton-based detector.

    ``pi_d`` is the product of the first ``d`` primes.  Values beyond
    ``2^63 - 1`` come back saturated with the flag set.
    """
    r, M, d = cls.r, cls.M, cls.d
    if not 0.0 < eps < 1.0:
        raise UsageError("eps must lie in (0, 1)")
    primorial = math.prod(first_primes(d))
    log_val = (d * math.log(2.0) + d * math.log(M) - math.log(eps)) / r + d * math.log(2.0) + math.log(primorial)
    if log_val > math.log(HALTON_SATURATION):
        return BaselineSize(HALTON_SATURATION, True)
    val = (2.0**d * M**d / eps) ** (1.0 / r) * 2.0**d * primorial
    return BaselineSize(ceil_snap(val), False)
