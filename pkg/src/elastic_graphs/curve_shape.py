"""Square-root velocity functions and the elastic distance between open curves.

A curve is sampled at ``T + 1`` uniformly spaced knots on ``[0, 1]``.  Its SRVF
is piecewise constant on the ``T`` cells between knots, so the transform and its
inverse are exact on the discrete level and ``||q||^2`` equals the polyline
length.  Reparametrizations are piecewise linear on the knots; their action is
the cell average of ``(q o gamma) sqrt(gamma')``, which keeps inner products
with any other SRVF on the same grid exact.

Registration runs dynamic programming over the knot grid with a fixed set of
local slopes, then refines the lattice path with a multiscale band search over
continuous knot positions.  The distance is ``min ||q1 - q2 * gamma||`` under
the cell-average action, searched over warps of either curve and both
orientations, which makes it symmetric and exactly zero between a curve and any
of its warped or reversed copies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import os

import numpy as np
from numba import config as numba_config
from numba import njit, prange

if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    # older system TBB builds make numba warn on every run; OpenMP is equivalent here
    numba_config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

__all__ = [
    "SLOPES",
    "DimensionError",
    "InvalidCurveError",
    "Reparam",
    "Srvf",
    "apply_reparam",
    "curve_geodesic",
    "elastic_register",
    "from_srvf",
    "inner",
    "register_pairs",
    "register_table",
    "resample_curve",
    "shape_distance",
    "sq_norm",
    "to_srvf",
]

SLOPES = ((1, 1), (1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2))
ZERO_SPEED_RTOL = 1e-12


class InvalidCurveError(ValueError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Srvf:
    """SRVF samples on ``T`` cells plus the curve start point."""

    values: np.ndarray
    anchor: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        anchor = np.asarray(self.anchor, dtype=float).reshape(-1)
        if values.ndim != 2 or values.shape[1] != anchor.shape[0]:
            raise DimensionError(
                f"SRVF values {values.shape} incompatible with anchor {anchor.shape}"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "anchor", anchor)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def norm(self) -> float:
        return float(np.sqrt(sq_norm(self.values)))

    def length(self) -> float:
        return sq_norm(self.values)

    def end_point(self) -> np.ndarray:
        speed = np.linalg.norm(self.values, axis=1)
        return self.anchor + (self.values * speed[:, None]).sum(axis=0) / self.T

    def reversed(self) -> "Srvf":
        """SRVF of the same curve traversed backwards."""
        return Srvf(-self.values[::-1], self.end_point())

    def rotated(self, O: np.ndarray) -> "Srvf":
        return Srvf(self.values @ O.T, O @ self.anchor)

    def scaled(self, c: float) -> "Srvf":
        """SRVF of the curve scaled by ``c`` about the origin."""
        return Srvf(self.values * np.sqrt(c), self.anchor * c)


@dataclass(frozen=True, eq=False)
class Reparam:
    """Piecewise-linear warping sampled at the ``T + 1`` knots.

    ``reversed`` marks an orientation-reversing match: the curve is first
    traversed backwards, then warped by ``gamma``.
    """

    gamma: np.ndarray
    reversed: bool = False

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float).reshape(-1)
        if g.size < 2:
            raise ValueError("gamma needs at least two knots")
        if g[0] != 0.0 or g[-1] != 1.0:
            raise ValueError("gamma must satisfy gamma(0)=0 and gamma(1)=1")
        if np.any(np.diff(g) < 0):
            raise ValueError("gamma must be nondecreasing")
        object.__setattr__(self, "gamma", g)

    @classmethod
    def identity(cls, T: int, reversed: bool = False) -> "Reparam":
        return cls(np.linspace(0.0, 1.0, T + 1), reversed)

    @property
    def T(self) -> int:
        return self.gamma.size - 1


def sq_norm(values: np.ndarray) -> float:
    """Squared L2 norm of piecewise-constant samples on ``[0, 1]``."""
    return float(np.sum(values * values) / values.shape[0])


def inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b) / a.shape[0])


def _check_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] not in (2, 3):
        raise InvalidCurveError(f"curve must be an array of shape (N>=2, 2|3), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidCurveError("curve has non-finite coordinates")
    return pts


def resample_curve(points, T: int) -> np.ndarray:
    """Resample a polyline to ``T + 1`` points equally spaced in arc length."""
    pts = _check_points(points)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] <= 0:
        return np.repeat(pts[:1], T + 1, axis=0)
    keep = np.concatenate([[True], seg > 0])
    cum, pts = cum[keep], pts[keep]
    s = np.linspace(0.0, cum[-1], T + 1)
    out = np.column_stack([np.interp(s, cum, pts[:, k]) for k in range(pts.shape[1])])
    out[0], out[-1] = pts[0], pts[-1]
    return out


def to_srvf(points) -> Srvf:
    """SRVF of a polyline treated as uniformly parametrized on ``[0, 1]``."""
    pts = _check_points(points)
    T = pts.shape[0] - 1
    vel = np.diff(pts, axis=0) * T
    speed = np.linalg.norm(vel, axis=1)
    scale = speed.max()
    q = np.zeros_like(vel)
    moving = speed > ZERO_SPEED_RTOL * scale if scale > 0 else np.zeros(T, bool)
    q[moving] = vel[moving] / np.sqrt(speed[moving])[:, None]
    return Srvf(q, pts[0])


def from_srvf(q: Srvf) -> np.ndarray:
    """Integrate ``q |q|`` from the anchor; returns ``T + 1`` points."""
    speed = np.linalg.norm(q.values, axis=1)
    steps = q.values * speed[:, None] / q.T
    return q.anchor + np.vstack([np.zeros(q.dim), np.cumsum(steps, axis=0)])


def apply_reparam(q: Srvf, g: Reparam) -> Srvf:
    """Cell averages of ``(q o gamma) sqrt(gamma')`` after optional reversal."""
    if g.T != q.T:
        raise DimensionError(f"reparametrization has {g.T} cells, SRVF has {q.T}")
    if g.reversed:
        q = q.reversed()
    vals = q.values
    T = q.T
    cum = np.vstack([np.zeros(q.dim), np.cumsum(vals, axis=0)])
    u = g.gamma * T
    idx = np.minimum(np.floor(u).astype(int), T - 1)
    frac = u - idx
    Qu = cum[idx] + frac[:, None] * vals[idx]
    du = np.diff(u)
    out = np.zeros_like(vals)
    pos = du > 0
    out[pos] = np.diff(Qu, axis=0)[pos] / np.sqrt(du[pos])[:, None]
    return Srvf(out, q.anchor)


# --- dynamic programming -----------------------------------------------------


def _slope_tables():
    """Overlap weights for every slope, already divided by sqrt(slope)."""
    offsets, c1, c2, w = [0], [], [], []
    for a, b in SLOPES:
        m = b / a
        for i in range(a):
            lo, hi = i * m, (i + 1) * m
            for v in range(b):
                ov = min(hi, v + 1) - max(lo, v)
                if ov > 1e-15:
                    c1.append(i)
                    c2.append(v)
                    w.append(ov / np.sqrt(m))
        offsets.append(len(w))
    return (
        np.array([s[0] for s in SLOPES], np.int64),
        np.array([s[1] for s in SLOPES], np.int64),
        np.array(offsets, np.int64),
        np.array(c1, np.int64),
        np.array(c2, np.int64),
        np.array(w, np.float64),
    )


_SA, _SB, _OFF, _C1, _C2, _W = _slope_tables()
_MIN_SLOPE = min(b / a for a, b in SLOPES) - 1e-12
_MAX_SLOPE = max(b / a for a, b in SLOPES) + 1e-12


@njit(cache=True, nogil=True)
def _gram(q1, q2):
    T, d = q1.shape
    G = np.zeros((T, T))
    for i in range(T):
        for j in range(T):
            acc = 0.0
            for k in range(d):
                acc += q1[i, k] * q2[j, k]
            G[i, j] = acc
    return G


@njit(cache=True, nogil=True)
def _dp_fill(G, sa, sb, off, c1, c2, w):
    T = G.shape[0]
    V = np.full((T + 1, T + 1), -np.inf)
    arg = np.full((T + 1, T + 1), -1, np.int64)
    V[0, 0] = 0.0
    ns = sa.shape[0]
    for i in range(1, T + 1):
        for j in range(1, T + 1):
            best = -np.inf
            bs = -1
            for s in range(ns):
                k = i - sa[s]
                l = j - sb[s]
                if k < 0 or l < 0:
                    continue
                prev = V[k, l]
                if prev == -np.inf:
                    continue
                acc = 0.0
                for r in range(off[s], off[s + 1]):
                    acc += w[r] * G[k + c1[r], l + c2[r]]
                val = prev + acc
                if val > best:
                    best = val
                    bs = s
            V[i, j] = best
            arg[i, j] = bs
    return V, arg


@njit(cache=True, nogil=True)
def _dp_value(G, sa, sb, off, c1, c2, w):
    V, _ = _dp_fill(G, sa, sb, off, c1, c2, w)
    return V[G.shape[0], G.shape[0]] / G.shape[0]


@njit(cache=True, nogil=True)
def _dp_path(G, sa, sb, off, c1, c2, w):
    V, arg = _dp_fill(G, sa, sb, off, c1, c2, w)
    T = G.shape[0]
    pi = np.zeros(T + 1, np.int64)
    pj = np.zeros(T + 1, np.int64)
    i, j, n = T, T, 0
    pi[0], pj[0] = i, j
    while i > 0 or j > 0:
        s = arg[i, j]
        i -= sa[s]
        j -= sb[s]
        n += 1
        pi[n], pj[n] = i, j
    return V[T, T] / T, pi[: n + 1][::-1].copy(), pj[: n + 1][::-1].copy()


# refinement budget: passes per level, offset radius, coarsest knot stride
REFINE_PASSES = 40
REFINE_RADIUS = 1
REFINE_COARSEST = 8
REFINE_TOL = 1e-3
REFINE_CYCLES = 2


@njit(cache=True, nogil=True)
def _cumulative(y):
    T, d = y.shape
    Y = np.zeros((T + 1, d))
    for k in range(T):
        for m in range(d):
            Y[k + 1, m] = Y[k, m] + y[k, m]
    return Y


@njit(cache=True, nogil=True)
def _cell_terms(a, Y, y, u0, u1):
    """Dot with ``a`` and squared norm of ``v = (Y(u1) - Y(u0)) / sqrt(u1 - u0)``."""
    du = u1 - u0
    if du <= 0.0:
        return 0.0, 0.0
    T = y.shape[0]
    k0 = min(int(np.floor(u0)), T - 1)
    k1 = min(int(np.floor(u1)), T - 1)
    dot = 0.0
    sq = 0.0
    for m in range(y.shape[1]):
        v = (Y[k1, m] + (u1 - k1) * y[k1, m] - Y[k0, m] - (u0 - k0) * y[k0, m])
        dot += a[m] * v
        sq += v * v
    return dot / np.sqrt(du), sq / du


@njit(cache=True, nogil=True)
def _cell_gain(a, Y, y, u0, u1):
    dot, sq = _cell_terms(a, Y, y, u0, u1)
    return 2.0 * dot - sq


@njit(cache=True, nogil=True, inline="always")
def _span_gain(x, Y, y, g, a, b, oa, ob, lo_slope, hi_slope):
    """Gain of cells ``a..b-1`` with knot offsets interpolated from ``oa`` to ``ob``."""
    total = 0.0
    n = b - a
    T, d = y.shape
    u0 = g[a] + oa
    k0 = min(int(np.floor(u0)), T - 1)
    for c in range(a, b):
        t = (c + 1 - a) / n
        u1 = g[c + 1] + (1.0 - t) * oa + t * ob
        du = u1 - u0
        if du < lo_slope or du > hi_slope:
            return -np.inf
        k1 = min(int(np.floor(u1)), T - 1)
        dot = 0.0
        sq = 0.0
        for m in range(d):
            v = Y[k1, m] + (u1 - k1) * y[k1, m] - Y[k0, m] - (u0 - k0) * y[k0, m]
            dot += x[c, m] * v
            sq += v * v
        total += 2.0 * dot / np.sqrt(du) - sq / du
        u0 = u1
        k0 = k1
    return total


@njit(cache=True, nogil=True)
def _band_pass(x, Y, y, g, idx, h, R, lo_slope, hi_slope):
    """Best joint offsets ``k * h`` (``|k| <= R``) of the knots listed in ``idx``.

    Knots between listed ones move by interpolated offsets.  Returns the gain of
    the best configuration and whether some offset sits on the band edge; ``g``
    is updated in place.
    """
    m = idx.shape[0]
    K = 2 * R + 1
    V = np.full((m, K), -np.inf)
    arg = np.zeros((m, K), np.int64)
    V[0, R] = 0.0
    for j in range(1, m):
        for k in range(K):
            if j == m - 1 and k != R:
                continue
            ob = (k - R) * h
            best = -np.inf
            bk = R
            for k0 in range(K):
                if V[j - 1, k0] == -np.inf:
                    continue
                v = V[j - 1, k0] + _span_gain(
                    x, Y, y, g, idx[j - 1], idx[j], (k0 - R) * h, ob, lo_slope, hi_slope
                )
                if v > best:
                    best = v
                    bk = k0
            V[j, k] = best
            arg[j, k] = bk
    offs = np.zeros(m)
    k = R
    edge = False
    for j in range(m - 1, 0, -1):
        offs[j] = (k - R) * h
        if k == 0 or k == K - 1:
            edge = True
        k = arg[j, k]
    for j in range(1, m):
        a = idx[j - 1]
        n = idx[j] - a
        for c in range(a + 1, idx[j] + 1):
            t = (c - a) / n
            g[c] += (1.0 - t) * offs[j - 1] + t * offs[j]
    return V[m - 1, R], edge


@njit(cache=True, nogil=True)
def _refine(x, y, g, passes, tol, lo_slope, hi_slope, R, top):
    """Multiscale band DP over knot offsets of ``g`` (grid units) minimizing ``||x - y * g||``.

    Coarse levels move every ``s``-th knot with interpolated offsets in between,
    which shifts whole stretches of the warp at once; the finest level moves
    single knots.  At each level the step halves whenever a pass cannot improve
    and doubles while the optimum sits on the band edge.  Cell slopes stay
    within the DP slope range so averaging cannot collapse ``y``.
    """
    T = x.shape[0]
    Y = _cumulative(y)
    val = 0.0
    for c in range(T):
        val += _cell_gain(x[c], Y, y, g[c], g[c + 1])
    start = 1
    while start * 4 <= T and start < top:
        start *= 2
    for _ in range(REFINE_CYCLES):
        settled = True
        stride = start
        while stride >= 1:
            idx = np.empty(T // stride + 2, np.int64)
            m = 0
            for c in range(0, T, stride):
                idx[m] = c
                m += 1
            idx[m] = T
            idx = idx[: m + 1]
            h = 0.25 * stride
            floor = tol * stride if stride > 1 else tol
            for _ in range(passes):
                if h < floor:
                    break
                trial = g.copy()
                new, edge = _band_pass(x, Y, y, trial, idx, h, R, lo_slope, hi_slope)
                if new > val + 1e-10 * max(abs(val), 1.0):
                    val = new
                    g[:] = trial
                    h = min(2.0 * h, 2.0 * stride) if edge else 0.5 * h
                else:
                    h *= 0.5
            if h >= floor:
                settled = False
            stride //= 2
        # another coarse-to-fine cycle only when some level ran out of passes
        if settled:
            break
    ip = 0.0
    sq = 0.0
    for c in range(T):
        dot, s2 = _cell_terms(x[c], Y, y, g[c], g[c + 1])
        ip += dot
        sq += s2
    xx = 0.0
    for c in range(T):
        for m in range(x.shape[1]):
            xx += x[c, m] * x[c, m]
    return max(xx - 2.0 * ip + sq, 0.0) / T, ip / T


@njit(cache=True, nogil=True)
def _reverse(q):
    T = q.shape[0]
    out = np.empty_like(q)
    for k in range(T):
        out[k] = -q[T - 1 - k]
    return out


@njit(cache=True, nogil=True)
def _problem(q1, q2, c):
    """Registration problems ``sup <x, y * gamma>`` searched for a pair.

    0: warp q2 onto q1; 1: warp reversed q2 onto q1;
    2: warp q1 onto q2; 3: warp reversed q1 onto q2.
    The set is closed under swapping the arguments.
    """
    if c == 0:
        return q1, q2
    if c == 1:
        return q1, _reverse(q2)
    if c == 2:
        return q2, q1
    return q2, _reverse(q1)


@njit(cache=True, nogil=True)
def _path_knots(pi, pj, T):
    g = np.interp(np.arange(T + 1) * 1.0, pi * 1.0, pj * 1.0)
    g[0] = 0.0
    g[T] = float(T)
    return g


@njit(cache=True, nogil=True)
def _solve_problem(q1, q2, c, sa, sb, off, c1, c2, w, passes):
    x, y = _problem(q1, q2, c)
    G = _gram(x, y)
    _, pi, pj = _dp_path(G, sa, sb, off, c1, c2, w)
    g = _path_knots(pi, pj, x.shape[0])
    d2, ip = _refine(
        x, y, g, passes, REFINE_TOL, _MIN_SLOPE, _MAX_SLOPE, REFINE_RADIUS, REFINE_COARSEST
    )
    return d2, ip, g


@njit(cache=True, nogil=True)
def _register(q1, q2, sa, sb, off, c1, c2, w, passes):
    vals = np.empty(4)
    for c in range(4):
        x, y = _problem(q1, q2, c)
        vals[c] = _dp_value(_gram(x, y), sa, sb, off, c1, c2, w)
    # orientation groups {0, 2} and {1, 3} are closed under swapping arguments
    fwd = max(vals[0], vals[2])
    rev = max(vals[1], vals[3])
    best = np.inf
    best_ip = 0.0
    which = 0
    bestg = np.zeros(q1.shape[0] + 1)
    for c in range(4):
        # both warp directions of the winning orientation are refined
        if (c % 2 == 0 and fwd < rev) or (c % 2 == 1 and rev < fwd):
            continue
        d2, ip, g = _solve_problem(q1, q2, c, sa, sb, off, c1, c2, w, passes)
        if d2 < best:
            best = d2
            best_ip = ip
            which = c
            bestg = g
    return best, best_ip, which, bestg


@njit(cache=True, nogil=True)
def _canonical(q):
    """``q`` or its reversal, whichever has the smaller Gram key, plus a flag.

    The key is the Gram matrix of the cell values, diagonal first, so the
    choice depends only on the shape up to rotation.  Registering canonical
    representatives makes every result exactly invariant to reversing either
    argument and, up to rounding, to rotating both.
    """
    r = _reverse(q)
    T, d = q.shape
    G = q @ q.T
    tol = 1e-9 * max(np.abs(np.diag(G)).max(), 1e-300)
    # reversal permutes the Gram entries, (k, j) -> (T-1-k, T-1-j)
    for k in range(T):
        a = G[k, k]
        b = G[T - 1 - k, T - 1 - k]
        if abs(a - b) > tol:
            return (r, True) if b < a else (q, False)
    for k in range(T):
        for j in range(k + 1, T):
            a = G[k, j]
            b = G[T - 1 - k, T - 1 - j]
            if abs(a - b) > tol:
                return (r, True) if b < a else (q, False)
    # the reversal is an orthogonal image of q; fall back to coordinates
    for k in range(T):
        for m in range(d):
            if r[k, m] < q[k, m]:
                return r, True
            if r[k, m] > q[k, m]:
                return q, False
    return q, False


@njit(cache=True, nogil=True)
def _register_canonical(q1, q2, sa, sb, off, c1, c2, w, passes):
    x, f1 = _canonical(q1)
    y, f2 = _canonical(q2)
    if np.array_equal(x, y):
        # same shape up to orientation: the identity is optimal and the distance exactly 0
        T = x.shape[0]
        return 0.0, np.sum(x * x) / T, 0, np.arange(T + 1).astype(np.float64), f1, f2
    d2, ip, which, g = _register(x, y, sa, sb, off, c1, c2, w, passes)
    return d2, ip, which, g, f1, f2


@njit(cache=True, nogil=True)
def _lattice(q1, q2, sa, sb, off, c1, c2, w):
    """DP-only registration of ``q2`` onto ``q1`` in both orientations."""
    q1, _ = _canonical(q1)
    ip = max(
        _dp_value(_gram(q1, q2), sa, sb, off, c1, c2, w),
        _dp_value(_gram(q1, _reverse(q2)), sa, sb, off, c1, c2, w),
    )
    T = q1.shape[0]
    nn = 0.0
    for c in range(T):
        for m in range(q1.shape[1]):
            nn += q1[c, m] * q1[c, m] + q2[c, m] * q2[c, m]
    return max(nn / T - 2.0 * ip, 0.0), ip


@njit(cache=True, nogil=True, parallel=True)
def _register_batch(Q1, Q2, sa, sb, off, c1, c2, w, passes, refine):
    n1 = Q1.shape[0]
    n2 = Q2.shape[0]
    d2 = np.empty(n1 * n2)
    ip = np.empty(n1 * n2)
    for p in prange(n1 * n2):
        if refine:
            a, b, _, _, _, _ = _register_canonical(
                Q1[p // n2], Q2[p % n2], sa, sb, off, c1, c2, w, passes
            )
        else:
            a, b = _lattice(Q1[p // n2], Q2[p % n2], sa, sb, off, c1, c2, w)
        d2[p] = a
        ip[p] = b
    return d2.reshape((n1, n2)), ip.reshape((n1, n2))


@njit(cache=True, nogil=True, parallel=True)
def _register_pairs(Q1, Q2, sa, sb, off, c1, c2, w, passes):
    n = Q1.shape[0]
    d2 = np.empty(n)
    ip = np.empty(n)
    for p in prange(n):
        a, b, _, _, _, _ = _register_canonical(Q1[p], Q2[p], sa, sb, off, c1, c2, w, passes)
        d2[p] = a
        ip[p] = b
    return d2, ip


def register_pairs(Q1: np.ndarray, Q2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Squared distances and registered inner products of ``Q1[e]`` vs ``Q2[e]``."""
    Q1 = np.ascontiguousarray(Q1, dtype=float)
    Q2 = np.ascontiguousarray(Q2, dtype=float)
    if Q1.shape != Q2.shape:
        raise DimensionError(f"paired stacks differ in shape: {Q1.shape} vs {Q2.shape}")
    if len(Q1) == 0:
        return np.zeros(0), np.zeros(0)
    return _register_pairs(Q1, Q2, _SA, _SB, _OFF, _C1, _C2, _W, REFINE_PASSES)


def register_table(
    Q1: np.ndarray, Q2: np.ndarray, refine: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Squared elastic distances and registered inner products for all pairs.

    ``Q1`` has shape ``(E1, T, d)`` and ``Q2`` shape ``(E2, T, d)``.  With
    ``refine`` entry ``[e, f]`` of each table matches
    ``shape_distance(Q1[e], Q2[f]) ** 2`` and ``elastic_register(Q1[e], Q2[f])[1]``.
    Without it only the lattice DP runs, for forward and reversed ``Q2[f]``,
    which is several times faster and serves as a screening affinity.
    """
    Q1 = np.ascontiguousarray(Q1, dtype=float)
    Q2 = np.ascontiguousarray(Q2, dtype=float)
    if len(Q1) == 0 or len(Q2) == 0:
        z = np.zeros((len(Q1), len(Q2)))
        return z, z.copy()
    if Q1.shape[1:] != Q2.shape[1:]:
        raise DimensionError(f"stacked SRVFs differ in shape: {Q1.shape[1:]} vs {Q2.shape[1:]}")
    return _register_batch(Q1, Q2, _SA, _SB, _OFF, _C1, _C2, _W, REFINE_PASSES, refine)


def _run(q1: Srvf, q2: Srvf):
    if q1.values.shape != q2.values.shape:
        raise DimensionError(f"SRVF shapes differ: {q1.values.shape} vs {q2.values.shape}")
    return _register_canonical(
        q1.values, q2.values, _SA, _SB, _OFF, _C1, _C2, _W, REFINE_PASSES
    )


def _invert(g: np.ndarray) -> np.ndarray:
    T = g.size - 1
    knots = np.arange(T + 1, dtype=float)
    inv = np.interp(knots, g, knots)
    inv[0], inv[-1] = 0.0, float(T)
    return inv


def elastic_register(q1: Srvf, q2: Srvf) -> tuple[Reparam, float]:
    """Best reparametrization of ``q2`` onto ``q1`` over both orientations.

    Warps in both directions are searched so the distance is symmetric in the
    arguments.  When the winning warp acts on ``q1`` its inverse, sampled on
    the knots and refined, is returned.  ``inner`` is the inner product of
    ``q1`` with the registered ``q2``.  Because the cell-average action is not
    an exact isometry, ``||q1 - q2 * gamma||`` for the returned warp can exceed
    :func:`shape_distance` slightly when the better warp acted on ``q1``.
    """
    _, ip, which, g, f1, f2 = _run(q1, q2)
    T = q1.T
    if which >= 2:
        g = _invert(g) if which == 2 else _invert(T - g[::-1])
        # the sampled inverse is only approximate, so polish it as a forward warp
        x, _ = _canonical(q1.values)
        y, _ = _canonical(q2.values)
        _, ip = _refine(
            x, y if which == 2 else _reverse(y), g, REFINE_PASSES, REFINE_TOL,
            _MIN_SLOPE, _MAX_SLOPE, REFINE_RADIUS, REFINE_COARSEST,
        )
    flip = which in (1, 3)
    # map the registration of the canonical pair back to the given orientations
    if f2:
        flip = not flip
    if f1:
        flip = not flip
        g = T - g[::-1]
    gamma = g / T
    gamma[0], gamma[-1] = 0.0, 1.0
    return Reparam(np.maximum.accumulate(gamma), reversed=flip), float(ip)


def shape_distance(e1: Optional[Srvf], e2: Optional[Srvf]) -> float:
    """Elastic distance ``min ||q1 - q2 * gamma||`` between two edge shapes.

    ``None`` is the null edge, at distance ``||q||`` from any shape ``q``.
    """
    if e1 is None and e2 is None:
        return 0.0
    if e1 is None:
        return e2.norm()
    if e2 is None:
        return e1.norm()
    d2 = _run(e1, e2)[0]
    return float(np.sqrt(d2))


def curve_geodesic(e1: Optional[Srvf], e2: Optional[Srvf], s: float) -> Optional[Srvf]:
    """Point at time ``s`` on the straight line from ``e1`` to a registered ``e2``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"geodesic time must lie in [0, 1], got {s}")
    if e1 is None and e2 is None:
        return None
    ref = e1 if e1 is not None else e2
    v1 = e1.values if e1 is not None else np.zeros_like(ref.values)
    v2 = e2.values if e2 is not None else np.zeros_like(ref.values)
    a1 = e1.anchor if e1 is not None else e2.anchor
    a2 = e2.anchor if e2 is not None else e1.anchor
    if s == 0.0 and e1 is not None:
        return e1
    if s == 1.0 and e2 is not None:
        return e2
    return Srvf((1.0 - s) * v1 + s * v2, (1.0 - s) * a1 + s * a2)
