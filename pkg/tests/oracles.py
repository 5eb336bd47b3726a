"""Reference implementations coded independently of the package internals."""

from __future__ import annotations

import itertools

import numpy as np

from elastic_graphs.curve_shape import SLOPES, shape_distance


def srvf_polyline(points: np.ndarray) -> np.ndarray:
    """SRVF samples of a uniformly parametrized polyline, straight from the definition."""
    T = len(points) - 1
    out = np.zeros((T, points.shape[1]))
    for k in range(T):
        v = (points[k + 1] - points[k]) * T
        s = np.linalg.norm(v)
        if s > 0:
            out[k] = v / np.sqrt(s)
    return out


def warp_action_fine(q: np.ndarray, gamma: np.ndarray, samples: int = 4000) -> np.ndarray:
    """Cell averages of ``q(gamma(t)) sqrt(gamma'(t))`` by midpoint sampling."""
    T = q.shape[0]
    out = np.zeros_like(q)
    for c in range(T):
        t = (c + (np.arange(samples) + 0.5) / samples) / T
        s = np.interp(t, np.linspace(0, 1, T + 1), gamma)
        slope = (gamma[c + 1] - gamma[c]) * T
        cell = np.minimum((s * T).astype(int), T - 1)
        out[c] = (q[cell] * np.sqrt(slope)).mean(axis=0)
    return out


def lattice_paths(T: int):
    """All monotone paths from (0, 0) to (T, T) built from the slope steps."""
    steps = SLOPES

    def rec(i, j):
        if i == T and j == T:
            yield [(i, j)]
            return
        for a, b in steps:
            if i + a <= T and j + b <= T:
                for rest in rec(i + a, j + b):
                    yield [(i, j)] + rest

    yield from rec(0, 0)


def path_inner(x: np.ndarray, y: np.ndarray, path) -> float:
    """Exact ``<x, (y o gamma) sqrt(gamma')>`` for the piecewise-linear warp through ``path``.

    Both SRVFs are piecewise constant on ``T`` cells, so the integrand is
    piecewise constant between the union of the x-grid and the preimages of
    the y-grid; summing over those pieces is exact.
    """
    T = x.shape[0]
    pi = np.array([p[0] for p in path], float) / T
    pj = np.array([p[1] for p in path], float) / T
    total = 0.0
    for k in range(len(path) - 1):
        t0, t1, s0, s1 = pi[k], pi[k + 1], pj[k], pj[k + 1]
        m = (s1 - s0) / (t1 - t0)
        breaks = {t0, t1}
        for g in range(T + 1):
            if t0 < g / T < t1:
                breaks.add(g / T)
            tt = t0 + (g / T - s0) / m
            if t0 < tt < t1:
                breaks.add(tt)
        b = sorted(breaks)
        for u0, u1 in zip(b[:-1], b[1:]):
            mid = 0.5 * (u0 + u1)
            s = s0 + m * (mid - t0)
            xi = min(int(mid * T), T - 1)
            yj = min(int(s * T), T - 1)
            total += float(x[xi] @ y[yj]) * np.sqrt(m) * (u1 - u0)
    return total


def brute_force_match(g1p, g2p, lam: float = 0.0):
    """Minimum ``d_b`` over all injections of real nodes, ignoring rotation.

    Every real node of the first graph goes to a distinct real node of the
    second or to nothing.  Edge distances come from :func:`shape_distance`
    evaluated pair by pair.
    """
    real1 = [a for a in range(g1p.n) if not g1p.is_null[a]]
    real2 = [i for i in range(g2p.n) if not g2p.is_null[i]]
    e1 = dict(g1p.edges)
    e2 = dict(g2p.edges)
    cache = {}

    def dist2(k1, k2):
        key = (k1, k2)
        if key not in cache:
            q2 = e2[k2]
            cache[key] = shape_distance(e1[k1], q2) ** 2
        return cache[key]

    len1 = {k: q.length() for k, q in e1.items()}
    len2 = {k: q.length() for k, q in e2.items()}
    best = np.inf
    options = real2 + [None]
    for choice in itertools.product(options, repeat=len(real1)):
        used = [c for c in choice if c is not None]
        if len(used) != len(set(used)):
            continue
        f = dict(zip(real1, choice))
        matched2 = set()
        acc = 0.0
        for (a, b), _ in e1.items():
            i, j = f[a], f[b]
            k2 = None if i is None or j is None else (min(i, j), max(i, j))
            if k2 in e2:
                # a reversed key means the second curve runs the other way; the
                # elastic distance is reversal invariant so orientation drops out
                acc += dist2((a, b), k2)
                matched2.add(k2)
            else:
                acc += len1[(a, b)]
        acc += sum(v for k, v in len2.items() if k not in matched2)
        attr = sum(abs(g1p.node_attr[a] - g2p.node_attr[f[a]]) for a in real1 if f[a] is not None)
        val = np.sqrt(acc) + lam * attr
        best = min(best, val)
    return best


def dense_affinity(k1, k2, C: np.ndarray, N: int, lam=0.0, attr1=None, attr2=None, null1=None,
                   null2=None, sigma=1.0) -> np.ndarray:
    """Lawler affinity matrix built entry by entry."""
    K = np.zeros((N * N, N * N))
    for e, (a, b) in enumerate(k1):
        for f, (i, j) in enumerate(k2):
            w = max(-0.5 * C[e, f], 0.0)
            for (x, y), (u, v) in (((a, b), (i, j)), ((a, b), (j, i))):
                K[x * N + u, y * N + v] += w
                K[y * N + v, x * N + u] += w
    if lam:
        for a in range(N):
            for i in range(N):
                if null1[a] or null2[i]:
                    K[a * N + i, a * N + i] += lam
                else:
                    K[a * N + i, a * N + i] += lam * np.exp(-((attr1[a] - attr2[i]) ** 2) / (2 * sigma**2))
    return K


def energy_by_loops(D: np.ndarray, a, b) -> float:
    a, b = list(a), list(b)
    ab = sum(D[i, j] for i in a for j in b)
    aa = sum(D[i, j] for i in a for j in a)
    bb = sum(D[i, j] for i in b for j in b)
    return 2 * ab / (len(a) * len(b)) - aa / len(a) ** 2 - bb / len(b) ** 2


def exact_permutation_p(D: np.ndarray, a, b) -> float:
    """Fraction of all relabelings whose statistic reaches the observed one."""
    pool = sorted(list(a) + list(b))
    obs = energy_by_loops(D, a, b)
    hits = total = 0
    for sub in itertools.combinations(pool, len(a)):
        rest = [p for p in pool if p not in sub]
        total += 1
        hits += energy_by_loops(D, sub, rest) >= obs - 1e-12
    return hits / total


def floyd_center(g) -> int:
    """Node of minimum eccentricity under arc-length edge weights (lowest index on ties)."""
    n = g.n
    W = np.full((n, n), np.inf)
    np.fill_diagonal(W, 0.0)
    for (i, j), q in g.edges.items():
        W[i, j] = W[j, i] = q.length()
    for k in range(n):
        W = np.minimum(W, W[:, [k]] + W[[k], :])
    ecc = W.max(axis=1)
    return int(np.argmin(ecc))
