"""Random curves, warps and graphs for tests, benchmarks and demos."""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

from .curve_shape import Reparam
from .graph_core import ElasticGraph, from_curves


def smooth_curve(rng, start, end, n: int = 200, bend: float = 0.3, modes: int = 3) -> np.ndarray:
    """Chord from ``start`` to ``end`` plus a few sine modes vanishing at both ends."""
    start, end = np.asarray(start, float), np.asarray(end, float)
    d = start.size
    t = np.linspace(0.0, 1.0, n)[:, None]
    span = max(np.linalg.norm(end - start), 1e-3)
    pts = start + t * (end - start)
    for k in range(1, modes + 1):
        amp = rng.normal(size=d) * bend * span / k
        pts = pts + np.sin(k * np.pi * t) * amp
    return pts


def random_polyline(rng, n_points: int = 20, dim: int = 3) -> np.ndarray:
    return np.cumsum(rng.normal(size=(n_points, dim)), axis=0)


def random_warp(rng, T: int = 50, strength: float = 0.5) -> Reparam:
    """Smooth increasing warp with log-slopes bounded by ``strength``."""
    s = np.linspace(0.0, 1.0, 400)
    logv = sum(
        rng.uniform(-1, 1) * strength / k * np.cos(k * np.pi * s + rng.uniform(0, np.pi))
        for k in range(1, 4)
    )
    v = np.exp(np.clip(logv, -strength, strength))
    cum = np.concatenate([[0.0], np.cumsum((v[1:] + v[:-1]) / 2)])
    cum /= cum[-1]
    g = np.interp(np.linspace(0.0, 1.0, T + 1), s, cum)
    g[0], g[-1] = 0.0, 1.0
    return Reparam(g)


def random_rotation(rng, dim: int = 3) -> np.ndarray:
    if dim == 3:
        return Rotation.random(random_state=rng).as_matrix()
    a = rng.uniform(0, 2 * np.pi)
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


def random_permutation(rng, n: int) -> np.ndarray:
    return rng.permutation(n)


def random_graph(
    rng,
    n: int,
    dim: int = 3,
    extra_edges: int = 0,
    T: int = 50,
    bend: float = 0.3,
    spread: float = 1.0,
) -> ElasticGraph:
    """Random spanning tree over uniform node positions plus extra chords."""
    pos = rng.uniform(0.0, spread, size=(n, dim))
    pairs = set()
    for k in range(1, n):
        pairs.add((int(rng.integers(0, k)), k))
    tries = 0
    while extra_edges > 0 and tries < 100 * n and len(pairs) < n * (n - 1) // 2:
        a, b = sorted(rng.choice(n, 2, replace=False).tolist())
        tries += 1
        if (a, b) not in pairs:
            pairs.add((a, b))
            extra_edges -= 1
    curves = {(a, b): smooth_curve(rng, pos[a], pos[b], bend=bend) for a, b in sorted(pairs)}
    return from_curves(pos, curves, T)


def ring_with_offshoots(
    rng,
    ring: int = 6,
    offshoot_prob: float = 0.7,
    jitter: float = 0.05,
    T: int = 50,
    dim: int = 3,
    radius: float = 1.0,
    template: Optional[np.random.Generator] = None,
) -> ElasticGraph:
    """A ring of nodes with optional radial offshoots, all gently curved.

    Node layout is shared by a population when the same ``template`` seed
    drives it; ``rng`` controls the jitter and which offshoots exist.
    """
    base = template if template is not None else np.random.default_rng(12345)
    ang = np.linspace(0, 2 * np.pi, ring, endpoint=False) + base.uniform(-0.2, 0.2, ring)
    ring_pos = np.zeros((ring, dim))
    ring_pos[:, 0] = radius * np.cos(ang)
    ring_pos[:, 1] = radius * np.sin(ang)
    out_pos = ring_pos * 1.6
    if dim == 3:
        out_pos[:, 2] = base.uniform(-0.3, 0.3, ring)
    ring_modes = base.normal(size=(ring, dim)) * 0.1
    out_modes = base.normal(size=(ring, dim)) * 0.1
    pos = [p + rng.normal(size=dim) * jitter for p in ring_pos]
    curves = {}
    for k in range(ring):
        a, b = k, (k + 1) % ring
        t = np.linspace(0, 1, 200)[:, None]
        pts = pos[a] + t * (pos[b] - pos[a]) + np.sin(np.pi * t) * (
            ring_modes[k] + rng.normal(size=dim) * jitter
        )
        curves[(a, b)] = pts
    for k in range(ring):
        if rng.uniform() < offshoot_prob:
            idx = len(pos)
            pos.append(out_pos[k] + rng.normal(size=dim) * jitter)
            t = np.linspace(0, 1, 200)[:, None]
            pts = pos[k] + t * (pos[idx] - pos[k]) + np.sin(np.pi * t) * (
                out_modes[k] + rng.normal(size=dim) * jitter
            )
            curves[(k, idx)] = pts
    return from_curves(np.array(pos), curves, T)


def relabel_rotate(rng, g: ElasticGraph, rotate_too: bool = True):
    """Randomly relabeled (and rotated) copy plus the permutation and rotation used."""
    from .graph_core import permute, rotate

    perm = rng.permutation(g.n)
    O = random_rotation(rng, g.dim) if rotate_too else np.eye(g.dim)
    return rotate(permute(g, perm), O), perm, O
