"""Quotient-space geodesics, Fréchet means and tangent PCA of elastic graphs.

All statistics run in a common node index space.  Graphs are matched to a
template; template node ``k`` keeps slot ``k`` and every real node matched to
a template null gets a fresh slot of its own.  Missing edges are the zero
function, so averages and shooting vectors are plain entrywise arithmetic on
SRVF samples.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .config import RunConfig
from .curve_shape import Srvf, curve_geodesic
from .graph_core import ElasticGraph, GraphError, composite_metric, strip_null_nodes
from .matching import Correspondence, align, match, prepare

__all__ = [
    "GeodesicPath",
    "MeanResult",
    "PcaModel",
    "StatsError",
    "flat_dimension",
    "flat_of",
    "flatten",
    "frechet_cost",
    "geodesic",
    "largest_index",
    "mean",
    "mean_approx",
    "mean_gradient",
    "mean_sequential",
    "reconstruct",
    "tangent_pca",
]

log = logging.getLogger(__name__)


class StatsError(ValueError):
    pass


def _pmap(fn: Callable, items: Sequence, threads: int = 0) -> list:
    """Ordered map, concurrent when more than one worker is available."""
    workers = threads or os.cpu_count() or 1
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


def _check_population(graphs: Sequence[ElasticGraph], minimum: int = 1):
    if len(graphs) < minimum:
        raise StatsError(f"need at least {minimum} graph(s), got {len(graphs)}")
    dims = {g.dim for g in graphs}
    if len(dims) > 1:
        raise StatsError(f"graphs mix dimensions {sorted(dims)}")


def largest_index(graphs: Sequence[ElasticGraph]) -> int:
    """Most real nodes, then most edges, then first in input order."""
    return min(range(len(graphs)), key=lambda i: (-graphs[i].n_real, -graphs[i].num_edges, i))


# --- geodesics ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GeodesicPath:
    """Sampled geodesic from a padded first graph to the aligned second graph."""

    steps: list
    correspondence: Correspondence
    times: np.ndarray
    start: ElasticGraph
    end: ElasticGraph


def _counterpart_positions(g1: ElasticGraph, g2: ElasticGraph):
    """Null nodes take the coordinates of the node they are matched with."""
    p1, p2 = g1.node_pos.copy(), g2.node_pos.copy()
    p1[g1.is_null] = g2.node_pos[g1.is_null]
    p2[g2.is_null] = g1.node_pos[g2.is_null]
    return p1, p2


def _interpolate(g1: ElasticGraph, g2: ElasticGraph, s: float, keys=None) -> ElasticGraph:
    """Point at time ``s`` on the straight line between index-aligned graphs."""
    if s == 0.0 and keys is None:
        return g1
    if s == 1.0 and keys is None:
        return g2
    p1, p2 = _counterpart_positions(g1, g2)
    pos = (1.0 - s) * p1 + s * p2
    attr = (1.0 - s) * g1.node_attr + s * g2.node_attr
    null = g1.is_null & g2.is_null
    keys = sorted(set(g1.edges) | set(g2.edges)) if keys is None else keys
    edges = {}
    for k in keys:
        q = curve_geodesic(g1.edges.get(k), g2.edges.get(k), s)
        if q is not None:
            edges[k] = Srvf(q.values, pos[k[0]])
    return ElasticGraph(pos, attr, edges, g1.labels, null)


def geodesic(
    g1: ElasticGraph,
    g2: ElasticGraph,
    steps: int = 5,
    cfg: RunConfig = RunConfig(),
    prune: bool = False,
    correspondence: Optional[Correspondence] = None,
) -> GeodesicPath:
    """Geodesic in the graph shape space sampled at ``steps`` uniform times.

    The endpoints are included, so ``steps=2`` returns just the padded first
    graph and the aligned, registered second graph.  Edges matched to a null
    edge grow from or shrink to zero.  With ``prune`` only edges present at
    both ends are kept.
    """
    if steps < 2:
        raise StatsError("a geodesic needs at least 2 steps")
    g1p, g2p = prepare(g1, g2, cfg)
    corr = correspondence if correspondence is not None else match(g1p, g2p, cfg)
    end = align(g2p, corr)
    keys = None
    if prune:
        keys = sorted(set(g1p.edges) & set(end.edges))
    times = np.linspace(0.0, 1.0, steps)
    path = [_interpolate(g1p, end, float(s), keys) for s in times]
    return GeodesicPath(path, corr, times, g1p, end)


# --- common index space ------------------------------------------------------


def _register_to(template: ElasticGraph, g: ElasticGraph, cfg: RunConfig):
    """Match ``g`` to ``template``.

    Returns the aligned, edge-registered graph, ``d_b`` and the graph under
    the same permutation and rotation with its edges left unwarped.
    """
    tp, gp = prepare(template, g, cfg.with_(normalize=False))
    corr = match(tp, gp, cfg)
    return align(gp, corr), corr.distance, align(gp, corr, register=False)


def _common_space(template: ElasticGraph, aligned: Sequence[ElasticGraph]):
    """Reindex aligned graphs (size ``n_t + n_i``) into one shared slot space.

    Returns the template and the graphs, all padded to a common size, plus
    the mask of slots that hold a real node in at least one input.
    """
    nt = template.n
    maps, size = [], nt
    for a in aligned:
        m = -np.ones(a.n, int)
        m[:nt] = np.arange(nt)
        extra = [k for k in range(nt, a.n) if not a.is_null[k]]
        m[extra] = size + np.arange(len(extra))
        size += len(extra)
        maps.append(m)

    def lift(g: ElasticGraph, m: np.ndarray) -> ElasticGraph:
        pos = np.zeros((size, g.dim))
        attr = np.zeros(size)
        null = np.ones(size, bool)
        labels = [f"slot{k}" for k in range(size)]
        src = np.flatnonzero(m >= 0)
        pos[m[src]] = g.node_pos[src]
        attr[m[src]] = g.node_attr[src]
        null[m[src]] = g.is_null[src]
        for k in src:
            labels[m[k]] = g.labels[k]
        edges = {}
        for (i, j), q in g.edges.items():
            a, b = int(m[i]), int(m[j])
            edges[(a, b) if a < b else (b, a)] = q if a < b else q.reversed()
        return ElasticGraph(pos, attr, edges, tuple(labels), null)

    lifted = [lift(a, m) for a, m in zip(aligned, maps)]
    base = lift(template, np.arange(nt))
    used = np.zeros(size, bool)
    for g in lifted:
        used |= ~g.is_null
    return base, lifted, used


def _keep_slots(g: ElasticGraph, keep: np.ndarray) -> ElasticGraph:
    idx = np.flatnonzero(keep)
    new = -np.ones(g.n, int)
    new[idx] = np.arange(idx.size)
    edges = {(int(new[i]), int(new[j])): q for (i, j), q in g.edges.items()}
    weights = None
    if g.edge_weight is not None:
        weights = {(int(new[i]), int(new[j])): w for (i, j), w in g.edge_weight.items()}
    return ElasticGraph(
        g.node_pos[idx], g.node_attr[idx], edges, tuple(g.labels[k] for k in idx), g.is_null[idx],
        weights,
    )


def _average(graphs: Sequence[ElasticGraph]) -> ElasticGraph:
    """Entrywise mean of index-aligned graphs; a missing edge counts as zero.

    Node positions average over the inputs where the node is real; edge
    weights are the fraction of inputs holding the edge.
    """
    m = len(graphs)
    size, d = graphs[0].n, graphs[0].dim
    real = np.array([~g.is_null for g in graphs])
    count = real.sum(axis=0)
    pos = np.zeros((size, d))
    for g, r in zip(graphs, real):
        pos[r] += g.node_pos[r]
    pos[count > 0] /= count[count > 0, None]
    attr = np.mean([np.where(g.is_null, 0.0, g.node_attr) for g in graphs], axis=0)
    keys = sorted({k for g in graphs for k in g.edges})
    T = next(q.T for g in graphs for q in g.edges.values()) if keys else None
    edges, freq = {}, {}
    for k in keys:
        acc = np.zeros((T, d))
        hits = 0
        for g in graphs:
            q = g.edges.get(k)
            if q is not None:
                acc += q.values
                hits += 1
        edges[k] = Srvf(acc / m, pos[k[0]])
        freq[k] = hits / m
    labels = tuple(f"slot{k}" for k in range(size))
    return ElasticGraph(pos, attr, edges, labels, count == 0, freq)


def _frequencies(registered: Sequence[ElasticGraph], mean: ElasticGraph) -> dict:
    m = len(registered)
    return {k: sum(k in g.edges for g in registered) / m for k in mean.edges}


# --- means -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeanResult:
    """Mean graph with the inputs registered into its slot space.

    ``mean`` and every entry of ``registered`` share one node indexing; slots
    that are empty in the mean are null nodes.  ``edge_frequency`` maps mean
    edge keys to the fraction of inputs holding a real edge there.
    """

    mean: ElasticGraph
    registered: list
    edge_frequency: dict
    cost_trace: list
    method: str = ""
    diagnostics: dict = field(default_factory=dict)

    def display_mean(self, prune_fraction: float = 0.1) -> ElasticGraph:
        """Mean without empty slots; edges rarer than ``prune_fraction`` get weight 0."""
        w = {k: (f if f >= prune_fraction else 0.0) for k, f in self.edge_frequency.items()}
        return strip_null_nodes(self.mean.replace(edge_weight=w))


def _settle(template: ElasticGraph, graphs, cfg: RunConfig, poses: bool = False):
    """Register all graphs to ``template``; returns (mean-space graphs, cost).

    With ``poses`` the unwarped counterparts, lifted into the same slots, are
    appended to the result.
    """
    res = _pmap(lambda g: _register_to(template, g, cfg), list(graphs), cfg.threads)
    cost = float(sum(dist**2 for _, dist, _ in res))
    base, lifted, used = _common_space(template, [a for a, _, _ in res])
    if not poses:
        return base, lifted, used, cost
    # slot maps depend only on which nodes are real, so both lifts agree
    _, posed, _ = _common_space(template, [p for _, _, p in res])
    return base, lifted, used, cost, posed


def _finalize(template, lifted, used, trace, method, diagnostics=None) -> MeanResult:
    keep = used | ~template.is_null
    mean = _keep_slots(template, keep)
    registered = [_keep_slots(g, keep) for g in lifted]
    freq = _frequencies(registered, mean)
    mean = mean.replace(edge_weight=freq)
    return MeanResult(mean, registered, freq, list(trace), method, dict(diagnostics or {}))


def _compact(g: ElasticGraph) -> ElasticGraph:
    """Drop empty slots so the next round pads a smaller template."""
    return strip_null_nodes(g)


def mean_gradient(
    graphs: Sequence[ElasticGraph],
    cfg: RunConfig = RunConfig(),
    template: Optional[ElasticGraph] = None,
) -> MeanResult:
    """Fréchet mean by alternating registration and Euclidean averaging.

    Starts from the largest graph unless ``template`` is given.  Each round
    registers every input to the current mean and averages the registered
    graphs.  A new mean is accepted only if it lowers the summed squared
    distances, so the cost trace never increases; iteration stops when the
    relative decrease falls below ``cfg.mean_tol`` or after ``cfg.mean_iters``
    rounds.  The result is a local minimizer.
    """
    _check_population(graphs)
    mu = _compact(template if template is not None else graphs[largest_index(graphs)])
    base, lifted, used, cost = _settle(mu, graphs, cfg)
    trace = [cost]
    rejected = False
    for _ in range(cfg.mean_iters):
        if cost <= 0.0:
            break
        cand = _compact(_average(lifted))
        nb, nl, nu, ncost = _settle(cand, graphs, cfg)
        if ncost > cost:
            rejected = True
            log.debug("mean update rejected: cost %.6g -> %.6g", cost, ncost)
            break
        drop = cost - ncost
        base, lifted, used, cost = nb, nl, nu, ncost
        trace.append(cost)
        if drop <= cfg.mean_tol * cost:
            break
    return _finalize(base, lifted, used, trace, "gradient", {"rejected_update": rejected})


def _midpoint_mean(mu: ElasticGraph, g: ElasticGraph, s: float, cfg: RunConfig) -> ElasticGraph:
    path = geodesic(mu, g, 2, cfg)
    return strip_null_nodes(_interpolate(path.start, path.end, s))


def mean_sequential(
    graphs: Sequence[ElasticGraph], cfg: RunConfig = RunConfig(), order: Optional[Sequence[int]] = None
) -> MeanResult:
    """Recursive mean: move ``1/i`` of the way to the ``i``-th graph.

    The result depends on input order; pass ``order`` (for example a seeded
    shuffle) to control it.  Fewer than two graphs falls back to
    :func:`mean_gradient`.
    """
    _check_population(graphs)
    if len(graphs) < 2:
        return mean_gradient(graphs, cfg)
    seq = [graphs[i] for i in order] if order is not None else list(graphs)
    mu = _midpoint_mean(seq[0], seq[1], 0.5, cfg)
    for i, g in enumerate(seq[2:], start=3):
        mu = _midpoint_mean(mu, g, 1.0 / i, cfg)
    base, lifted, used, cost = _settle(mu, graphs, cfg)
    return _finalize(base, lifted, used, [cost], "sequential")


def mean_approx(
    graphs: Sequence[ElasticGraph],
    cfg: RunConfig = RunConfig(),
    diagnostic_pairs: int = 0,
    seed: int = 0,
) -> MeanResult:
    """One registration of every graph to the largest, then one average.

    With ``diagnostic_pairs`` > 0, that many random pairs are scored three
    ways: ``d_b`` in the given labelings, ``d_b`` after both are registered to
    the largest graph, and the pairwise optimum ``d_g``.  Registration can
    only lower distances, so the three should be nonincreasing.
    """
    _check_population(graphs)
    mu = _compact(graphs[largest_index(graphs)])
    _, lifted, used, cost, posed = _settle(mu, graphs, cfg, poses=True)
    avg = _average(lifted)
    # the single pass scores the average under the same fixed registrations
    fixed = sum(composite_metric(avg, g, cfg.lam, registered=True) ** 2 for g in lifted)
    res = _finalize(avg, lifted, used | ~avg.is_null, [float(fixed)], "approx", {"cost_to_largest": cost})
    diag = {}
    if diagnostic_pairs and len(graphs) > 1:
        rng = np.random.default_rng(seed)
        pairs = sorted({tuple(sorted(rng.choice(len(graphs), 2, replace=False).tolist()))
                        for _ in range(diagnostic_pairs)})
        diag["pairs"] = [registration_diagnostic(graphs, posed, i, j, cfg) for i, j in pairs]
    if diag:
        res.diagnostics.update(diag)
    return res


def registration_diagnostic(graphs, posed, i: int, j: int, cfg: RunConfig) -> dict:
    """``d_b`` unregistered, via the common template, and the pairwise ``d_g``.

    ``posed`` holds the graphs permuted and rotated into the template's slots
    with unwarped edges, so the middle value is ``d_b`` under one particular
    correspondence and can never undercut ``d_g`` from the exact solver.
    """
    from .matching import quotient_distance

    gi, gj = prepare(graphs[i], graphs[j], cfg.with_(normalize=False))
    raw = composite_metric(gi, gj, cfg.lam)
    via = composite_metric(posed[i], posed[j], cfg.lam)
    best = quotient_distance(graphs[i], graphs[j], cfg.with_(normalize=False))
    return {"i": int(i), "j": int(j), "d_b": raw, "d_b_registered": via, "d_g": best}


def frechet_cost(mu: ElasticGraph, graphs: Sequence[ElasticGraph], cfg: RunConfig = RunConfig()) -> float:
    """Sum of squared quotient distances from ``mu`` to every graph."""
    res = _pmap(lambda g: _register_to(_compact(mu), g, cfg)[1], list(graphs), cfg.threads)
    return float(sum(d**2 for d in res))


def mean(graphs: Sequence[ElasticGraph], cfg: RunConfig = RunConfig()) -> MeanResult:
    """Mean by ``cfg.mean_method``."""
    if cfg.mean_method == "sequential":
        return mean_sequential(graphs, cfg)
    if cfg.mean_method == "approx":
        return mean_approx(graphs, cfg)
    return mean_gradient(graphs, cfg)


# --- tangent PCA -------------------------------------------------------------


def flatten(g: ElasticGraph, keys: Sequence[tuple[int, int]], T: int, d: int) -> np.ndarray:
    """Stack edge SRVFs over ``keys`` into a vector with ``||v|| = d_a`` scaling.

    Each block is scaled by ``sqrt(1/T)`` so Euclidean norms of flattened
    differences equal the edge metric of registered graphs.
    """
    out = np.zeros((len(keys), T, d))
    for n, k in enumerate(keys):
        q = g.edges.get(k)
        if q is not None:
            out[n] = q.values
    return out.ravel() / np.sqrt(T)


def flat_dimension(d: int, T: int, n: int) -> int:
    """Size of an ``n x n`` adjacency of ``T``-sample SRVFs in ``R^d``."""
    return d * T * n * n


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Principal directions of shooting vectors at a mean graph.

    ``directions`` has shape ``(k, D)`` over the compact coordinates of
    :func:`flatten` on ``keys``; ``dim_flat`` is the size of the full
    ``n x n`` adjacency of SRVF samples, ``d * T * n**2``.
    """

    mean: ElasticGraph
    keys: list
    directions: np.ndarray
    singular_values: np.ndarray
    scores: np.ndarray
    spectrum: np.ndarray
    shooting: np.ndarray
    dim_flat: int
    T: int
    registered: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.directions.shape[0]

    def explained(self) -> np.ndarray:
        """Variance fractions of all components; zeros when there is no variance."""
        var = self.spectrum**2
        tot = var.sum()
        return var / tot if tot > 0 else np.zeros_like(var)

    def flat_mean(self) -> np.ndarray:
        return flatten(self.mean, self.keys, self.T, self.mean.dim)


def _choose_k(spectrum: np.ndarray, variance: float, k: Optional[int]) -> int:
    if k is not None:
        return min(k, spectrum.size)
    var = spectrum**2
    tot = var.sum()
    if tot <= 0:
        return 1
    cum = np.cumsum(var) / tot
    return int(min(np.searchsorted(cum, variance - 1e-12) + 1, spectrum.size))


def tangent_pca(
    graphs: Sequence[ElasticGraph],
    cfg: RunConfig = RunConfig(),
    mean_result: Optional[MeanResult] = None,
) -> PcaModel:
    """PCA of shooting vectors ``v_i = A_i* - A_mu`` at the mean.

    The vectors are already deviations from the mean and are not centered
    again.  ``cfg.k`` fixes the number of components; otherwise the smallest
    count reaching ``cfg.variance`` of the total is kept.
    """
    _check_population(graphs, 2)
    res = mean_result if mean_result is not None else mean(graphs, cfg)
    mu = res.mean
    keys = sorted(set(mu.edges).union(*[g.edges for g in res.registered]))
    T = mu.T or next((g.T for g in res.registered if g.T), cfg.T)
    d = mu.dim
    base = flatten(mu, keys, T, d)
    V = np.stack([flatten(g, keys, T, d) - base for g in res.registered])
    _, s, Vt = np.linalg.svd(V, full_matrices=False)
    k = _choose_k(s, cfg.variance, cfg.k)
    dirs = Vt[:k]
    return PcaModel(
        mu, keys, dirs, s[:k], V @ dirs.T, s, V, flat_dimension(d, T, mu.n), T, list(res.registered)
    )


def _unflatten(model: PcaModel, vec: np.ndarray) -> dict:
    blocks = (vec * np.sqrt(model.T)).reshape(len(model.keys), model.T, model.mean.dim)
    return dict(zip(model.keys, blocks))


def reconstruct(model: PcaModel, scores, prune: Optional[float] = None) -> ElasticGraph:
    """Graph at ``mean + sum_k scores[k] * directions[k]``.

    Every key of the model keeps an edge.  Edges whose norm falls below
    ``prune`` times the largest edge norm get a display weight below 1
    proportional to their norm; the rest get weight 1.
    """
    scores = np.asarray(scores, float).reshape(-1)
    if scores.size != model.k:
        raise StatsError(f"expected {model.k} scores, got {scores.size}")
    vec = model.flat_mean() + scores @ model.directions
    blocks = _unflatten(model, vec)
    mu = model.mean
    norms = {k: float(np.sqrt(np.sum(b * b) / model.T)) for k, b in blocks.items()}
    top = max(norms.values(), default=0.0)
    cut = (prune if prune is not None else 0.0) * top
    edges, weights = {}, {}
    for k, b in blocks.items():
        edges[k] = Srvf(b, mu.node_pos[k[0]])
        weights[k] = 1.0 if norms[k] >= cut or cut <= 0 else norms[k] / cut
    # every slot carrying an edge is a real node
    null = mu.is_null.copy()
    for i, j in edges:
        null[i] = null[j] = False
    return ElasticGraph(mu.node_pos, mu.node_attr, edges, mu.labels, null, weights)


def flat_of(model: PcaModel, g: ElasticGraph) -> np.ndarray:
    """Compact coordinates of a graph already in the model's slot space."""
    if g.n != model.mean.n:
        raise GraphError("graph is not in the model's slot space")
    return flatten(g, model.keys, model.T, model.mean.dim)
