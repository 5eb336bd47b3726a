"""Graph registration: node permutation plus global rotation.

The second graph is aligned to the first by a permutation ``perm`` of the
padded node set (node ``k`` of the first graph is matched with node
``perm[k]`` of the second) and a rotation ``O`` applied to all of its edges.
For a fixed rotation the squared edge metric decomposes as

    d_a^2 = sum ||e||^2 + sum ||f||^2 + sum_{matched e, f} C[e, f],
    C[e, f] = d_s(e, f)^2 - ||e||^2 - ||f||^2,

so every solver works on the table ``C`` of real edge pairs.  The exact solver
enumerates all injections of real nodes; the approximate solver maximizes the
Lawler quadratic assignment objective ``vec(P)' K vec(P)`` with a spectral start
and graduated assignment, then polishes by pairwise swaps on the true metric.
Rotations alternate with permutations through Procrustes steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment

from .config import RunConfig
from .curve_shape import Reparam, apply_reparam, elastic_register, register_pairs, register_table
from .graph_core import (
    ElasticGraph,
    composite_metric,
    normalize_scale,
    pad_null_nodes,
    permute,
    registered_copy,
    rotate,
)

__all__ = [
    "AffinityMatrix",
    "Correspondence",
    "MatchError",
    "MatchProblem",
    "affinity_objective",
    "align",
    "build_affinity",
    "match",
    "match_approx",
    "match_exact",
    "procrustes_rotation",
    "quotient_distance",
]

log = logging.getLogger(__name__)

GA_FACTOR = 0.95
GA_SWEEPS = 100
SINKHORN_ITERS = 30
SINKHORN_TOL = 1e-6
POWER_ITERS = 200
SWAP_SWEEPS = 50
# relative distance treated as an exact zero when choosing among rotation starts
ZERO_TOL = 1e-6


class MatchError(ValueError):
    pass


# --- correspondence ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Correspondence:
    """Result of registering a padded second graph to a padded first graph.

    ``edge_regs`` maps edge keys of the first graph to the reparametrization of
    the aligned second-graph edge with the same key.  ``distance`` is ``d_b``
    recomputed from scratch on the aligned graphs.
    """

    perm: np.ndarray
    rotation: np.ndarray
    edge_regs: Mapping[tuple[int, int], Reparam]
    distance: float
    seeds: tuple = ()
    solver: str = ""
    converged: bool = True
    objective: tuple = ()
    sizes: tuple = (0, 0)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "perm": self.perm.tolist(),
            "rotation": self.rotation.tolist(),
            "edges": [
                {"u": int(i), "v": int(j), "gamma": r.gamma.tolist(), "reversed": bool(r.reversed)}
                for (i, j), r in sorted(self.edge_regs.items())
            ],
            "distance": self.distance,
            "seeds": [list(map(int, s)) for s in self.seeds],
            "solver": self.solver,
            "converged": self.converged,
            "objective_trace": list(self.objective),
            "sizes": list(self.sizes),
            "diagnostics": self.diagnostics,
        }


def align(g2p: ElasticGraph, corr: Correspondence, register: bool = True) -> ElasticGraph:
    """Second padded graph permuted, rotated and (optionally) edge-registered."""
    g = rotate(permute(g2p, corr.perm), corr.rotation)
    return registered_copy(g, corr.edge_regs) if register else g


# --- Procrustes --------------------------------------------------------------


def procrustes_rotation(pairs: Sequence[tuple[np.ndarray, np.ndarray]], d: Optional[int] = None):
    """Rotation minimizing ``sum ||q1 - O q2||^2`` over matched SRVF pairs.

    Returns ``(O, ok)``; ``ok`` is False when no pair carries signal, in which
    case the identity is returned.
    """
    if not pairs:
        if d is None:
            raise MatchError("dimension needed when no pairs are given")
        return np.eye(d), False
    d = pairs[0][0].shape[1]
    M = np.zeros((d, d))
    for q1, q2 in pairs:
        M += q1.T @ q2 / q1.shape[0]
    if not np.any(M):
        return np.eye(d), False
    U, _, Vt = np.linalg.svd(M)
    D = np.eye(d)
    D[-1, -1] = np.sign(np.linalg.det(U @ Vt)) or 1.0
    return U @ D @ Vt, True


# --- problem setup -----------------------------------------------------------


class MatchProblem:
    """Padded graph pair with the index structures shared by both solvers."""

    def __init__(self, g1p: ElasticGraph, g2p: ElasticGraph, lam: float = 0.0, seeds=()):
        if g1p.n != g2p.n:
            raise MatchError("graphs must be padded to a common size")
        if g1p.dim != g2p.dim:
            raise MatchError("graphs differ in dimension")
        if g1p.T is not None and g2p.T is not None and g1p.T != g2p.T:
            raise MatchError(f"edge sampling differs: T={g1p.T} vs T={g2p.T}")
        if lam < 0:
            raise MatchError("lambda must be nonnegative")
        self.g1, self.g2, self.lam = g1p, g2p, float(lam)
        self.N = g1p.n
        self.k1 = list(g1p.edges)
        self.k2 = list(g2p.edges)
        self.ea = np.array([k[0] for k in self.k1], int)
        self.eb = np.array([k[1] for k in self.k1], int)
        self.Q1 = np.stack([q.values for q in g1p.edges.values()]) if self.k1 else None
        self.Q2 = np.stack([q.values for q in g2p.edges.values()]) if self.k2 else None
        self.n1 = np.array([q.length() for q in g1p.edges.values()])
        self.n2 = np.array([q.length() for q in g2p.edges.values()])
        self.total = float(self.n1.sum() + self.n2.sum())
        self.F = -np.ones((self.N, self.N), int)
        for f, (i, j) in enumerate(self.k2):
            self.F[i, j] = self.F[j, i] = f
        live = ~(g1p.is_null[:, None] | g2p.is_null[None, :])
        self.A = np.where(live, np.abs(g1p.node_attr[:, None] - g2p.node_attr[None, :]), 0.0)
        self.seeds = self._check_seeds(seeds)
        self.inc = [[] for _ in range(self.N)]
        for e, (a, b) in enumerate(self.k1):
            self.inc[a].append((e, b))
            self.inc[b].append((e, a))

    def _check_seeds(self, seeds) -> tuple:
        out, rows, cols = [], set(), set()
        for a, i in seeds:
            a, i = int(a), int(i)
            if not (0 <= a < self.N and 0 <= i < self.N):
                raise MatchError(f"seed {(a, i)} out of range for padded size {self.N}")
            if a in rows or i in cols:
                raise MatchError(f"seed {(a, i)} conflicts with another seed")
            rows.add(a)
            cols.add(i)
            out.append((a, i))
        return tuple(sorted(out))

    # tables ------------------------------------------------------------------

    def rotated_Q2(self, O: np.ndarray) -> Optional[np.ndarray]:
        return None if self.Q2 is None else self.Q2 @ O.T

    def cost_table(self, O: np.ndarray, refine: bool = True) -> np.ndarray:
        """``C[e, f] = d_s^2 - ||e||^2 - ||f||^2`` at rotation ``O``."""
        if self.Q1 is None or self.Q2 is None:
            return np.zeros((len(self.k1), len(self.k2)))
        D2, _ = register_table(self.Q1, self.rotated_Q2(O), refine)
        return D2 - self.n1[:, None] - self.n2[None, :]

    def invariant_table(self) -> np.ndarray:
        """Rotation-free screening cost: best rotation per pair, identity warp."""
        if self.Q1 is None or self.Q2 is None:
            return np.zeros((len(self.k1), len(self.k2)))
        T = self.Q1.shape[1]
        M = np.einsum("etk,ftl->efkl", self.Q1, self.Q2) / T
        Mr = np.einsum("etk,ftl->efkl", self.Q1, -self.Q2[:, ::-1]) / T
        s = np.maximum(
            np.linalg.svd(M, compute_uv=False).sum(-1), np.linalg.svd(Mr, compute_uv=False).sum(-1)
        )
        return -2.0 * s

    # objective ---------------------------------------------------------------

    def edge_sum(self, C: np.ndarray, perm: np.ndarray) -> float:
        if not self.k1:
            return 0.0
        f = self.F[perm[self.ea], perm[self.eb]]
        m = f >= 0
        return float(C[np.flatnonzero(m), f[m]].sum())

    def value(self, C: np.ndarray, perm: np.ndarray) -> float:
        """``d_b`` of ``perm`` under cost table ``C``."""
        d = np.sqrt(max(self.total + self.edge_sum(C, perm), 0.0))
        if self.lam:
            d += self.lam * float(self.A[np.arange(self.N), perm].sum())
        return d

    def free(self) -> tuple[np.ndarray, np.ndarray]:
        rows = np.setdiff1d(np.arange(self.N), [a for a, _ in self.seeds])
        cols = np.setdiff1d(np.arange(self.N), [i for _, i in self.seeds])
        return rows, cols

    def matched_pairs(self, perm: np.ndarray) -> list[tuple[int, int]]:
        if not self.k1:
            return []
        f = self.F[perm[self.ea], perm[self.eb]]
        return [(e, int(f[e])) for e in range(len(self.k1)) if f[e] >= 0]

    # evaluation --------------------------------------------------------------

    def true_value(self, perm: np.ndarray, O: np.ndarray) -> float:
        """``d_b`` of ``(perm, O)`` with refined registrations of matched pairs."""
        pairs = self.matched_pairs(perm)
        acc = 0.0
        if pairs:
            e = np.array([p[0] for p in pairs])
            f = np.array([p[1] for p in pairs])
            D2, _ = register_pairs(self.Q1[e], self.rotated_Q2(O)[f])
            acc = float((D2 - self.n1[e] - self.n2[f]).sum())
        d = np.sqrt(max(self.total + acc, 0.0))
        if self.lam:
            d += self.lam * float(self.A[np.arange(self.N), perm].sum())
        return d

    def procrustes(self, perm: np.ndarray, O: np.ndarray, iters: int = 5):
        """Procrustes rotation for ``perm``, re-registering matched pairs until ``O`` settles."""
        matched = self.matched_pairs(perm)
        if not matched:
            return np.eye(self.g1.dim), False
        for _ in range(iters):
            pairs = []
            for e, f in matched:
                q1 = self.g1.edges[self.k1[e]]
                q2 = self.g2.edges[self.k2[f]].rotated(O)
                r, _ = elastic_register(q1, q2)
                pairs.append((q1.values, apply_reparam(q2, r).values @ O))
            O_new, ok = procrustes_rotation(pairs, self.g1.dim)
            if not ok:
                return O, False
            step = np.abs(O_new - O).max()
            O = O_new
            if step < 1e-7:
                break
        return O, True

    def unwarped_procrustes(self, perm: np.ndarray):
        """Procrustes rotation on identity-warped pairs, each in its better orientation."""
        pairs = []
        for e, f in self.matched_pairs(perm):
            q1, q2 = self.Q1[e], self.Q2[f]
            q2r = -q2[::-1]
            s = np.linalg.svd(q1.T @ q2, compute_uv=False).sum()
            sr = np.linalg.svd(q1.T @ q2r, compute_uv=False).sum()
            pairs.append((q1, q2 if s >= sr else q2r))
        return procrustes_rotation(pairs, self.g1.dim)

    def finish(self, perm, O, solver, converged, objective, diagnostics=None) -> Correspondence:
        """Correspondence with registrations and distance recomputed from scratch."""
        perm = np.asarray(perm, int)
        aligned = rotate(permute(self.g2, perm), O)
        regs = {}
        for k, q1 in self.g1.edges.items():
            q2 = aligned.edges.get(k)
            if q2 is not None:
                regs[k] = elastic_register(q1, q2)[0]
        dist = composite_metric(self.g1, aligned, self.lam)
        return Correspondence(
            perm,
            np.asarray(O, float),
            regs,
            float(dist),
            self.seeds,
            solver,
            bool(converged),
            tuple(float(v) for v in objective),
            (self.g1.n_real, self.g2.n_real),
            dict(diagnostics or {}),
        )


# --- exact solver ------------------------------------------------------------


def _complete(prob: MatchProblem, assign: dict) -> np.ndarray:
    """Full padded permutation from real-node assignments (``None`` = null)."""
    N = prob.N
    perm = -np.ones(N, int)
    used = set()
    for a, i in assign.items():
        if i is not None:
            perm[a] = i
            used.add(i)
    null2 = [i for i in range(N) if prob.g2.is_null[i] and i not in used]
    k = 0
    for a in sorted(assign):
        if assign[a] is None:
            perm[a] = null2[k]
            used.add(null2[k])
            k += 1
    rest = [i for i in range(N) if i not in used]
    for a, i in zip([a for a in range(N) if perm[a] < 0], rest):
        perm[a] = i
    return perm


def _exact_search(prob: MatchProblem, C: np.ndarray, cap: int):
    """Minimize ``d_b`` over all injections of real nodes for the table ``C``."""
    g1, g2, N = prob.g1, prob.g2, prob.N
    seeded1 = {a: i for a, i in prob.seeds}
    seeded2 = set(seeded1.values())
    free1 = [a for a in range(N) if not g1.is_null[a] and a not in seeded1]
    free2 = [i for i in range(N) if not g2.is_null[i] and i not in seeded2]
    if max(len(free1), len(free2)) > cap:
        raise MatchError(
            f"exact matching over {len(free1)}x{len(free2)} free real nodes exceeds the cap "
            f"of {cap}; use the approximate solver or add seeds"
        )
    # per-edge lookup: pair cost when edge e lands on g2 nodes (i, j)
    edge_tab = np.zeros((len(prob.k1), N, N))
    fmask = prob.F >= 0
    for e in range(len(prob.k1)):
        edge_tab[e][fmask] = C[e, prob.F[fmask]]
    base_edge = 0.0
    base_attr = float(sum(prob.A[a, i] for a, i in prob.seeds))
    for e, (a, b) in enumerate(prob.k1):
        if a in seeded1 and b in seeded1:
            base_edge += edge_tab[e, seeded1[a], seeded1[b]]
    opts = np.array(free2 + [-1], int)
    L = len(free1)
    pos1 = {a: t for t, a in enumerate(free1)}
    tgt = np.zeros((1, L), int)
    used = np.zeros((1, len(free2)), bool)
    esum = np.full(1, base_edge)
    asum = np.full(1, base_attr)
    col_of = np.zeros(N, int)
    col_of[free2] = np.arange(len(free2))
    for t, a in enumerate(free1):
        S = tgt.shape[0]
        K = opts.size
        ok = np.ones((S, K), bool)
        ok[:, :-1] = ~used
        s_idx, o_idx = np.nonzero(ok)
        o = opts[o_idx]
        new_e = esum[s_idx].copy()
        new_a = asum[s_idx].copy()
        real = o >= 0
        new_a[real] += prob.A[a, o[real]]
        for e, b in prob.inc[a]:
            if b in seeded1:
                j = np.full(s_idx.size, seeded1[b])
            elif pos1.get(b, t) < t:
                j = tgt[s_idx, pos1[b]]
            else:
                continue
            m = real & (j >= 0)
            new_e[m] += edge_tab[e, o[m], j[m]]
        nt = tgt[s_idx].copy()
        nt[:, t] = o
        nu = used[s_idx].copy()
        nu[np.flatnonzero(real), col_of[o[real]]] = True
        tgt, used, esum, asum = nt, nu, new_e, new_a
    d = np.sqrt(np.maximum(prob.total + esum, 0.0)) + prob.lam * asum
    best = d.min()
    tied = np.flatnonzero(d <= best + 1e-12 * max(1.0, abs(best)))
    perms = []
    for s in tied:
        assign = dict(seeded1)
        for t, a in enumerate(free1):
            assign[a] = int(tgt[s, t]) if tgt[s, t] >= 0 else None
        perms.append(_complete(prob, assign))
    perm = min(perms, key=lambda p: tuple(p.tolist()))
    return perm, float(best), int(d.size)


def _position_rotation(prob: MatchProblem, perm: np.ndarray):
    """Procrustes rotation of centered matched real-node positions."""
    real = ~(prob.g1.is_null | prob.g2.is_null[perm])
    if real.sum() < 2:
        return np.eye(prob.g1.dim), False
    x = prob.g1.node_pos[real]
    y = prob.g2.node_pos[perm[real]]
    x = x - x.mean(axis=0)
    y = y - y.mean(axis=0)
    return procrustes_rotation([(x, y)], prob.g1.dim)


def _rotation_starts(prob: MatchProblem, cfg: RunConfig, solve) -> list[tuple[str, np.ndarray]]:
    """Starting rotations for the alternation.

    ``identity`` uses O = I; ``positions`` matches rotation-free edge scores and
    aligns matched node positions; ``auto`` tries a start from rotation-free
    edge scores aligned on the edges themselves, then the identity.
    """
    d = prob.g1.dim
    starts = []
    if cfg.rotation_init in ("auto", "positions"):
        perm = solve(prob.invariant_table())
        if cfg.rotation_init == "positions":
            O, ok = _position_rotation(prob, perm)
        else:
            O, ok = prob.unwarped_procrustes(perm)
            if ok:
                O, ok = prob.procrustes(perm, O)
        if ok:
            starts.append((cfg.rotation_init, O))
    if cfg.rotation_init in ("auto", "identity"):
        starts.append(("identity", np.eye(d)))
    if not starts:
        starts.append(("identity", np.eye(d)))
    return starts


def _alternate(prob: MatchProblem, cfg: RunConfig, solve, refine: bool):
    """Alternate permutation solves and Procrustes rotations from each start.

    Returns the best ``(perm, O, converged, trace)`` under refined ``d_b``.
    """
    d = prob.g1.dim
    if not cfg.rotation:
        C = prob.cost_table(np.eye(d), refine)
        perm = solve(C)
        return perm, np.eye(d), True, [prob.value(C, perm)]
    best = None
    for name, O in _rotation_starts(prob, cfg, solve):
        run_best = None
        prev = None
        converged = False
        trace = []
        for _ in range(cfg.max_rounds):
            perm = solve(prob.cost_table(O, refine))
            val = prob.true_value(perm, O)
            trace.append(val)
            if run_best is None or val < run_best[0] - 1e-12:
                run_best = (val, perm, O)
            if prev is not None and np.array_equal(perm, prev):
                converged = True
                break
            prev = perm
            O_new, ok = prob.procrustes(perm, O, iters=1)
            if not ok:
                converged = True
                break
            O = O_new
        log.debug("rotation start %s: trace %s", name, trace)
        if best is None or run_best[0] < best[0] - 1e-12:
            best = run_best + (converged, trace)
        if best[0] <= ZERO_TOL * np.sqrt(prob.total):
            break  # numerically zero, no start can do better
    val, perm, O, converged, trace = best
    # rounds take single Procrustes steps; settle the rotation of the winner
    O_fine, ok = prob.procrustes(perm, O)
    if ok:
        fine = prob.true_value(perm, O_fine)
        if fine < val - 1e-12:
            O = O_fine
            trace = trace + [fine]
    return perm, O, converged, trace


def match_exact(
    g1p: ElasticGraph,
    g2p: ElasticGraph,
    cfg: RunConfig = RunConfig(),
    seeds=(),
) -> Correspondence:
    """Globally optimal permutation for each rotation visited.

    With ``cfg.rotation`` disabled the result is the exact minimizer of ``d_b``
    over permutations.  With rotations, exact permutation solves alternate
    with Procrustes updates from the configured starting rotations.  Ties go to
    the lexicographically smallest padded permutation.
    """
    prob = MatchProblem(g1p, g2p, cfg.lam, seeds)
    stats = {}

    def solve(C):
        perm, _, count = _exact_search(prob, C, cfg.exact_cap)
        stats["candidates"] = count
        return perm

    perm, O, converged, trace = _alternate(prob, cfg, solve, refine=True)
    return prob.finish(perm, O, "exact", converged, trace, stats)


# --- affinity ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    """Sparse ``K`` over assignments ``a -> i`` indexed as ``a * N + i``."""

    K: sparse.csr_matrix
    N: int

    def dense(self) -> np.ndarray:
        return self.K.toarray()


def _affinity_from_table(prob: MatchProblem, C: np.ndarray, sigma: float) -> AffinityMatrix:
    N = prob.N
    rows, cols, vals = [], [], []
    W = np.maximum(-0.5 * C, 0.0)
    for e, (a, b) in enumerate(prob.k1):
        for f, (i, j) in enumerate(prob.k2):
            w = W[e, f]
            if w <= 0:
                continue
            for (x, y), (u, v) in (((a, b), (i, j)), ((a, b), (j, i))):
                rows += [x * N + u, y * N + v]
                cols += [y * N + v, x * N + u]
                vals += [w, w]
    if prob.lam:
        g1, g2 = prob.g1, prob.g2
        du = g1.node_attr[:, None] - g2.node_attr[None, :]
        diag = prob.lam * np.exp(-(du**2) / (2.0 * sigma**2))
        null = g1.is_null[:, None] | g2.is_null[None, :]
        diag[null] = prob.lam
        idx = np.arange(N * N)
        rows += idx.tolist()
        cols += idx.tolist()
        vals += diag.ravel().tolist()
    K = sparse.csr_matrix((vals, (rows, cols)), shape=(N * N, N * N))
    return AffinityMatrix(K, N)


def build_affinity(
    g1p: ElasticGraph,
    g2p: ElasticGraph,
    O=None,
    lam: float = 0.0,
    sigma: float = 1.0,
    refine: bool = True,
) -> AffinityMatrix:
    """Affinity matrix of the Lawler quadratic assignment form.

    Off-diagonal entries hold the elastic inner product of an edge pair,
    maximized over orientation, at rotation ``O``; diagonal entries hold the
    node affinities ``lam * exp(-|du|^2 / (2 sigma^2))`` (``lam`` when either
    node is null).  Negative inner products are clamped to 0.
    """
    prob = MatchProblem(g1p, g2p, lam)
    O = np.eye(g1p.dim) if O is None else np.asarray(O, float)
    return _affinity_from_table(prob, prob.cost_table(O, refine), sigma)


def affinity_objective(aff: AffinityMatrix, perm) -> float:
    """``vec(P)' K vec(P)`` for the assignment ``a -> perm[a]``."""
    perm = np.asarray(perm, int)
    idx = np.arange(aff.N) * aff.N + perm
    return float(aff.K[idx][:, idx].sum())


# --- approximate solver ------------------------------------------------------


def _sinkhorn(M: np.ndarray) -> np.ndarray:
    for _ in range(SINKHORN_ITERS):
        M = M / M.sum(axis=1, keepdims=True)
        M = M / M.sum(axis=0, keepdims=True)
        if np.abs(M.sum(axis=1) - 1).max() < SINKHORN_TOL:
            break
    return M


def _round(score: np.ndarray) -> np.ndarray:
    r, c = linear_sum_assignment(-score)
    out = np.empty(score.shape[0], int)
    out[r] = c
    return out


def _swap_search(prob: MatchProblem, C: np.ndarray, perm: np.ndarray, rows: np.ndarray):
    """Pairwise-swap descent on ``d_b`` over the free rows."""
    perm = perm.copy()
    F, A, lam = prob.F, prob.A, prob.lam

    def edge_part(a, pa, skip=-1, pskip=-1):
        s = 0.0
        for e, b in prob.inc[a]:
            pb = pskip if b == skip else perm[b]
            f = F[pa, pb]
            if f >= 0:
                s += C[e, f]
        return s

    esum = prob.edge_sum(C, perm)
    asum = float(A[np.arange(prob.N), perm].sum())
    cur = np.sqrt(max(prob.total + esum, 0.0)) + lam * asum
    for _ in range(SWAP_SWEEPS):
        improved = False
        for x in range(rows.size):
            a = rows[x]
            for y in range(x + 1, rows.size):
                b = rows[y]
                pa, pb = perm[a], perm[b]
                old = edge_part(a, pa) + edge_part(b, pb)
                new = edge_part(a, pb, b, pa) + edge_part(b, pa, a, pb)
                # an a-b edge lands on the same g2 pair before and after the swap
                de = new - old
                da = A[a, pb] + A[b, pa] - A[a, pa] - A[b, pb]
                val = np.sqrt(max(prob.total + esum + de, 0.0)) + lam * (asum + da)
                if val < cur - 1e-12:
                    perm[a], perm[b] = pb, pa
                    esum, asum, cur = esum + de, asum + da, val
                    improved = True
        if not improved:
            break
    return perm


def _qap_solve(prob: MatchProblem, C: np.ndarray, sigma: float, trace: list) -> np.ndarray:
    """Spectral start, graduated assignment, then swap descent on ``d_b``."""
    N = prob.N
    aff = _affinity_from_table(prob, C, sigma)
    rows, cols = prob.free()
    perm = -np.ones(N, int)
    for a, i in prob.seeds:
        perm[a] = i
    if rows.size == 0:
        return perm
    K = aff.K.tocsr()
    free_idx = (rows[:, None] * N + cols[None, :]).ravel()
    Kf = K[free_idx][:, free_idx]
    lin = np.zeros(free_idx.size)
    if prob.seeds:
        seed_idx = np.array([a * N + i for a, i in prob.seeds])
        lin = np.asarray(K[free_idx][:, seed_idx].sum(axis=1)).ravel()
    Kf = (Kf + sparse.diags(lin)).tocsr()
    n = rows.size

    def complete(sub):
        p = perm.copy()
        p[rows] = cols[sub]
        return p

    # spectral relaxation by power iteration
    v = np.full(free_idx.size, 1.0 / np.sqrt(free_idx.size))
    for _ in range(POWER_ITERS):
        w = Kf @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        w /= nw
        if np.abs(w - v).max() < 1e-10:
            v = w
            break
        v = w
    cands = [complete(_round(v.reshape(n, n)))]
    # graduated assignment
    nz = Kf.data[Kf.data > 0]
    if nz.size:
        tau = float(np.median(nz))
        M = 0.5 * np.eye(n)[_round(v.reshape(n, n))] + 0.5 / n
        for _ in range(GA_SWEEPS):
            Q = (Kf @ M.ravel()).reshape(n, n)
            Z = (Q - Q.max()) / tau
            M = _sinkhorn(np.exp(Z) + 1e-300)
            tau *= GA_FACTOR
        cands.append(complete(_round(M)))
    best = None
    for p in cands:
        trace.append(affinity_objective(aff, p))
        p = _swap_search(prob, C, p, rows)
        val = prob.value(C, p)
        if best is None or val < best[0] - 1e-12:
            best = (val, p)
    return best[1]


def match_approx(
    g1p: ElasticGraph,
    g2p: ElasticGraph,
    cfg: RunConfig = RunConfig(),
    seeds=(),
) -> Correspondence:
    """Relaxed quadratic assignment with rotation alternation.

    Rounds use lattice-only edge registrations for speed; the final permutation
    is polished against refined registrations at the chosen rotation.
    """
    prob = MatchProblem(g1p, g2p, cfg.lam, seeds)
    qap_trace: list = []

    def solve(C):
        return _qap_solve(prob, C, cfg.sigma, qap_trace)

    perm, O, converged, trace = _alternate(prob, cfg, solve, refine=False)
    C = prob.cost_table(O, refine=True)
    perm = _swap_search(prob, C, perm, prob.free()[0])
    qap = affinity_objective(_affinity_from_table(prob, C, cfg.sigma), perm)
    diag = {"qap_objectives": qap_trace, "qap_objective": qap}
    return prob.finish(perm, O, "approx", converged, trace, diag)


# --- front ends ---------------------------------------------------------------


def _free_counts(g1p: ElasticGraph, g2p: ElasticGraph, seeds) -> int:
    s1 = {a for a, _ in seeds}
    s2 = {i for _, i in seeds}
    f1 = sum(1 for a in range(g1p.n) if not g1p.is_null[a] and a not in s1)
    f2 = sum(1 for i in range(g2p.n) if not g2p.is_null[i] and i not in s2)
    return max(f1, f2)


def match(g1p: ElasticGraph, g2p: ElasticGraph, cfg: RunConfig = RunConfig(), seeds=()):
    """Dispatch on ``cfg.solver``; ``auto`` picks exact when within the cap."""
    mode = cfg.solver
    if mode == "auto":
        mode = "exact" if _free_counts(g1p, g2p, seeds) <= cfg.exact_cap else "approx"
    if mode == "exact":
        return match_exact(g1p, g2p, cfg, seeds)
    return match_approx(g1p, g2p, cfg, seeds)


def prepare(g1: ElasticGraph, g2: ElasticGraph, cfg: RunConfig = RunConfig()):
    """Optionally normalize, then pad both graphs with null nodes."""
    if cfg.normalize:
        g1, g2 = normalize_scale(g1), normalize_scale(g2)
    return pad_null_nodes(g1, g2)


def quotient_distance(
    g1: ElasticGraph, g2: ElasticGraph, cfg: RunConfig = RunConfig(), seeds=()
) -> float:
    """``d_g``: the composite metric minimized over permutations and rotation."""
    g1p, g2p = prepare(g1, g2, cfg)
    return match(g1p, g2p, cfg, seeds).distance


def register_graphs(g1: ElasticGraph, g2: ElasticGraph, cfg: RunConfig = RunConfig(), seeds=()):
    """Pad, match and return ``(g1p, g2p, correspondence)``."""
    g1p, g2p = prepare(g1, g2, cfg)
    return g1p, g2p, match(g1p, g2p, cfg, seeds)
