"""Elastic graphs: node data plus a symmetric adjacency of edge shapes.

Each edge is stored once under the key ``(i, j)`` with ``i < j`` and oriented
from node ``i`` to node ``j``.  Missing keys are null edges.  Null nodes, added
by padding, carry no attribute cost and never count toward degrees.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .curve_shape import (
    Srvf,
    apply_reparam,
    from_srvf,
    register_pairs,
    resample_curve,
    sq_norm,
    to_srvf,
)

__all__ = [
    "ElasticGraph",
    "GraphError",
    "GraphLoadError",
    "attribute_cost",
    "composite_metric",
    "edge_metric",
    "export_csv",
    "extract_landmarks",
    "from_curves",
    "load_graph",
    "normalize_scale",
    "pad_null_nodes",
    "permute",
    "rotate",
    "save_graph",
]

EdgeKey = tuple[int, int]
ENDPOINT_RTOL = 1e-6
ROTATION_TOL = 1e-9


class GraphError(ValueError):
    pass


class GraphLoadError(GraphError):
    pass


@dataclass(frozen=True, eq=False)
class ElasticGraph:
    """Immutable elastic graph.

    Parameters
    ----------
    node_pos : (n, d) array
        Node coordinates, used for display, landmarks and rotation.
    node_attr : (n,) array
        Node attributes ``u``; degrees unless supplied.
    edges : mapping
        ``(i, j) -> Srvf`` with ``i < j``, oriented from ``i`` to ``j``.
    labels : tuple
        Optional node identifiers.
    is_null : (n,) bool array
        Padding flags.
    edge_weight : mapping, optional
        Per-edge display weights such as matching frequencies.
    """

    node_pos: np.ndarray
    node_attr: np.ndarray
    edges: Mapping[EdgeKey, Srvf]
    labels: tuple = ()
    is_null: np.ndarray = None
    edge_weight: Optional[Mapping[EdgeKey, float]] = field(default=None)

    def __post_init__(self):
        pos = np.asarray(self.node_pos, dtype=float)
        if pos.ndim != 2 or pos.shape[1] not in (2, 3):
            raise GraphError(f"node positions must have shape (n, 2|3), got {pos.shape}")
        n, d = pos.shape
        attr = np.asarray(self.node_attr, dtype=float).reshape(-1)
        if attr.shape != (n,):
            raise GraphError(f"node_attr has {attr.size} entries for {n} nodes")
        null = np.zeros(n, bool) if self.is_null is None else np.asarray(self.is_null, bool)
        if null.shape != (n,):
            raise GraphError("is_null must have one flag per node")
        labels = tuple(self.labels) if self.labels else tuple(str(i) for i in range(n))
        if len(labels) != n:
            raise GraphError(f"{len(labels)} labels for {n} nodes")
        edges = {}
        T = None
        for (i, j), q in dict(self.edges).items():
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not (0 <= i < j < n):
                raise GraphError(f"edge key {(i, j)} must satisfy 0 <= i < j < {n}")
            if q.dim != d:
                raise GraphError(f"edge {(i, j)} has dimension {q.dim}, graph has {d}")
            if T is None:
                T = q.T
            elif q.T != T:
                raise GraphError(f"edge {(i, j)} has {q.T} samples, expected {T}")
            edges[(i, j)] = q
        for i, j in edges:
            if null[i] or null[j]:
                raise GraphError(f"edge {(i, j)} touches a null node")
        weights = None
        if self.edge_weight is not None:
            weights = {tuple(map(int, k)): float(v) for k, v in dict(self.edge_weight).items()}
        object.__setattr__(self, "node_pos", pos)
        object.__setattr__(self, "node_attr", attr)
        object.__setattr__(self, "is_null", null)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "edges", dict(sorted(edges.items())))
        object.__setattr__(self, "edge_weight", weights)

    @property
    def n(self) -> int:
        return self.node_pos.shape[0]

    @property
    def dim(self) -> int:
        return self.node_pos.shape[1]

    @property
    def T(self) -> Optional[int]:
        for q in self.edges.values():
            return q.T
        return None

    @property
    def n_real(self) -> int:
        return int((~self.is_null).sum())

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge(self, i: int, j: int) -> Optional[Srvf]:
        """Edge shape oriented from ``i`` to ``j``; ``None`` for a null edge."""
        if i < j:
            return self.edges.get((i, j))
        q = self.edges.get((j, i))
        return None if q is None else q.reversed()

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def total_length(self) -> float:
        return float(sum(q.length() for q in self.edges.values()))

    def curves(self) -> dict[EdgeKey, np.ndarray]:
        return {k: from_srvf(q) for k, q in self.edges.items()}

    def replace(self, **kw) -> "ElasticGraph":
        return replace(self, **kw)


def from_curves(
    node_pos,
    curves: Mapping[EdgeKey, np.ndarray],
    T: int = 50,
    node_attr=None,
    labels: Sequence = (),
) -> ElasticGraph:
    """Build a graph from raw polylines; keys may be given in either order.

    A curve stored under ``(j, i)`` with ``j > i`` is taken to run from ``j`` to
    ``i`` and is reversed.  Attributes default to degrees.
    """
    edges = {}
    for (a, b), pts in curves.items():
        a, b = int(a), int(b)
        if a == b:
            raise GraphError(f"self-loop at node {a}")
        key = (min(a, b), max(a, b))
        if key in edges:
            raise GraphError(f"duplicate edge between nodes {key}")
        pts = resample_curve(pts, T)
        if a > b:
            pts = pts[::-1]
        edges[key] = to_srvf(pts)
    pos = np.asarray(node_pos, dtype=float)
    if node_attr is None:
        deg = np.zeros(pos.shape[0])
        for i, j in edges:
            deg[i] += 1
            deg[j] += 1
        node_attr = deg
    return ElasticGraph(pos, node_attr, edges, tuple(labels))


# --- metrics -----------------------------------------------------------------


def _check_sizes(g1: ElasticGraph, g2: ElasticGraph):
    if g1.n != g2.n:
        raise GraphError(f"graphs differ in size ({g1.n} vs {g2.n}); pad first")
    if g1.dim != g2.dim:
        raise GraphError(f"graphs differ in dimension ({g1.dim} vs {g2.dim})")


def edge_sq_terms(g1: ElasticGraph, g2: ElasticGraph, registered: bool = False) -> dict:
    """Squared per-edge distances over the union of edge keys.

    With ``registered`` the edges are compared as stored, by plain L2 distance
    of SRVFs; otherwise every real pair is elastically registered.
    """
    _check_sizes(g1, g2)
    keys = sorted(set(g1.edges) | set(g2.edges))
    out = {}
    both = [k for k in keys if k in g1.edges and k in g2.edges]
    if both and not registered:
        Q1 = np.stack([g1.edges[k].values for k in both])
        Q2 = np.stack([g2.edges[k].values for k in both])
        D2, _ = register_pairs(Q1, Q2)
        out.update(zip(both, D2.tolist()))
    for k in keys:
        if k in out:
            continue
        a, b = g1.edges.get(k), g2.edges.get(k)
        if a is None:
            out[k] = b.length()
        elif b is None:
            out[k] = a.length()
        else:
            out[k] = sq_norm(a.values - b.values)
    return out


def edge_metric(g1: ElasticGraph, g2: ElasticGraph, registered: bool = False) -> float:
    """``d_a``: root of summed squared edge distances over unordered pairs."""
    terms = edge_sq_terms(g1, g2, registered)
    return float(np.sqrt(sum(terms.values())))


def attribute_cost(g1: ElasticGraph, g2: ElasticGraph) -> float:
    """``Tr D`` under the current ordering; pairs involving a null node cost 0."""
    _check_sizes(g1, g2)
    live = ~(g1.is_null | g2.is_null)
    return float(np.abs(g1.node_attr - g2.node_attr)[live].sum())


def composite_metric(
    g1: ElasticGraph, g2: ElasticGraph, lam: float = 0.0, registered: bool = False
) -> float:
    """``d_b = d_a + lam * Tr D`` for graphs in the same node order."""
    if lam < 0:
        raise GraphError(f"lambda must be nonnegative, got {lam}")
    d = edge_metric(g1, g2, registered)
    return d + lam * attribute_cost(g1, g2) if lam else d


# --- group actions and padding ----------------------------------------------


def _check_perm(perm, n: int) -> np.ndarray:
    p = np.asarray(perm)
    if p.shape != (n,) or not np.array_equal(np.sort(p), np.arange(n)):
        raise GraphError(f"not a permutation of size {n}: {perm!r}")
    return p.astype(int)


def permute(g: ElasticGraph, perm) -> ElasticGraph:
    """Relabel nodes so that new node ``k`` is old node ``perm[k]``."""
    p = _check_perm(perm, g.n)
    inv = np.empty_like(p)
    inv[p] = np.arange(g.n)
    edges = {}
    weights = {} if g.edge_weight is not None else None
    for (i, j), q in g.edges.items():
        a, b = int(inv[i]), int(inv[j])
        key = (a, b) if a < b else (b, a)
        edges[key] = q if a < b else q.reversed()
        if weights is not None and (i, j) in g.edge_weight:
            weights[key] = g.edge_weight[(i, j)]
    return ElasticGraph(
        g.node_pos[p],
        g.node_attr[p],
        edges,
        tuple(g.labels[k] for k in p),
        g.is_null[p],
        weights,
    )


def check_rotation(O, d: int) -> np.ndarray:
    O = np.asarray(O, dtype=float)
    if O.shape != (d, d):
        raise GraphError(f"rotation must be {d}x{d}, got {O.shape}")
    if np.abs(O @ O.T - np.eye(d)).max() > ROTATION_TOL or abs(np.linalg.det(O) - 1) > ROTATION_TOL:
        raise GraphError("matrix is not a rotation (orthogonal with det +1)")
    return O


def rotate(g: ElasticGraph, O) -> ElasticGraph:
    """Rotate positions, SRVFs and anchors; attributes are unchanged."""
    O = check_rotation(O, g.dim)
    edges = {k: q.rotated(O) for k, q in g.edges.items()}
    return g.replace(node_pos=g.node_pos @ O.T, edges=edges)


def add_null_nodes(g: ElasticGraph, count: int) -> ElasticGraph:
    if count == 0:
        return g
    pos = np.vstack([g.node_pos, np.zeros((count, g.dim))])
    attr = np.concatenate([g.node_attr, np.zeros(count)])
    labels = g.labels + tuple(f"null{k}" for k in range(count))
    null = np.concatenate([g.is_null, np.ones(count, bool)])
    return ElasticGraph(pos, attr, g.edges, labels, null, g.edge_weight)


def pad_null_nodes(g1: ElasticGraph, g2: ElasticGraph) -> tuple[ElasticGraph, ElasticGraph]:
    """Append ``n2`` null nodes to ``g1`` and ``n1`` to ``g2``."""
    return add_null_nodes(g1, g2.n), add_null_nodes(g2, g1.n)


def strip_null_nodes(g: ElasticGraph) -> ElasticGraph:
    """Drop null nodes that carry no edges, keeping the order of the rest."""
    used = np.zeros(g.n, bool)
    for i, j in g.edges:
        used[i] = used[j] = True
    keep = np.flatnonzero(~g.is_null | used)
    if keep.size == g.n:
        return g
    new = {int(o): k for k, o in enumerate(keep)}
    edges = {(new[i], new[j]): q for (i, j), q in g.edges.items()}
    weights = None
    if g.edge_weight is not None:
        weights = {(new[i], new[j]): w for (i, j), w in g.edge_weight.items() if (i, j) in g.edges}
    return ElasticGraph(
        g.node_pos[keep],
        g.node_attr[keep],
        edges,
        tuple(g.labels[k] for k in keep),
        g.is_null[keep],
        weights,
    )


def normalize_scale(g: ElasticGraph) -> ElasticGraph:
    """Scale positions and curves by the inverse of the total edge length."""
    L = g.total_length()
    if not L > 0:
        raise GraphError("cannot normalize a graph with zero total edge length")
    c = 1.0 / L
    edges = {k: q.scaled(c) for k, q in g.edges.items()}
    return g.replace(node_pos=g.node_pos * c, edges=edges)


def with_degree_attributes(g: ElasticGraph) -> ElasticGraph:
    return g.replace(node_attr=g.degrees())


def registered_copy(g: ElasticGraph, regs: Mapping) -> ElasticGraph:
    """Apply per-edge reparametrizations ``(i, j) -> Reparam`` to ``g``."""
    edges = dict(g.edges)
    for k, r in regs.items():
        if k in edges:
            edges[k] = apply_reparam(edges[k], r)
    return g.replace(edges=edges)


# --- serialization -----------------------------------------------------------


def _fail(msg: str):
    raise GraphLoadError(msg)


def load_graph(doc: Union[str, Path, Mapping], T: int = 50) -> ElasticGraph:
    """Parse a graph document (mapping, JSON text, or path to a JSON file).

    Edge endpoints must lie on their node positions within ``1e-6`` times the
    point-cloud diameter; curves drawn from the higher to the lower index are
    reversed so storage is canonical.
    """
    if isinstance(doc, Path) or (isinstance(doc, str) and not doc.lstrip().startswith("{")):
        try:
            doc = json.loads(Path(doc).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            _fail(f"{doc}: invalid JSON ({exc})")
    elif isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            _fail(f"invalid JSON ({exc})")
    if not isinstance(doc, Mapping):
        _fail("graph document must be a JSON object")
    dim = doc.get("dim")
    if dim not in (2, 3):
        _fail(f"'dim' must be 2 or 3, got {dim!r}")
    nodes = doc.get("nodes")
    if not isinstance(nodes, list) or not nodes:
        _fail("'nodes' must be a nonempty list")
    ids, pos, attrs, null = [], [], [], []
    index = {}
    for k, node in enumerate(nodes):
        if not isinstance(node, Mapping) or "id" not in node or "pos" not in node:
            _fail(f"node #{k} needs 'id' and 'pos'")
        nid = str(node["id"])
        if nid in index:
            _fail(f"duplicate node id {nid!r}")
        p = np.asarray(node["pos"], dtype=float)
        if p.shape != (dim,) or not np.all(np.isfinite(p)):
            _fail(f"node {nid!r}: 'pos' must be {dim} finite numbers")
        index[nid] = k
        ids.append(nid)
        pos.append(p)
        attrs.append(node.get("attr"))
        null.append(bool(node.get("null", False)))
    pos = np.array(pos)
    edges_doc = doc.get("edges", [])
    if not isinstance(edges_doc, list):
        _fail("'edges' must be a list")
    all_pts = [pos]
    parsed = []
    for k, e in enumerate(edges_doc):
        if not isinstance(e, Mapping) or not {"u", "v", "points"} <= set(e):
            _fail(f"edge #{k} needs 'u', 'v' and 'points'")
        u, v = str(e["u"]), str(e["v"])
        for end in (u, v):
            if end not in index:
                _fail(f"edge #{k} ({u}-{v}): dangling endpoint {end!r}")
        if u == v:
            _fail(f"edge #{k}: self-loop at node {u!r}")
        pts = np.asarray(e["points"], dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != dim or not np.all(np.isfinite(pts)):
            _fail(f"edge #{k} ({u}-{v}): 'points' must be >= 2 finite {dim}D points")
        all_pts.append(pts)
        parsed.append((k, index[u], index[v], pts, e.get("weight")))
    cloud = np.vstack(all_pts)
    diam = float(np.linalg.norm(cloud.max(0) - cloud.min(0)))
    tol = ENDPOINT_RTOL * max(diam, np.finfo(float).tiny)
    curves, weights = {}, {}
    for k, a, b, pts, w in parsed:
        if np.linalg.norm(pts[0] - pos[a]) > tol or np.linalg.norm(pts[-1] - pos[b]) > tol:
            _fail(f"edge #{k} ({ids[a]}-{ids[b]}): endpoints do not coincide with node positions")
        key = (min(a, b), max(a, b))
        if key in curves:
            _fail(f"edge #{k}: duplicate edge between {ids[key[0]]!r} and {ids[key[1]]!r}")
        curves[key] = pts if a < b else pts[::-1]
        if w is not None:
            weights[key] = float(w)
    edges = {key: to_srvf(resample_curve(p, T)) for key, p in curves.items()}
    deg = np.zeros(len(ids))
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    attr = np.array([deg[i] if a is None else float(a) for i, a in enumerate(attrs)])
    return ElasticGraph(pos, attr, edges, tuple(ids), np.array(null), weights or None)


def save_graph(g: ElasticGraph, path: Union[str, Path, None] = None, snap: bool = False) -> dict:
    """Graph document; written as JSON when ``path`` is given.

    Derived graphs (means, geodesic points) have curves whose far end need not
    sit on the node position.  ``snap`` adds a linear drift to each curve so
    both ends meet their nodes and the document loads again.
    """
    nodes = []
    for i in range(g.n):
        node = {"id": g.labels[i], "pos": g.node_pos[i].tolist(), "attr": float(g.node_attr[i])}
        if g.is_null[i]:
            node["null"] = True
        nodes.append(node)
    edges = []
    for (i, j), q in g.edges.items():
        pts = from_srvf(q)
        if snap:
            t = np.linspace(0.0, 1.0, pts.shape[0])[:, None]
            pts = pts + (1 - t) * (g.node_pos[i] - pts[0]) + t * (g.node_pos[j] - pts[-1])
        e = {"u": g.labels[i], "v": g.labels[j], "points": pts.tolist()}
        if g.edge_weight is not None and (i, j) in g.edge_weight:
            e["weight"] = g.edge_weight[(i, j)]
        edges.append(e)
    doc = {"dim": g.dim, "nodes": nodes, "edges": edges}
    if path is not None:
        Path(path).write_text(json.dumps(doc), encoding="utf-8")
    return doc


def export_csv(g: ElasticGraph, nodes_path, edges_path) -> None:
    """Node and edge tables for external plotting."""
    axes = "xyz"[: g.dim]
    with open(nodes_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", *axes, "attr", "null"])
        for i in range(g.n):
            w.writerow([g.labels[i], *g.node_pos[i].tolist(), g.node_attr[i], int(g.is_null[i])])
    with open(edges_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v", "length", "weight"])
        for (i, j), q in g.edges.items():
            wt = g.edge_weight.get((i, j), "") if g.edge_weight else ""
            w.writerow([g.labels[i], g.labels[j], q.length(), wt])


# --- landmarks ---------------------------------------------------------------


def _length_matrix(g: ElasticGraph) -> csr_matrix:
    rows, cols, vals = [], [], []
    for (i, j), q in g.edges.items():
        # zero-length edges still connect
        L = max(q.length(), np.finfo(float).tiny)
        rows += [i, j]
        cols += [j, i]
        vals += [L, L]
    return csr_matrix((vals, (rows, cols)), shape=(g.n, g.n))


def _route(pred: np.ndarray, src: int, dst: int) -> list[int]:
    path = [dst]
    while path[-1] != src:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def _pick_along(route: list[int], dist: np.ndarray, m: int) -> list[int]:
    """``m`` nodes of ``route`` nearest to evenly spaced arc-length fractions."""
    nodes = route[1:]
    total = dist[route[-1]]
    chosen = []
    for k in range(1, m + 1):
        target = total * k / m
        order = sorted(nodes, key=lambda v: (abs(dist[v] - target), v))
        for v in order:
            if v not in chosen:
                chosen.append(v)
                break
    return chosen


def _component_landmarks(g, A, comp: np.ndarray, count: int) -> list[int]:
    D, P = dijkstra(A, directed=False, indices=comp, return_predecessors=True)
    sub = D[:, comp]
    ecc = sub.max(axis=1)
    c_row = int(np.flatnonzero(ecc == ecc.min())[0])
    center = int(comp[c_row])
    if comp.size == 1:
        return [center]
    dist, pred = D[c_row], P[c_row]
    order = sorted((v for v in comp if v != center), key=lambda v: (-dist[v], v))
    first = order[0]
    r1 = _route(pred, center, first)
    r2 = None
    for v in order[1:]:
        r = _route(pred, center, v)
        if r[1] != r1[1]:
            r2 = r
            break
    m = (count - 1) // 2
    out = [center]
    for r in (r1, r2):
        if r is None:
            continue
        for v in _pick_along(r, dist, min(m, len(r) - 1)):
            if v not in out:
                out.append(v)
    return out


def extract_landmarks(g: ElasticGraph, count: int = 5) -> list[int]:
    """Central node plus nodes spread along the two longest routes from it.

    The center minimizes eccentricity under arc-length edge weights (ties to
    the lowest index).  The first route ends at the farthest node; the second
    at the farthest node reached through a different first hop.
    ``(count - 1) / 2`` nodes are taken along each route.  A disconnected graph
    is processed per component, largest first, with a warning.
    """
    if count < 3 or count % 2 == 0:
        raise GraphError(f"landmark count must be odd and at least 3, got {count}")
    real = np.flatnonzero(~g.is_null)
    if real.size == 0:
        return []
    A = _length_matrix(g)
    _, lab = connected_components(A, directed=False)
    comps = {}
    for v in real:
        comps.setdefault(int(lab[v]), []).append(int(v))
    groups = sorted(comps.values(), key=lambda c: (-len(c), c[0]))
    if len(groups) > 1:
        warnings.warn(
            f"graph has {len(groups)} components; landmarks are extracted per component",
            stacklevel=2,
        )
    out = []
    for comp in groups:
        out += _component_landmarks(g, A, np.array(comp), count)
    return out
