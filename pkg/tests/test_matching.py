import numpy as np
import pytest

from elastic_graphs.config import RunConfig
from elastic_graphs.curve_shape import shape_distance
from elastic_graphs.graph_core import composite_metric, pad_null_nodes, permute, rotate
from elastic_graphs.matching import (
    MatchError,
    MatchProblem,
    affinity_objective,
    align,
    build_affinity,
    match,
    match_approx,
    match_exact,
    procrustes_rotation,
    quotient_distance,
    register_graphs,
)
from elastic_graphs.synthetic import random_graph, random_rotation

from conftest import warp_edges
import oracles

FIXED = RunConfig(rotation=False)


def padded_pair(rng, n1, n2, e1=1, e2=1):
    return pad_null_nodes(random_graph(rng, n1, extra_edges=e1), random_graph(rng, n2, extra_edges=e2))


def independent_costs(g1p, g2p):
    k1, k2 = list(g1p.edges), list(g2p.edges)
    C = np.empty((len(k1), len(k2)))
    for e, a in enumerate(k1):
        for f, b in enumerate(k2):
            qa, qb = g1p.edges[a], g2p.edges[b]
            C[e, f] = shape_distance(qa, qb) ** 2 - qa.length() - qb.length()
    return k1, k2, C


# --- exact solver --------------------------------------------------------------


@pytest.mark.parametrize("sizes", [(3, 3), (3, 4), (4, 3), (4, 4)])
def test_exact_matches_brute_force(rng, sizes):
    for lam in (0.0, 0.2):
        g1p, g2p = padded_pair(rng, *sizes)
        corr = match_exact(g1p, g2p, FIXED.with_(lam=lam))
        assert corr.distance == pytest.approx(oracles.brute_force_match(g1p, g2p, lam), abs=1e-9)


def test_exact_distance_is_metric_of_aligned_graphs(rng):
    g1p, g2p = padded_pair(rng, 4, 4)
    corr = match_exact(g1p, g2p, FIXED.with_(lam=0.3))
    aligned = align(g2p, corr, register=False)
    assert corr.distance == pytest.approx(composite_metric(g1p, aligned, 0.3), abs=1e-12)
    assert corr.distance <= composite_metric(g1p, g2p, 0.3) + 1e-12


def test_exact_recovers_relabeling(rng):
    g = random_graph(rng, 6, extra_edges=2)
    perm = rng.permutation(6)
    h = permute(g, perm)
    corr = match_exact(g, h, FIXED)
    assert corr.distance == 0.0
    np.testing.assert_array_equal(h.node_pos[corr.perm], g.node_pos)


def test_seeds_are_respected(rng):
    g1p, g2p = padded_pair(rng, 4, 4)
    seeds = [(0, 3), (2, 1)]
    corr = match_exact(g1p, g2p, FIXED, seeds=seeds)
    assert corr.perm[0] == 3 and corr.perm[2] == 1
    free = match_exact(g1p, g2p, FIXED)
    assert corr.distance >= free.distance - 1e-12
    with pytest.raises(MatchError):
        match_exact(g1p, g2p, FIXED, seeds=[(0, 1), (1, 1)])
    with pytest.raises(MatchError):
        match_exact(g1p, g2p, FIXED, seeds=[(0, 99)])


def test_mismatched_inputs_rejected(rng):
    with pytest.raises(MatchError):
        MatchProblem(random_graph(rng, 3), random_graph(rng, 4))
    with pytest.raises(MatchError):
        MatchProblem(random_graph(rng, 3), random_graph(rng, 3, dim=2))


# --- affinity form -------------------------------------------------------------


def test_affinity_matches_dense_oracle(rng):
    g1p, g2p = padded_pair(rng, 3, 4)
    k1, k2, C = independent_costs(g1p, g2p)
    for lam, sigma in ((0.0, 1.0), (0.5, 0.7)):
        aff = build_affinity(g1p, g2p, lam=lam, sigma=sigma)
        ref = oracles.dense_affinity(
            k1, k2, C, g1p.n, lam, g1p.node_attr, g2p.node_attr, g1p.is_null, g2p.is_null, sigma
        )
        np.testing.assert_allclose(aff.dense(), ref, atol=1e-12)


def test_affinity_objective_recovers_edge_metric(rng):
    g1p, g2p = padded_pair(rng, 4, 4)
    aff = build_affinity(g1p, g2p)
    prob = MatchProblem(g1p, g2p)
    C = prob.cost_table(np.eye(3))
    assert np.all(C <= 0)
    for _ in range(5):
        perm = rng.permutation(g1p.n)
        d = composite_metric(g1p, permute(g2p, perm), 0.0)
        assert np.sqrt(prob.total - affinity_objective(aff, perm)) == pytest.approx(d, abs=1e-9)


# --- approximate solver and rotation ---------------------------------------------


def test_approx_never_beats_exact(rng):
    for _ in range(3):
        g1p, g2p = padded_pair(rng, 5, 5, 2, 2)
        ex = match_exact(g1p, g2p, FIXED)
        ap = match_approx(g1p, g2p, FIXED)
        assert ap.distance >= ex.distance - 1e-9
        assert ap.solver == "approx" and ex.solver == "exact"


def test_approx_recovers_warped_rotated_relabeling(rng):
    g = random_graph(rng, 8, extra_edges=3)
    perm = rng.permutation(8)
    O = random_rotation(rng, 3)
    h = rotate(permute(warp_edges(rng, g, 0.3), perm), O)
    corr = match_approx(g, h, RunConfig())
    np.testing.assert_array_equal(corr.perm, np.argsort(perm))
    np.testing.assert_allclose(corr.rotation, O.T, atol=2e-2)
    assert corr.distance < 0.05


def test_exact_with_rotation_recovers_pose(rng):
    g = random_graph(rng, 5, extra_edges=2)
    O = random_rotation(rng, 3)
    h = rotate(permute(g, [2, 0, 4, 1, 3]), O)
    corr = match_exact(g, h, RunConfig())
    assert corr.distance < 1e-2
    np.testing.assert_allclose(corr.rotation @ O, np.eye(3), atol=1e-2)


def test_procrustes_rotation_closed_form(rng):
    O = random_rotation(rng, 3)
    a = [rng.normal(size=(10, 3)) for _ in range(3)]
    # samples are rows, so ``O q2`` acts as ``q2 @ O.T``
    R, ok = procrustes_rotation([(x, x @ O) for x in a], 3)
    assert ok
    np.testing.assert_allclose(R, O, atol=1e-10)
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_dispatch_and_front_ends(rng):
    g1, g2 = random_graph(rng, 3), random_graph(rng, 4)
    cfg = FIXED.with_(exact_cap=4)
    g1p, g2p, corr = register_graphs(g1, g2, cfg)
    assert corr.solver == "exact" and corr.sizes == (3, 4)
    assert quotient_distance(g1, g2, cfg) == corr.distance
    assert match(g1p, g2p, cfg.with_(exact_cap=2)).solver == "approx"
    assert quotient_distance(g1, g2, cfg) == pytest.approx(quotient_distance(g2, g1, cfg), abs=1e-9)


def test_correspondence_serializes(rng):
    import json

    g1p, g2p = padded_pair(rng, 3, 3)
    d = match_exact(g1p, g2p, FIXED).to_dict()
    json.dumps(d)
    assert sorted(d["perm"]) == list(range(g1p.n))
    assert all(len(e["gamma"]) == g1p.T + 1 for e in d["edges"])
