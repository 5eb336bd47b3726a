import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from elastic_graphs.curve_shape import from_srvf, shape_distance, to_srvf
from elastic_graphs.graph_core import composite_metric, permute
from elastic_graphs.inference import energy_statistic
from elastic_graphs.synthetic import random_graph

import oracles

SETTINGS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def polyline(seed, n, d):
    rng = np.random.default_rng(seed)
    return np.cumsum(rng.normal(size=(n, d)), axis=0)


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.integers(2, 60), st.sampled_from([2, 3]))
def test_srvf_round_trip(seed, n, d):
    pts = polyline(seed, n, d)
    back = from_srvf(to_srvf(pts))
    assert np.abs(back - pts).max() <= 1e-10 * max(1.0, np.abs(pts).max())


@SETTINGS
@given(st.integers(0, 2**32 - 1))
def test_elastic_distance_symmetric_and_bounded(seed):
    a = to_srvf(polyline(seed, 21, 3))
    b = to_srvf(polyline(seed + 1, 21, 3))
    d = shape_distance(a, b)
    assert d == shape_distance(b, a)
    assert 0.0 <= d <= np.sqrt(a.length() + b.length()) + 1e-12


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.permutations(range(5)))
def test_permuting_both_graphs_keeps_metric(seed, perm):
    rng = np.random.default_rng(seed)
    g1 = random_graph(rng, 5, extra_edges=1, T=20)
    g2 = random_graph(rng, 5, extra_edges=1, T=20)
    before = composite_metric(g1, g2, 0.3)
    after = composite_metric(permute(g1, perm), permute(g2, perm), 0.3)
    assert abs(before - after) < 1e-9


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(2, 6))
def test_energy_statistic_matches_loops_and_swaps(seed, m1, m2):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m1 + m2, 2))
    D = np.linalg.norm(X[:, None] - X[None], axis=-1)
    idx = rng.permutation(m1 + m2)
    a, b = idx[:m1], idx[m1:]
    val = energy_statistic(D, a, b)
    assert val == energy_statistic(D, b, a)
    assert abs(val - oracles.energy_by_loops(D, a, b)) < 1e-12 * max(1.0, abs(val))
