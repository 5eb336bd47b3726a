import numpy as np
import pytest

from elastic_graphs import curve_shape as cs
from elastic_graphs.curve_shape import (
    DimensionError,
    InvalidCurveError,
    Reparam,
    Srvf,
    apply_reparam,
    curve_geodesic,
    elastic_register,
    from_srvf,
    register_pairs,
    register_table,
    resample_curve,
    shape_distance,
    to_srvf,
)
from elastic_graphs.synthetic import random_polyline, random_warp, smooth_curve

import oracles


def unit_curve(rng, d=3, T=50, bend=0.4):
    c = smooth_curve(rng, np.zeros(d), rng.normal(size=d), bend=bend)
    c = c / np.sum(np.linalg.norm(np.diff(c, axis=0), axis=1))
    return to_srvf(resample_curve(c, T))


# --- transform ---------------------------------------------------------------


@pytest.mark.parametrize("d", [2, 3])
def test_srvf_matches_definition(rng, d):
    pts = random_polyline(rng, 31, d)
    q = to_srvf(pts)
    np.testing.assert_allclose(q.values, oracles.srvf_polyline(pts), rtol=1e-13, atol=1e-14)
    np.testing.assert_array_equal(q.anchor, pts[0])


@pytest.mark.parametrize("d", [2, 3])
def test_round_trip_reconstructs_points(rng, d):
    pts = random_polyline(rng, 51, d)
    back = from_srvf(to_srvf(pts))
    assert np.abs(back - pts).max() <= 1e-12 * np.abs(pts).max()


def test_squared_norm_is_polyline_length(rng):
    pts = random_polyline(rng, 41, 3)
    length = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
    assert to_srvf(pts).length() == pytest.approx(length, rel=1e-13)


def test_repeated_points_give_zero_cells():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 2.0]])
    q = to_srvf(pts)
    np.testing.assert_array_equal(q.values[1], [0.0, 0.0])
    np.testing.assert_allclose(from_srvf(q), pts, atol=1e-15)


def test_resample_is_uniform_in_arc_length(rng):
    pts = random_polyline(rng, 12, 3)
    out = resample_curve(pts, 40)
    seg = np.linalg.norm(np.diff(out, axis=0), axis=1)
    # chords of equal arc-length pieces never exceed the piece length
    total = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
    assert out.shape == (41, 3)
    assert seg.max() <= total / 40 + 1e-12
    np.testing.assert_array_equal(out[[0, -1]], pts[[0, -1]])


def test_invalid_curves_rejected():
    with pytest.raises(InvalidCurveError):
        to_srvf(np.zeros((1, 3)))
    with pytest.raises(InvalidCurveError):
        to_srvf(np.array([[0.0, 0.0], [np.nan, 1.0]]))
    with pytest.raises(InvalidCurveError):
        to_srvf(np.zeros((4, 4)))


def test_reversed_srvf_traces_curve_backwards(rng):
    pts = random_polyline(rng, 21, 3)
    back = from_srvf(to_srvf(pts).reversed())
    np.testing.assert_allclose(back, pts[::-1], atol=1e-12)


# --- reparametrization -------------------------------------------------------


def test_warp_action_matches_fine_sampling(rng):
    q = unit_curve(rng, T=20)
    g = random_warp(rng, 20, 0.6)
    got = apply_reparam(q, g).values
    ref = oracles.warp_action_fine(q.values, g.gamma)
    assert np.abs(got - ref).max() < 5e-3


def test_identity_warp_is_exact(rng):
    q = unit_curve(rng)
    np.testing.assert_allclose(apply_reparam(q, Reparam.identity(q.T)).values, q.values, atol=1e-14)


def test_reversed_identity_reverses(rng):
    q = unit_curve(rng)
    out = apply_reparam(q, Reparam.identity(q.T, reversed=True))
    np.testing.assert_allclose(out.values, -q.values[::-1], atol=1e-14)


def test_warp_action_is_a_norm_nonincreasing_projection(rng):
    # cell averaging projects the exactly warped function onto T cells
    for _ in range(20):
        q = unit_curve(rng)
        w = apply_reparam(q, random_warp(rng, q.T, 0.5))
        assert w.length() <= q.length() * (1 + 1e-12)


def test_warp_preserves_norm_as_cells_refine(rng):
    # the same function and warp on 32x finer cells: the projection loss fades
    m = 32
    for _ in range(20):
        q = unit_curve(rng)
        g = random_warp(rng, q.T, 0.5)
        fine = cs.Srvf(np.repeat(q.values, m, axis=0), q.anchor)
        knots = np.linspace(0.0, 1.0, q.T * m + 1)
        gf = Reparam(np.interp(knots, np.linspace(0.0, 1.0, q.T + 1), g.gamma))
        w = apply_reparam(fine, gf)
        assert w.norm() == pytest.approx(fine.norm(), rel=1e-3)


def test_reparam_validation():
    with pytest.raises(ValueError):
        Reparam(np.array([0.0, 0.7, 0.5, 1.0]))
    with pytest.raises(ValueError):
        Reparam(np.array([0.1, 1.0]))
    with pytest.raises(DimensionError):
        apply_reparam(Srvf(np.ones((5, 2)), np.zeros(2)), Reparam.identity(4))


# --- dynamic programming -----------------------------------------------------


@pytest.mark.parametrize("T", [4, 6])
def test_lattice_dp_equals_path_enumeration(rng, T):
    x = rng.normal(size=(T, 2))
    y = rng.normal(size=(T, 2))
    best = max(oracles.path_inner(x, y, p) for p in oracles.lattice_paths(T))
    G = cs._gram(x, y)
    got = cs._dp_value(G, cs._SA, cs._SB, cs._OFF, cs._C1, cs._C2, cs._W)
    assert got == pytest.approx(best, abs=1e-12)


def test_lattice_path_value_matches_its_path(rng):
    T = 8
    x = rng.normal(size=(T, 3))
    y = rng.normal(size=(T, 3))
    G = cs._gram(x, y)
    val, pi, pj = cs._dp_path(G, cs._SA, cs._SB, cs._OFF, cs._C1, cs._C2, cs._W)
    assert val == pytest.approx(oracles.path_inner(x, y, list(zip(pi, pj))), abs=1e-12)


# --- elastic distance --------------------------------------------------------


def test_line_versus_quarter_arc_closed_form():
    # For a straight q1 the optimal warp equalizes f(gamma) sqrt(gamma') with
    # f(s) = <q1, q2(s)>, giving <q1, q2 * gamma> = sqrt(int f^2).  A diagonal
    # chord against a unit quarter circle gives sup = sqrt(1/2 + 1/pi).
    T = 200
    s = np.linspace(0, 1, T + 1)
    arc = np.column_stack([np.sin(np.pi * s / 2), 1 - np.cos(np.pi * s / 2)]) * (2 / np.pi)
    line = np.outer(s, [1.0, 1.0]) / np.sqrt(2)
    d = shape_distance(to_srvf(line), to_srvf(arc))
    expected = np.sqrt(2 - 2 * np.sqrt(0.5 + 1 / np.pi))
    assert d == pytest.approx(expected, abs=2e-3)


def test_distance_to_warped_copy_vanishes(rng):
    for _ in range(5):
        q = unit_curve(rng)
        w = apply_reparam(q, random_warp(rng, q.T, 0.5))
        assert shape_distance(q, w) < 5e-3


def test_distance_to_reversed_copy_is_exactly_zero(rng):
    q = unit_curve(rng)
    assert shape_distance(q, q.reversed()) == 0.0
    assert shape_distance(q, q) == 0.0


def test_distance_is_symmetric_and_reversal_invariant(rng):
    a, b = unit_curve(rng), unit_curve(rng)
    d = shape_distance(a, b)
    assert shape_distance(b, a) == d
    assert shape_distance(a.reversed(), b) == d
    assert shape_distance(a, b.reversed()) == d


def test_distance_bounded_by_unregistered(rng):
    a, b = unit_curve(rng), unit_curve(rng)
    d = shape_distance(a, b)
    plain = np.sqrt(cs.sq_norm(a.values - b.values))
    rev = np.sqrt(cs.sq_norm(a.values + b.values[::-1]))
    assert d <= min(plain, rev) + 1e-12


def test_refinement_never_worse_than_lattice(rng):
    Q1 = np.stack([unit_curve(rng).values for _ in range(4)])
    Q2 = np.stack([unit_curve(rng).values for _ in range(3)])
    fine, _ = register_table(Q1, Q2)
    coarse, _ = register_table(Q1, Q2, refine=False)
    assert np.all(fine <= coarse + 1e-12)


def test_null_edge_distance_is_norm(rng):
    q = unit_curve(rng)
    assert shape_distance(q, None) == pytest.approx(q.norm())
    assert shape_distance(None, None) == 0.0


def test_register_result_reproduces_distance(rng):
    gaps = []
    for _ in range(12):
        a, b = unit_curve(rng), unit_curve(rng)
        r, ip = elastic_register(a, b)
        warped = apply_reparam(b, r)
        assert ip == pytest.approx(cs.inner(a.values, warped.values), abs=1e-9)
        d = shape_distance(a, b)
        gaps.append(np.sqrt(cs.sq_norm(a.values - warped.values)) - d)
    # a one-sided warp of the second curve stays close to the two-sided optimum
    assert np.median(np.abs(gaps)) < 1e-2
    assert max(gaps) < 3e-2


def test_register_warped_copy_recovers_warp(rng):
    q = unit_curve(rng)
    w = apply_reparam(q, random_warp(rng, q.T, 0.5))
    r, _ = elastic_register(q, w)
    back = apply_reparam(w, r)
    # undoing a warp averages the cells twice, which costs about 1% at T = 50
    assert np.sqrt(cs.sq_norm(q.values - back.values)) < 2e-2


def test_table_agrees_with_pairwise_calls(rng):
    qs = [unit_curve(rng) for _ in range(5)]
    Q = np.stack([q.values for q in qs])
    D2, _ = register_table(Q[:2], Q[2:])
    for e in range(2):
        for f in range(3):
            assert np.sqrt(D2[e, f]) == shape_distance(qs[e], qs[2 + f])
    P2, _ = register_pairs(Q[:2], Q[2:4])
    assert P2[1] == D2[1, 1]


def test_rotation_invariance_of_distance(rng):
    from elastic_graphs.synthetic import random_rotation

    a, b = unit_curve(rng), unit_curve(rng)
    O = random_rotation(rng, 3)
    assert shape_distance(a.rotated(O), b.rotated(O)) == pytest.approx(shape_distance(a, b), abs=1e-9)


def test_mismatched_shapes_rejected(rng):
    with pytest.raises(DimensionError):
        shape_distance(unit_curve(rng, T=20), unit_curve(rng, T=30))


# --- geodesics ---------------------------------------------------------------


def test_curve_geodesic_endpoints_and_null(rng):
    a, b = unit_curve(rng), unit_curve(rng)
    np.testing.assert_array_equal(curve_geodesic(a, b, 0.0).values, a.values)
    half = curve_geodesic(a, None, 0.5)
    np.testing.assert_allclose(half.values, 0.5 * a.values)
    assert curve_geodesic(None, None, 0.3) is None
    with pytest.raises(ValueError):
        curve_geodesic(a, b, 1.5)


def test_sampled_triangle_inequality(rng):
    worst = -np.inf
    for _ in range(30):
        a, b, c = (unit_curve(rng) for _ in range(3))
        worst = max(worst, shape_distance(a, c) - shape_distance(a, b) - shape_distance(b, c))
    assert worst < 1e-2
