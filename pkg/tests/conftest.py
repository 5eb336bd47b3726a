import numpy as np
import pytest

from elastic_graphs.curve_shape import apply_reparam
from elastic_graphs.graph_core import from_curves
from elastic_graphs.synthetic import random_warp, smooth_curve


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def warp_edges(rng, g, strength=0.4):
    """Copy of ``g`` with every edge independently reparametrized."""
    return g.replace(edges={k: apply_reparam(q, random_warp(rng, q.T, strength)) for k, q in g.edges.items()})


def star_graph(rng, arms=3, dim=3, T=50, bend=0.3):
    """Hub at the origin with ``arms`` curved spokes of distinct lengths."""
    pos = [np.zeros(dim)]
    curves = {}
    for k in range(arms):
        tip = rng.normal(size=dim)
        tip *= (1.0 + 0.5 * k) / np.linalg.norm(tip)
        pos.append(tip)
        curves[(0, k + 1)] = smooth_curve(rng, pos[0], tip, bend=bend)
    return from_curves(np.array(pos), curves, T)
