"""Elastic shape analysis of graphs whose edges are curves."""

from .config import ConfigError, RunConfig
from .curve_shape import (
    Reparam,
    Srvf,
    apply_reparam,
    curve_geodesic,
    elastic_register,
    from_srvf,
    resample_curve,
    shape_distance,
    to_srvf,
)
from .graph_core import (
    ElasticGraph,
    GraphError,
    GraphLoadError,
    composite_metric,
    edge_metric,
    extract_landmarks,
    from_curves,
    load_graph,
    normalize_scale,
    pad_null_nodes,
    permute,
    rotate,
    save_graph,
)
from .inference import (
    DistanceMatrix,
    covariate_correlation,
    deformation_map,
    energy_statistic,
    hotelling_t2,
    pairwise_distances,
    permutation_test,
    score_regression,
    two_sample_t,
)
from .matching import (
    Correspondence,
    MatchError,
    build_affinity,
    match,
    match_approx,
    match_exact,
    procrustes_rotation,
    quotient_distance,
    register_graphs,
)
from .shape_stats import (
    geodesic,
    mean_approx,
    mean_gradient,
    mean_sequential,
    reconstruct,
    tangent_pca,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Correspondence",
    "DistanceMatrix",
    "ElasticGraph",
    "GraphError",
    "GraphLoadError",
    "MatchError",
    "Reparam",
    "RunConfig",
    "Srvf",
    "apply_reparam",
    "build_affinity",
    "composite_metric",
    "covariate_correlation",
    "curve_geodesic",
    "deformation_map",
    "edge_metric",
    "elastic_register",
    "energy_statistic",
    "extract_landmarks",
    "from_curves",
    "from_srvf",
    "geodesic",
    "hotelling_t2",
    "load_graph",
    "match",
    "match_approx",
    "match_exact",
    "mean_approx",
    "mean_gradient",
    "mean_sequential",
    "normalize_scale",
    "pad_null_nodes",
    "pairwise_distances",
    "permutation_test",
    "permute",
    "procrustes_rotation",
    "quotient_distance",
    "reconstruct",
    "register_graphs",
    "resample_curve",
    "rotate",
    "save_graph",
    "score_regression",
    "shape_distance",
    "tangent_pca",
    "to_srvf",
    "two_sample_t",
]
