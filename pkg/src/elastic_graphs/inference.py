"""Population inference on graph shapes.

Distance matrices, the two-sample permutation test on the energy-style
statistic ``2/(m1 m2) sum D_AB - 1/m1^2 sum D_AA - 1/m2^2 sum D_BB``, tests on
principal scores, covariate correlation and regression, and per-edge
deformation weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .config import RunConfig
from .graph_core import ElasticGraph, composite_metric
from .matching import quotient_distance
from .shape_stats import PcaModel, _pmap, _settle, _compact, largest_index, reconstruct

__all__ = [
    "DeformationMap",
    "DistanceMatrix",
    "InferenceError",
    "RegressionModel",
    "TestResult",
    "covariate_correlation",
    "deformation_map",
    "energy_statistic",
    "hotelling_t2",
    "pairwise_distances",
    "permutation_test",
    "score_regression",
    "two_sample_t",
]

PERM_BATCH = 2000


class InferenceError(ValueError):
    pass


# --- distance matrices -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric matrix of graph distances with subject ids."""

    D: np.ndarray
    ids: tuple
    key: Optional[np.ndarray] = None

    def __post_init__(self):
        D = np.asarray(self.D, float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise InferenceError(f"distance matrix must be square, got {D.shape}")
        ids = tuple(str(i) for i in self.ids) if self.ids else tuple(str(i) for i in range(len(D)))
        if len(ids) != len(D):
            raise InferenceError(f"{len(ids)} ids for a {len(D)}x{len(D)} matrix")
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "ids", ids)
        if self.key is not None:
            object.__setattr__(self, "key", np.asarray(self.key, float))

    @property
    def m(self) -> int:
        return len(self.ids)

    def reorder(self, key=None) -> "DistanceMatrix":
        """Rows and columns sorted by ``key`` (default the stored key); stable."""
        key = self.key if key is None else np.asarray(key, float)
        if key is None:
            raise InferenceError("no ordering key given")
        order = np.argsort(key, kind="stable")
        return DistanceMatrix(
            self.D[np.ix_(order, order)], tuple(self.ids[k] for k in order), key[order]
        )

    def index_of(self, ids: Sequence) -> np.ndarray:
        pos = {s: k for k, s in enumerate(self.ids)}
        try:
            return np.array([pos[str(s)] for s in ids], int)
        except KeyError as exc:
            raise InferenceError(f"unknown subject id {exc.args[0]!r}") from None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["subject_id", *self.ids])
            for s, row in zip(self.ids, self.D):
                w.writerow([s, *(repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path) -> "DistanceMatrix":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or len(rows[0]) < 2:
            raise InferenceError(f"{path}: empty distance matrix file")
        ids = tuple(rows[0][1:])
        body = rows[1:]
        if [r[0] for r in body] != list(ids):
            raise InferenceError(f"{path}: row ids do not match the header")
        try:
            D = np.array([[float(v) for v in r[1:]] for r in body])
        except ValueError as exc:
            raise InferenceError(f"{path}: {exc}") from None
        return cls(D, ids)


def pairwise_distances(
    graphs: Sequence[ElasticGraph],
    cfg: RunConfig = RunConfig(),
    ids: Sequence = (),
    key=None,
) -> DistanceMatrix:
    """All pairwise graph distances.

    ``exact-pairwise`` solves each pair with :func:`quotient_distance`.
    ``via-largest`` matches every graph once to the largest and reports
    ``d_b`` between the representatives permuted and rotated into its slots.
    Edges are registered afresh inside ``d_b``, so each entry is ``d_b`` under
    one particular correspondence and bounds the pairwise optimum from above.  Each unordered pair is computed once; the elastic
    edge distance is symmetric, so the matrix is symmetric by construction.
    """
    m = len(graphs)
    pairs = list(combinations(range(m), 2))
    D = np.zeros((m, m))
    if cfg.pairwise == "via-largest":
        mu = _compact(graphs[largest_index(graphs)])
        *_, posed = _settle(mu, graphs, cfg, poses=True)
        vals = _pmap(lambda p: composite_metric(posed[p[0]], posed[p[1]], cfg.lam), pairs, cfg.threads)
    else:
        vals = _pmap(lambda p: quotient_distance(graphs[p[0]], graphs[p[1]], cfg), pairs, cfg.threads)
    for (i, j), v in zip(pairs, vals):
        D[i, j] = D[j, i] = v
    return DistanceMatrix(D, tuple(ids), key)


# --- permutation test --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TestResult:
    statistic: float
    p_value: float
    permutations: int = 0
    seed: Optional[int] = None
    method: str = ""
    null_samples: Optional[np.ndarray] = field(default=None, repr=False)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "permutations": self.permutations,
            "seed": self.seed,
            "method": self.method,
            **self.details,
        }


def _groups(D: np.ndarray, a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.unique(np.asarray(a, int))
    b = np.unique(np.asarray(b, int))
    if a.size == 0 or b.size == 0:
        raise InferenceError("both groups must be nonempty")
    if a.min() < 0 or b.min() < 0 or max(a.max(), b.max()) >= len(D):
        raise InferenceError("group index out of range")
    return a, b


def energy_statistic(D, a, b) -> float:
    """``2/(m1 m2) sum D_AB - 1/m1^2 sum D_AA - 1/m2^2 sum D_BB``.

    Within-group sums run over all ordered pairs including ``i = j``, which
    the ``1/m^2`` normalizers imply.  Equal index sets give exactly 0.
    """
    D = np.asarray(D, float)
    a, b = _groups(D, a, b)
    if np.array_equal(a, b):
        return 0.0
    if (a.size, a.tolist()) > (b.size, b.tolist()):
        # one summation order for both argument orders keeps the value swap-exact
        a, b = b, a
    ab = D[np.ix_(a, b)].sum()
    aa = D[np.ix_(a, a)].sum()
    bb = D[np.ix_(b, b)].sum()
    return float(2.0 * ab / (a.size * b.size) - aa / a.size**2 - bb / b.size**2)


def _batch_statistics(Dp: np.ndarray, X: np.ndarray, m1: int, m2: int) -> np.ndarray:
    """Statistic for every row of the 0/1 membership matrix ``X``."""
    Y = 1.0 - X
    XD = X @ Dp
    aa = np.einsum("ij,ij->i", XD, X)
    ab = np.einsum("ij,ij->i", XD, Y)
    bb = np.einsum("ij,ij->i", Y @ Dp, Y)
    return 2.0 * ab / (m1 * m2) - aa / m1**2 - bb / m2**2


def permutation_test(
    dist,
    group_a,
    group_b,
    permutations: int = 30000,
    seed: int = 0,
    keep_null: bool = False,
) -> TestResult:
    """One-sided permutation test of group separation.

    Subjects of both groups are pooled in sorted order and relabeled by
    uniformly random permutations from a Philox generator seeded with
    ``seed``.  The smaller group is drawn first, so swapping the groups gives
    the same p-value.  ``p = (1 + #{null >= observed}) / (1 + permutations)``.
    """
    D = dist.D if isinstance(dist, DistanceMatrix) else np.asarray(dist, float)
    a, b = _groups(D, group_a, group_b)
    if np.intersect1d(a, b).size:
        raise InferenceError("groups overlap")
    if permutations < 1:
        raise InferenceError("permutations must be positive")
    obs = energy_statistic(D, a, b)
    pool = np.sort(np.concatenate([a, b]))
    Dp = D[np.ix_(pool, pool)]
    m = pool.size
    m1 = min(a.size, b.size)
    m2 = m - m1
    rng = np.random.Generator(np.random.Philox(seed))
    null = np.empty(permutations)
    done = 0
    while done < permutations:
        n = min(PERM_BATCH, permutations - done)
        idx = rng.permuted(np.tile(np.arange(m), (n, 1)), axis=1)
        X = np.zeros((n, m))
        np.put_along_axis(X, idx[:, :m1], 1.0, axis=1)
        null[done : done + n] = _batch_statistics(Dp, X, m1, m2)
        done += n
    slack = 1e-12 * max(1.0, abs(obs))
    hits = int(np.count_nonzero(null >= obs - slack))
    p = (1 + hits) / (1 + permutations)
    return TestResult(
        obs, p, permutations, seed, "energy-permutation", null if keep_null else None,
        {"groups": [a.size, b.size]},
    )


# --- tests on principal scores -----------------------------------------------


def _split(values, groups):
    values = np.asarray(values, float)
    groups = np.asarray(groups)
    labels = np.unique(groups)
    if labels.size != 2:
        raise InferenceError(f"need exactly two groups, got labels {labels.tolist()}")
    if values.shape[0] != groups.shape[0]:
        raise InferenceError("one group label per subject required")
    return values[groups == labels[0]], values[groups == labels[1]]


def two_sample_t(scores, groups, equal_var: bool = False) -> TestResult:
    """Two-sided t-test on first principal scores; Welch unless ``equal_var``."""
    x, y = _split(np.asarray(scores, float).reshape(len(groups), -1)[:, 0], groups)
    if x.size < 2 or y.size < 2:
        raise InferenceError("each group needs at least two subjects")
    if np.array_equal(np.sort(x), np.sort(y)):
        return TestResult(0.0, 1.0, method="welch-t" if not equal_var else "pooled-t")
    res = stats.ttest_ind(x, y, equal_var=equal_var)
    return TestResult(
        float(res.statistic), float(res.pvalue), method="pooled-t" if equal_var else "welch-t"
    )


def hotelling_t2(scores, groups, k: Optional[int] = None) -> TestResult:
    """Hotelling T^2 on the first ``k`` scores with pooled covariance.

    The p-value uses ``F = (n - k - 1) / (k (n - 2)) T^2`` on ``(k, n - k - 1)``
    degrees of freedom.  With ``k = 1`` it equals the pooled t-test p-value.
    """
    S = np.asarray(scores, float)
    if S.ndim == 1:
        S = S[:, None]
    k = S.shape[1] if k is None else k
    if not 1 <= k <= S.shape[1]:
        raise InferenceError(f"k must lie in 1..{S.shape[1]}")
    x, y = _split(S[:, :k], groups)
    n1, n2 = len(x), len(y)
    n = n1 + n2
    if n - k - 1 < 1:
        raise InferenceError("too few subjects for the number of components")
    diff = x.mean(axis=0) - y.mean(axis=0)
    pooled = ((n1 - 1) * np.cov(x, rowvar=False, ddof=1).reshape(k, k)
              + (n2 - 1) * np.cov(y, rowvar=False, ddof=1).reshape(k, k)) / (n - 2)
    if np.linalg.matrix_rank(pooled) < k or np.linalg.cond(pooled) > 1e12:
        raise InferenceError("pooled covariance is singular; use fewer principal components")
    t2 = float(n1 * n2 / n * diff @ np.linalg.solve(pooled, diff))
    f = (n - k - 1) / (k * (n - 2)) * t2
    p = float(stats.f.sf(f, k, n - k - 1))
    return TestResult(t2, p, method="hotelling-t2", details={"k": k, "F": f})


def covariate_correlation(scores, covariate):
    """Pearson ``(r, p)`` between each score column and a covariate."""
    c = np.asarray(covariate, float)
    if np.ptp(c) == 0:
        raise InferenceError("covariate is constant")
    S = np.asarray(scores, float)
    one = S.ndim == 1
    S = S.reshape(len(c), -1)
    r = np.empty(S.shape[1])
    p = np.empty(S.shape[1])
    for j in range(S.shape[1]):
        if np.ptp(S[:, j]) == 0:
            r[j], p[j] = 0.0, 1.0
            continue
        res = stats.pearsonr(c, S[:, j])
        r[j], p[j] = res[0], res[1]
    return (float(r[0]), float(p[0])) if one else (r, p)


@dataclass(frozen=True)
class RegressionModel:
    """Zero-mean linear model ``score = beta * (covariate - center)``."""

    beta: np.ndarray
    center: float

    def predict(self, covariate) -> np.ndarray:
        c = np.atleast_1d(np.asarray(covariate, float)) - self.center
        return c[:, None] * self.beta[None, :]


def score_regression(scores, covariate) -> RegressionModel:
    """Least squares through the origin on the centered covariate, per score column."""
    c = np.asarray(covariate, float)
    if np.ptp(c) == 0:
        raise InferenceError("covariate is constant")
    S = np.asarray(scores, float).reshape(len(c), -1)
    cc = c - c.mean()
    beta = cc @ S / (cc @ cc)
    return RegressionModel(beta, float(c.mean()))


# --- deformation map ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DeformationMap:
    weights: dict
    flagged: list
    threshold: float


def deformation_map(
    model: PcaModel, from_scores, to_scores, highlight_fraction: float = 0.5
) -> DeformationMap:
    """Per-edge SRVF distance between two reconstructions.

    Edges whose change exceeds ``highlight_fraction`` of the largest change
    are flagged; when nothing changes nothing is flagged.
    """
    g0 = reconstruct(model, from_scores)
    g1 = reconstruct(model, to_scores)
    weights = {}
    for k in model.keys:
        diff = g0.edges[k].values - g1.edges[k].values
        weights[k] = float(np.sqrt(np.sum(diff * diff) / model.T))
    top = max(weights.values(), default=0.0)
    thr = highlight_fraction * top
    flagged = sorted(k for k, w in weights.items() if top > 0 and w > thr)
    return DeformationMap(weights, flagged, thr)
