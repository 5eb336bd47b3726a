"""Run configuration shared by the library entry points and the CLI."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

SOLVERS = ("exact", "approx", "auto")
MEAN_METHODS = ("gradient", "sequential", "approx")
PAIRWISE_MODES = ("exact-pairwise", "via-largest")
ROTATION_INITS = ("auto", "identity", "positions")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Numerical settings for matching, statistics and inference.

    ``lam`` weights the node-attribute term of the composite metric and the
    node affinities; it serializes as ``lambda``.
    """

    T: int = 50
    lam: float = 0.0
    sigma: float = 1.0
    solver: str = "auto"
    exact_cap: int = 8
    normalize: bool = False
    rotation: bool = True
    rotation_init: str = "auto"
    max_rounds: int = 10
    seed: int = 0
    out_dir: str = "."
    steps: int = 5
    variance: float = 0.8
    k: Optional[int] = None
    permutations: int = 30000
    mean_method: str = "gradient"
    mean_tol: float = 1e-6
    mean_iters: int = 50
    prune_fraction: float = 0.1
    pairwise: str = "exact-pairwise"
    threads: int = 0

    def __post_init__(self):
        if self.T < 2:
            raise ConfigError(f"T must be at least 2, got {self.T}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.exact_cap < 0:
            raise ConfigError("exact_cap must be nonnegative")
        if self.rotation_init not in ROTATION_INITS:
            raise ConfigError(f"rotation_init must be one of {ROTATION_INITS}")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be at least 1")
        if self.steps < 2:
            raise ConfigError("geodesic steps must be at least 2")
        if not 0 < self.variance <= 1:
            raise ConfigError("variance target must lie in (0, 1]")
        if self.k is not None and self.k < 1:
            raise ConfigError("k must be positive")
        if self.permutations < 1:
            raise ConfigError("permutations must be positive")
        if self.mean_method not in MEAN_METHODS:
            raise ConfigError(f"mean_method must be one of {MEAN_METHODS}")
        if self.mean_tol <= 0 or self.mean_iters < 1:
            raise ConfigError("mean_tol and mean_iters must be positive")
        if not 0 <= self.prune_fraction <= 1:
            raise ConfigError("prune_fraction must lie in [0, 1]")
        if self.pairwise not in PAIRWISE_MODES:
            raise ConfigError(f"pairwise must be one of {PAIRWISE_MODES}")
        if self.threads < 0:
            raise ConfigError("threads must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)
