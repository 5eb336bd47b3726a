"""Command-line front end.

Every command writes JSON outputs that embed the run configuration and the
SHA-256 of each input file; ``manifest.json`` in the output directory lists
all files written.  Exit codes: 0 success, 1 numerical failure, 2 input or
schema error.
"""

from __future__ import annotations

import argparse
import csv
import glob
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, RunConfig
from .graph_core import GraphError, GraphLoadError, extract_landmarks, load_graph, save_graph, strip_null_nodes
from .inference import DistanceMatrix, InferenceError, pairwise_distances, permutation_test
from .matching import MatchError, prepare, match
from .shape_stats import StatsError, geodesic, mean, tangent_pca

log = logging.getLogger("elastic_graphs")


class InputError(Exception):
    """Bad or missing input; exit code 2."""


# --- helpers -----------------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _expand(patterns: Sequence[str]) -> list[str]:
    out = []
    for p in patterns:
        hits = sorted(glob.glob(p))
        if not hits:
            if any(c in p for c in "*?["):
                raise InputError(f"no files match {p!r}")
            raise InputError(f"no such file: {p}")
        out.extend(hits)
    return out


def _load(path: str, cfg: RunConfig):
    if not os.path.isfile(path):
        raise InputError(f"no such file: {path}")
    try:
        return load_graph(Path(path), cfg.T)
    except (GraphLoadError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from None


class Run:
    """Output directory bookkeeping shared by all commands."""

    def __init__(self, cfg: RunConfig, command: str, inputs: Sequence[str]):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs = {str(p): _sha256(p) for p in inputs}
        self.written: list[str] = []

    def provenance(self) -> dict:
        return {"command": self.command, "config": self.cfg.to_dict(), "inputs": self.inputs}

    def write_json(self, name: str, payload: dict) -> Path:
        path = self.out / name
        doc = dict(payload)
        doc["provenance"] = self.provenance()
        path.write_text(json.dumps(doc, indent=2, default=_jsonable))
        self.written.append(name)
        return path

    def write_csv(self, name: str, header: Sequence[str], rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        self.written.append(name)
        return path

    def write_graph(self, name: str, g, extra: Optional[dict] = None) -> Path:
        doc = save_graph(g, snap=True)
        if extra:
            doc.update(extra)
        return self.write_json(name, doc)

    def finish(self):
        self.write_json("manifest.json", {"files": list(self.written)})


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not serializable: {type(x).__name__}")


def _config(args) -> RunConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        base.pop("provenance", None)
    over = {
        "T": args.T,
        "lam": args.lam,
        "sigma": args.sigma,
        "solver": args.solver,
        "exact_cap": args.exact_cap,
        "normalize": args.normalize,
        "rotation": args.rotation,
        "rotation_init": args.rotation_init,
        "max_rounds": args.max_rounds,
        "seed": args.seed,
        "out_dir": args.out_dir,
        "threads": args.threads,
    }
    for name in ("steps", "variance", "k", "permutations", "mean_method", "pairwise"):
        if hasattr(args, name):
            over[name] = getattr(args, name)
    d = RunConfig.from_dict(base).to_dict() if base else RunConfig().to_dict()
    d["lam"] = d.pop("lambda")
    d.update({k: v for k, v in over.items() if v is not None})
    return RunConfig(**d)


def _ids(paths: Sequence[str]) -> list[str]:
    return [Path(p).stem for p in paths]


def _parse_seeds(paths: Sequence[str], g1, g2) -> list[tuple[int, int]]:
    """Seeds from one pairs file or from two landmark files paired in order."""
    docs = []
    for p in paths:
        try:
            docs.append(json.loads(Path(p).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read seeds {p}: {exc}") from None
    lab1 = {s: k for k, s in enumerate(g1.labels)}
    lab2 = {s: k for k, s in enumerate(g2.labels)}
    if len(docs) == 1:
        pairs = docs[0].get("pairs")
        if pairs is None:
            raise InputError(f"{paths[0]}: expected a 'pairs' list, or pass two landmark files")
    elif len(docs) == 2:
        a, b = (d.get("landmarks") for d in docs)
        if a is None or b is None:
            raise InputError("landmark files must hold a 'landmarks' list")
        if len(a) != len(b):
            raise InputError(f"landmark counts differ: {len(a)} vs {len(b)}")
        pairs = list(zip(a, b))
    else:
        raise InputError("give one pairs file or two landmark files")
    out = []
    for x, y in pairs:
        if str(x) not in lab1 or str(y) not in lab2:
            raise InputError(f"seed ({x}, {y}) names an unknown node")
        out.append((lab1[str(x)], lab2[str(y)]))
    return out


# --- commands ----------------------------------------------------------------


def cmd_dist(args, cfg: RunConfig) -> int:
    g1, g2 = _load(args.a, cfg), _load(args.b, cfg)
    seeds = _parse_seeds(args.seeds, g1, g2) if args.seeds else ()
    run = Run(cfg, "dist", [args.a, args.b, *(args.seeds or [])])
    g1p, g2p = prepare(g1, g2, cfg)
    corr = match(g1p, g2p, cfg, seeds)
    print(f"{corr.distance:.10g}")
    run.write_json("correspondence.json", {"distance": corr.distance, "correspondence": corr.to_dict()})
    run.finish()
    return 0


def cmd_geodesic(args, cfg: RunConfig) -> int:
    g1, g2 = _load(args.a, cfg), _load(args.b, cfg)
    run = Run(cfg, "geodesic", [args.a, args.b])
    path = geodesic(g1, g2, cfg.steps, cfg, prune=args.prune)
    width = max(2, len(str(cfg.steps - 1)))
    for k, (g, s) in enumerate(zip(path.steps, path.times)):
        run.write_graph(f"step_{k:0{width}d}.json", strip_null_nodes(g), {"time": float(s)})
    run.write_json(
        "correspondence.json",
        {"distance": path.correspondence.distance, "correspondence": path.correspondence.to_dict()},
    )
    run.finish()
    print(f"{cfg.steps} steps, d_g = {path.correspondence.distance:.10g}")
    return 0


def cmd_mean(args, cfg: RunConfig) -> int:
    paths = _expand(args.graphs)
    graphs = [_load(p, cfg) for p in paths]
    run = Run(cfg, "mean", paths)
    res = mean(graphs, cfg)
    shown = res.display_mean(cfg.prune_fraction)
    run.write_graph("mean.json", shown, {"method": res.method, "cost_trace": res.cost_trace})
    freq_rows = [
        (shown.labels[i], shown.labels[j], f"{w:.10g}")
        for (i, j), w in sorted(shown.edge_weight.items())
    ]
    run.write_csv("edge_frequency.csv", ["u", "v", "frequency"], freq_rows)
    run.write_csv("cost_trace.csv", ["iteration", "cost"], [(k, repr(c)) for k, c in enumerate(res.cost_trace)])
    run.finish()
    print(f"mean of {len(graphs)} graphs, cost {res.cost_trace[-1]:.10g}")
    return 0


def cmd_pca(args, cfg: RunConfig) -> int:
    paths = _expand(args.graphs)
    graphs = [_load(p, cfg) for p in paths]
    run = Run(cfg, "pca", paths)
    model = tangent_pca(graphs, cfg)
    U, s, Vt = np.linalg.svd(model.shooting, full_matrices=False)
    roundtrip = float(np.abs(U * s @ Vt - model.shooting).max()) if model.shooting.size else 0.0
    ids = _ids(paths)
    frac = model.explained()
    run.write_json(
        "pca_model.json",
        {
            "k": model.k,
            "singular_values": model.singular_values,
            "spectrum": model.spectrum,
            "explained": frac,
            "explained_retained": float(frac[: model.k].sum()),
            "dim_flat": model.dim_flat,
            "roundtrip_error": roundtrip,
            "roundtrip_ok": roundtrip < 1e-8,
            "mean": save_graph(strip_null_nodes(model.mean), snap=True),
        },
    )
    rows = [(i, *(repr(float(v)) for v in row)) for i, row in zip(ids, model.scores)]
    run.write_csv("scores.csv", ["subject_id", *(f"pc{k + 1}" for k in range(model.k))], rows)
    run.finish()
    print(f"{model.k} components explain {frac[:model.k].sum():.4f} of the variance")
    return 0


def _read_groups(path) -> dict:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputError(f"cannot read groups {path}: {exc}") from None
    if not rows or set(rows[0]) != {"subject_id", "group"}:
        raise InputError(f"{path}: expected columns subject_id,group")
    return {r["subject_id"]: r["group"] for r in rows}


def cmd_test(args, cfg: RunConfig) -> int:
    groups = _read_groups(args.groups)
    if len(args.inputs) == 1 and args.inputs[0].endswith(".csv"):
        src = [args.inputs[0]]
        if not os.path.isfile(src[0]):
            raise InputError(f"no such file: {src[0]}")
        try:
            dm = DistanceMatrix.from_csv(src[0])
        except (InferenceError, OSError) as exc:
            raise InputError(str(exc)) from None
        run = Run(cfg, "test", [*src, args.groups])
    else:
        src = _expand(args.inputs)
        graphs = [_load(p, cfg) for p in src]
        run = Run(cfg, "test", [*src, args.groups])
        dm = pairwise_distances(graphs, cfg, _ids(src))
        dm.to_csv(run.out / "distances.csv")
        run.written.append("distances.csv")
    labels = sorted(set(groups.values()))
    if len(labels) != 2:
        raise InputError(f"groups file must name exactly two groups, got {labels}")
    missing = [s for s in groups if s not in dm.ids]
    if missing:
        raise InputError(f"subjects not in the distance matrix: {missing[:5]}")
    a = dm.index_of([s for s, g in groups.items() if g == labels[0]])
    b = dm.index_of([s for s, g in groups.items() if g == labels[1]])
    res = permutation_test(dm, a, b, cfg.permutations, cfg.seed)
    run.write_json("test_result.json", {**res.to_dict(), "labels": labels})
    run.finish()
    print(f"statistic {res.statistic:.10g}  p = {res.p_value:.6g}")
    return 0


def cmd_landmarks(args, cfg: RunConfig) -> int:
    g = _load(args.graph, cfg)
    run = Run(cfg, "landmarks", [args.graph])
    idx = extract_landmarks(g, args.count)
    run.write_json("landmarks.json", {"landmarks": [g.labels[k] for k in idx], "indices": idx})
    run.finish()
    print(" ".join(g.labels[k] for k in idx))
    return 0


# --- parser ------------------------------------------------------------------


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON run configuration; flags override it")
    p.add_argument("--T", type=int, help="cells per edge after resampling (default 50)")
    p.add_argument("--lambda", dest="lam", type=float, help="node attribute weight")
    p.add_argument("--sigma", type=float, help="node affinity bandwidth")
    p.add_argument("--solver", choices=["exact", "approx", "auto"])
    p.add_argument("--exact-cap", type=int, help="most free real nodes per graph for exact search")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--rotation", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--rotation-init", choices=["auto", "identity", "positions"])
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--threads", type=int, help="worker cap for batch commands (0 = all cores)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="elastic-graphs", description="Elastic shape analysis of curve graphs")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", help="quotient distance between two graphs")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--seeds", nargs="+", help="pairs JSON, or one landmarks JSON per graph")
    _common(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("geodesic", help="sampled geodesic between two graphs")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--steps", type=int, help="graphs written, endpoints included")
    p.add_argument("--prune", action="store_true", help="keep only edges present at both ends")
    _common(p)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("mean", help="mean graph of a population")
    p.add_argument("graphs", nargs="+", help="graph files or glob patterns")
    p.add_argument("--method", dest="mean_method", choices=["gradient", "sequential", "approx"])
    _common(p)
    p.set_defaults(func=cmd_mean)

    p = sub.add_parser("pca", help="tangent PCA of a population")
    p.add_argument("graphs", nargs="+")
    p.add_argument("--method", dest="mean_method", choices=["gradient", "sequential", "approx"])
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("-k", "--k", type=int, dest="k")
    grp.add_argument("--variance", type=float)
    _common(p)
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("test", help="two-sample permutation test")
    p.add_argument("inputs", nargs="+", help="distance matrix CSV, or graph files / globs")
    p.add_argument("--groups", required=True, help="CSV with subject_id,group")
    p.add_argument("--permutations", type=int)
    p.add_argument("--pairwise", choices=["exact-pairwise", "via-largest"])
    _common(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("landmarks", help="automatic landmark nodes")
    p.add_argument("graph")
    p.add_argument("--count", type=int, default=5)
    _common(p)
    p.set_defaults(func=cmd_landmarks)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except (InputError, ConfigError, GraphLoadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MatchError, StatsError, InferenceError, GraphError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
