import csv
import hashlib
import json

import pytest

from elastic_graphs.cli import main
from elastic_graphs.config import RunConfig
from elastic_graphs.graph_core import load_graph, permute, save_graph
from elastic_graphs.matching import quotient_distance
from elastic_graphs.synthetic import random_graph

FAST = ["--no-rotation", "--T", "20"]


@pytest.fixture
def graph_files(rng, tmp_path):
    paths = []
    for k in range(4):
        p = tmp_path / f"g{k}.json"
        save_graph(random_graph(rng, 3 + k % 2, T=20), p)
        paths.append(p)
    return paths


def read(path):
    return json.loads(path.read_text())


def test_dist_prints_distance_and_writes_provenance(graph_files, tmp_path, capsys):
    out = tmp_path / "out"
    a, b = graph_files[:2]
    assert main(["dist", str(a), str(b), "--out-dir", str(out), *FAST]) == 0
    printed = float(capsys.readouterr().out.strip())
    cfg = RunConfig(rotation=False, T=20)
    assert printed == pytest.approx(quotient_distance(load_graph(a, 20), load_graph(b, 20), cfg), rel=1e-9)
    doc = read(out / "correspondence.json")
    assert doc["distance"] == pytest.approx(printed, rel=1e-9)
    prov = doc["provenance"]
    assert prov["inputs"][str(a)] == hashlib.sha256(a.read_bytes()).hexdigest()
    assert prov["config"]["rotation"] is False and prov["config"]["T"] == 20
    assert read(out / "manifest.json")["files"] == ["correspondence.json"]


def test_dist_with_landmark_seeds(rng, tmp_path, capsys):
    g = random_graph(rng, 5, T=20)
    h = permute(g, [3, 1, 4, 0, 2])
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    save_graph(g, pa)
    save_graph(h, pb)
    la, lb = tmp_path / "la", tmp_path / "lb"
    assert main(["landmarks", str(pa), "--count", "3", "--out-dir", str(la), *FAST]) == 0
    assert main(["landmarks", str(pb), "--count", "3", "--out-dir", str(lb), *FAST]) == 0
    capsys.readouterr()
    rc = main(["dist", str(pa), str(pb), "--seeds", str(la / "landmarks.json"), str(lb / "landmarks.json"),
               "--out-dir", str(tmp_path / "o"), *FAST])
    assert rc == 0
    assert float(capsys.readouterr().out) < 1e-6
    assert len(read(tmp_path / "o" / "correspondence.json")["correspondence"]["seeds"]) == 3


def test_geodesic_writes_steps(graph_files, tmp_path):
    out = tmp_path / "geo"
    assert main(["geodesic", str(graph_files[0]), str(graph_files[1]), "--steps", "4", "--out-dir", str(out),
                 *FAST]) == 0
    steps = sorted(out.glob("step_*.json"))
    assert len(steps) == 4
    assert [read(p)["time"] for p in steps] == pytest.approx([0, 1 / 3, 2 / 3, 1])
    # snapped step graphs load back
    for p in steps:
        load_graph(p, 20)


def test_mean_and_pca(graph_files, tmp_path):
    out = tmp_path / "m"
    pattern = str(graph_files[0].parent / "g*.json")
    assert main(["mean", pattern, "--method", "sequential", "--out-dir", str(out), *FAST]) == 0
    assert (out / "mean.json").exists() and (out / "cost_trace.csv").exists()
    out2 = tmp_path / "p"
    assert main(["pca", pattern, "-k", "2", "--out-dir", str(out2), *FAST]) == 0
    with open(out2 / "scores.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["subject_id", "pc1", "pc2"]
    assert {r[0] for r in rows[1:]} == {f"g{k}" for k in range(4)}
    model = read(out2 / "pca_model.json")
    assert sum(model["explained"]) == pytest.approx(1.0)


def test_permutation_test_from_graphs_and_matrix(graph_files, tmp_path, capsys):
    groups = tmp_path / "groups.csv"
    groups.write_text("subject_id,group\ng0,x\ng1,x\ng2,y\ng3,y\n")
    out = tmp_path / "t"
    args = ["test", *map(str, graph_files), "--groups", str(groups), "--permutations", "99", "--seed", "4"]
    assert main([*args, "--out-dir", str(out), *FAST]) == 0
    first = read(out / "test_result.json")
    assert first["seed"] == 4 and first["permutations"] == 99
    out2 = tmp_path / "t2"
    assert main(["test", str(out / "distances.csv"), "--groups", str(groups), "--permutations", "99",
                 "--seed", "4", "--out-dir", str(out2), *FAST]) == 0
    second = read(out2 / "test_result.json")
    assert second["statistic"] == first["statistic"]
    assert second["p_value"] == first["p_value"]


def test_config_file_and_override(graph_files, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lambda": 0.5, "rotation": False, "T": 20}))
    out = tmp_path / "c"
    assert main(["dist", str(graph_files[0]), str(graph_files[1]), "--config", str(cfg), "--lambda", "0.25",
                 "--out-dir", str(out)]) == 0
    conf = read(out / "correspondence.json")["provenance"]["config"]
    assert conf["lambda"] == 0.25 and conf["rotation"] is False


def test_exit_codes(graph_files, tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["dist", str(missing), str(graph_files[0]), "--out-dir", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["landmarks", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert main(["dist", str(graph_files[0]), str(graph_files[1]), "--lambda", "-1",
                 "--out-dir", str(tmp_path)]) == 2
    # landmark counts must be odd; the graph is fine, the request is not
    assert main(["landmarks", str(graph_files[0]), "--count", "4", "--out-dir", str(tmp_path)]) == 1
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["dist"])
    assert exc.value.code == 2
