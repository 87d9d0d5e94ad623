import json

import pytest

from cfiwb.cli import main
from cfiwb.graphs import BaseGraph


def run(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(tmp_path, capsys):
    paths = {}
    for name, extra in {"lam": ["--twist", "e0=1"], "zero": [], "twin": ["--twist", "e5=1", "--strip", "--seed", 4],
                        "outer": ["--variant", "outer"]}.items():
        p = tmp_path / f"{name}.json"
        variant = [] if "--variant" in extra else ["--variant", "inner"]
        assert run(["cfi", "--graph", "k4", *variant, "--modulus", 2, *extra, "--out", p], capsys)[0] == 0
        paths[name] = p
    return paths


def test_graph_commands(tmp_path, capsys):
    out = tmp_path / "k4.json"
    assert run(["graph", "gen", "--catalog", "k4", "--out", out], capsys)[0] == 0
    assert BaseGraph.from_json(out.read_text()).n == 4
    code, text, _ = run(["graph", "inspect", "cage-3-5"], capsys)
    assert code == 0 and json.loads(text)["girth"] == 5
    code, text, _ = run(["graph", "inspect", "--in", out], capsys)
    assert json.loads(text)["connectivity"] == 3
    assert run(["graph", "gen", "--random", 3, 5, 1], capsys)[0] == 64
    assert run(["graph", "gen"], capsys)[0] == 64


def test_cfi_sizes_and_dot(files, capsys):
    assert json.loads(files["zero"].read_text())["universe"].__len__() == 16
    assert len(json.loads(files["outer"].read_text())["universe"]) == 24
    code, text, _ = run(["cfi", "--graph", "k4", "--variant", "outer", "--dot"], capsys)
    assert code == 0 and text.startswith("digraph")


def test_outer_on_non_regular_graph_is_data_error(tmp_path, capsys):
    g = BaseGraph(6, ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 3)), name="c6-chord")
    p = tmp_path / "g.json"
    p.write_text(g.to_json())
    assert run(["cfi", "--graph", p, "--variant", "outer"], capsys)[0] == 65


def test_iso_exit_codes(files, capsys):
    code, text, _ = run(["iso", files["lam"], files["twin"]], capsys)
    assert code == 0 and json.loads(text)["witness"]
    code, text, _ = run(["iso", files["lam"], files["zero"]], capsys)
    assert code == 1 and json.loads(text)["method"] == "predicate"
    assert run(["iso", files["lam"], files["outer"], "--method", "bruteforce"], capsys)[0] == 65


def test_wl_and_im_verdicts(files, capsys):
    assert run(["wl", files["lam"], files["zero"], "--k", 1], capsys)[0] == 0
    code, text, _ = run(["im", files["lam"], files["zero"], "--k", 2, "--primes", "2"], capsys)
    doc = json.loads(text)
    assert code == 1 and doc["certificate"]["verified"] and doc["config"]["k"] == 2 and "version" in doc
    assert run(["im", files["lam"], files["twin"], "--k", 2, "--primes", "2,3"], capsys)[0] == 0
    assert run(["im", files["lam"], files["outer"], "--k", 2, "--primes", "2"], capsys)[0] == 65
    assert run(["im", files["lam"], files["zero"], "--k", 2, "--primes", "4"], capsys)[0] == 64


def test_usage_errors(tmp_path, capsys):
    assert run([], capsys)[0] == 64
    assert run(["experiment", "nope"], capsys)[0] == 64
    assert run(["wl", tmp_path / "missing.json", tmp_path / "missing.json", "--k", 1], capsys)[0] == 64
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(["wl", bad, bad, "--k", 1], capsys)[0] == 65
    assert run(["experiment", "cfi-problem", "--set", "bogus=1"], capsys)[0] == 64


def test_seed_from_environment(files, capsys, monkeypatch):
    monkeypatch.setenv("CFIWB_SEED", "17")
    code, text, _ = run(["im", files["lam"], files["twin"], "--k", 2, "--primes", "2"], capsys)
    assert json.loads(text)["config"]["seed"] == 17
    monkeypatch.setenv("CFIWB_SEED", "x")
    assert run(["im", files["lam"], files["twin"], "--k", 2, "--primes", "2"], capsys)[0] == 64


def test_experiment_writes_reports(tmp_path, capsys):
    code, text, _ = run(["experiment", "cfi-problem", "--set", 'instances=[["k4", 2, 4]]', "--out-dir", tmp_path],
                        capsys)
    assert code == 0 and json.loads(text)["passed"]
    assert (tmp_path / "cfi-problem.json").read_text() == text
    assert (tmp_path / "cfi-problem.csv").read_text().startswith("graph,variant,m,instance")
