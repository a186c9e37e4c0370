import json
import subprocess
import sys

import numpy as np
import pytest

from copentropy import cli
from copentropy.core import copula_entropy
from copentropy.dataset import load_csv, write_csv
from copentropy.simlab import Scenario, make_lagged_system, sample_mvn, simulate, simulate_flow
from copentropy.stattests import two_sample_test


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    R = np.array([[1, .7, .4, .2], [.7, 1, .5, .3], [.4, .5, 1, .4], [.2, .3, .4, 1]])
    paths = {}
    paths["mvn"] = root / "mvn.csv"
    write_csv(sample_mvn(0.0, R, 300, 1), paths["mvn"])
    x, y = make_lagged_system("random_input", 3, 300, 2)
    paths["lagged"] = root / "lagged.csv"
    np.savetxt(paths["lagged"], np.column_stack([x, y]), delimiter=",")
    paths["flow"] = root / "flow.csv"
    write_csv(simulate_flow("lorenz", 300), paths["flow"])
    series = simulate(Scenario("piecewise", {"regimes": [[0, 1], [5, 1], [0, 1]],
                                             "len_each": 60}, seed=3))
    paths["series"] = root / "series.csv"
    write_csv(series, paths["series"])
    paths["other"] = root / "other.csv"
    write_csv(sample_mvn(0.5, R, 200, 4), paths["other"])
    paths["root"] = root
    return paths


SUBCOMMANDS = [
    ("ce", "mvn", ["--cols", "0,1"], "ce"),
    ("mi-matrix", "mvn", [], "mi"),
    ("cmi", "mvn", ["--x", "0", "--y", "1", "--z", "2"], "cmi"),
    ("te", "lagged", ["--lag", "3"], "te"),
    ("assoc", "mvn", ["--groups", "0,1;2,3"], "association"),
    ("select", "mvn", ["--target", "0", "--top", "2"], "ranking"),
    ("lag", "lagged", ["--max-lag", "4"], "lag"),
    ("sysid", "flow", ["--dt", "0.01"], "relevance"),
    ("tree", "mvn", [], "edges"),
    ("mvnt", "mvn", [], "statistic"),
    ("gof", "mvn", ["--family", "gaussian"], "statistic"),
    ("tst", "mvn", ["--split-at", "150", "--label-draws", "2"], "statistic"),
    ("cpd", "series", ["--label-draws", "2"], "indices"),
    ("symtest", "series", ["--label-draws", "2"], "statistic"),
    ("fit-copula", "mvn", ["--family", "gaussian"], "params"),
]


@pytest.mark.parametrize("cmd,src,extra,key", SUBCOMMANDS, ids=[s[0] for s in SUBCOMMANDS])
def test_every_subcommand_json(capsys, data, cmd, src, extra, key):
    code, out, err = run(capsys, cmd, "--input", data[src], "--header", *extra)
    assert code == 0, err
    assert key in json.loads(out)


@pytest.mark.parametrize("cmd,src,extra,key", SUBCOMMANDS, ids=[s[0] for s in SUBCOMMANDS])
def test_every_subcommand_csv(capsys, data, cmd, src, extra, key):
    code, out, err = run(capsys, cmd, "--input", data[src], "--header", *extra, "--format", "csv")
    assert code == 0, err
    assert out.count("\n") >= 2


def test_ce_contract(capsys, data):
    code, out, _ = run(capsys, "ce", "--input", data["mvn"], "--header", "--k", "3", "--cols", "0,1")
    res = json.loads(out)
    assert code == 0
    assert {"ce", "mi", "k", "norm", "T", "dims"} <= res.keys()
    assert res["mi"] == -res["ce"] and res["k"] == 3 and res["T"] == 300 and res["dims"] == 2
    d = load_csv(data["mvn"], True)
    assert res["ce"] == copula_entropy(d.select([0, 1])).ce


def test_column_names_accepted(capsys, data):
    _, by_pos, _ = run(capsys, "ce", "--input", data["mvn"], "--header", "--cols", "0,1")
    d = load_csv(data["mvn"], True)
    _, by_name, _ = run(capsys, "ce", "--input", data["mvn"], "--header",
                        "--cols", f"{d.names[0]},{d.names[1]}")
    assert by_pos == by_name


def test_tree_edge_list_and_dot(capsys, data):
    _, edges, _ = run(capsys, "tree", "--input", data["mvn"], "--header", "--edges")
    lines = edges.strip().split("\n")
    assert len(lines) == 3 and all(len(l.split("\t")) == 3 for l in lines)
    _, dot, _ = run(capsys, "tree", "--input", data["mvn"], "--header", "--dot")
    assert dot.startswith("graph dependence_tree {") and dot.count("--") == 3


def test_tst_other_file(capsys, data):
    code, out, _ = run(capsys, "tst", "--input", data["mvn"], "--header",
                       "--other", data["other"], "--label-draws", "1")
    assert code == 0 and "statistic" in json.loads(out)


def test_cpd_finds_shifts(capsys, data):
    code, out, _ = run(capsys, "cpd", "--input", data["series"], "--header",
                       "--threshold", "0.1", "--min-segment", "15")
    idx = json.loads(out)["indices"]
    assert code == 0
    assert any(abs(i - 60) <= 10 for i in idx) and any(abs(i - 120) <= 10 for i in idx)


class TestExitCodes:
    def test_unknown_flag(self, capsys, data):
        code, _, err = run(capsys, "ce", "--input", data["mvn"], "--bogus")
        assert code == 2 and "usage" in err

    def test_unknown_subcommand(self, capsys):
        assert run(capsys, "nope")[0] == 2

    def test_missing_input_flag(self, capsys):
        assert run(capsys, "ce")[0] == 2

    def test_bad_k(self, capsys, data):
        assert run(capsys, "ce", "--input", data["mvn"], "--header", "--k", "0")[0] == 2

    def test_overlapping_groups(self, capsys, data):
        assert run(capsys, "assoc", "--input", data["mvn"], "--header", "--groups", "0,1;1,2")[0] == 2

    def test_archimedean_family_on_three_columns(self, capsys, data):
        assert run(capsys, "gof", "--input", data["mvn"], "--header", "--family", "frank")[0] == 2

    def test_bad_split(self, capsys, data):
        assert run(capsys, "tst", "--input", data["mvn"], "--header", "--split-at", "0")[0] == 2

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "ce", "--input", tmp_path / "absent.csv")
        assert code == 1 and err

    def test_non_numeric_data(self, capsys, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,2\n3,abc\n")
        assert run(capsys, "ce", "--input", p)[0] == 1

    def test_bad_env_override(self, capsys, data, monkeypatch):
        monkeypatch.setenv("COPENTROPY_K", "three")
        assert run(capsys, "ce", "--input", data["mvn"], "--header")[0] == 2


def test_env_override(capsys, data, monkeypatch):
    _, explicit, _ = run(capsys, "ce", "--input", data["mvn"], "--header", "--k", "5")
    monkeypatch.setenv("COPENTROPY_K", "5")
    _, from_env, _ = run(capsys, "ce", "--input", data["mvn"], "--header")
    assert explicit == from_env and json.loads(from_env)["k"] == 5
    monkeypatch.setenv("COPENTROPY_FORMAT", "csv")
    _, out, _ = run(capsys, "ce", "--input", data["mvn"], "--header")
    assert out.startswith("ce,") or "," in out.split("\n")[0]


@pytest.mark.parametrize("cmd", [c[0] for c in SUBCOMMANDS] + ["simulate"])
def test_help_lists_defaults(capsys, cmd):
    code, out, _ = run(capsys, cmd, "--help")
    assert code == 0
    if cmd != "simulate":
        assert "(default: 3)" in out and "(default: 1)" in out and "--threads" in out


@pytest.mark.parametrize("cmd,extra,src", [
    ("cpd", ["--label-draws", "3"], "series"),
    ("mi-matrix", [], "mvn"),
    ("lag", ["--max-lag", "4"], "lagged"),
    ("select", ["--target", "1"], "mvn"),
])
def test_byte_identical_across_runs_and_threads(capsys, data, cmd, extra, src):
    outs = [run(capsys, cmd, "--input", data[src], "--header", *extra, "--threads", t)[1]
            for t in (1, 1, 4, 0)]
    assert len(set(outs)) == 1


def test_random_ties_seeded(capsys, tmp_path):
    p = tmp_path / "ties.csv"
    np.savetxt(p, np.random.default_rng(0).integers(0, 4, (200, 2)), delimiter=",")
    a = run(capsys, "ce", "--input", p, "--tie", "random", "--seed", "7")[1]
    b = run(capsys, "ce", "--input", p, "--tie", "random", "--seed", "7")[1]
    assert a == b


def test_simulate_then_tst_round_trip(capsys, tmp_path):
    scn = Scenario("piecewise", {"regimes": [[0, 1], [2, 1]], "len_each": 100}, T=200, seed=11)
    sp = tmp_path / "scn.json"
    sp.write_text(scn.to_json())
    out_csv = tmp_path / "data.csv"
    assert run(capsys, "simulate", "--scenario", sp, "--out", out_csv)[0] == 0
    code, out, _ = run(capsys, "tst", "--input", out_csv, "--header", "--split-at", "100")
    assert code == 0
    d = simulate(scn)
    expected = two_sample_test(d.rows(0, 100), d.rows(100, 200), seed=1).statistic
    assert json.loads(out)["statistic"] == expected


def test_simulate_stdout_matches_file(capsys, tmp_path):
    sp = tmp_path / "scn.json"
    sp.write_text(Scenario("beta", {"a": 2, "b": 5}, T=50, seed=2).to_json())
    _, text, _ = run(capsys, "simulate", "--scenario", sp)
    f = tmp_path / "x.csv"
    run(capsys, "simulate", "--scenario", sp, "--out", f)
    np.testing.assert_array_equal(load_csv(f, True).values,
                                  np.loadtxt(text.splitlines()[1:], delimiter=",", ndmin=2))


def test_console_script(data):
    r = subprocess.run([sys.executable, "-m", "copentropy", "ce", "--input", str(data["mvn"]),
                        "--header"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "ce" in json.loads(r.stdout)
