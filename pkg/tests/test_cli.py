import csv
import json

import numpy as np
import pytest

from pairsim import fluid, schemas
from pairsim.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, run, worker_count
from pairsim.errors import ToleranceNotMet

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@pytest.fixture
def files(tmp_path):
    def write(name, doc):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)

    return {
        "fb": write("fb.json", {"pi": [[2, 3], [3, 4]], "x_frac": [0.3, 0.7], "y_frac": [0.4, 0.6]}),
        "homog": write("homog.json", {"alpha": [0, 0], "beta": [3, 2], "p": [[1, 0.5], [1 / 3, 1]],
                                       "x_frac": [0.5, 0.5], "y_frac": [0.5, 0.5]}),
        "hetero": write("hetero.json", {"pi": [[1, 3], [3, 1]]}),
        "counts": write("counts.json", {"pi": [[3, 1], [1, 2]], "n": 40, "x": [10, 30], "y": [20, 20]}),
        "bad": write("bad.json", {"pi": [[1, 2], [2, 0]]}),
    }


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_pattern_fine_balance(files, tmp_path):
    out = tmp_path / "p.json"
    assert run(["pattern", "--params", files["fb"], "--out", str(out), "--eps", "1e-9"]) == EXIT_OK
    doc = _read_json(out)
    schemas.validate(doc, "pattern")
    assert np.abs(np.array(doc["pattern"]) - [[0.12, 0.18], [0.28, 0.42]]).max() <= 1e-9 + 1e-8
    assert doc["error_bound"] <= 1e-9


def test_classify(files, tmp_path, capsys):
    assert run(["classify", "--params", files["hetero"]]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["class"] == "heterogamous"
    assert run(["classify", "--params", files["homog"]]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["class"] == "homogamous"


def test_overrides(files, capsys):
    assert run(["classify", "--params", files["hetero"], "--set", "pi=[[1,1],[1,1]]"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["class"] == "panmictic"
    assert run(["classify", "--params", files["hetero"], "--set", "nonsense"]) == EXIT_INVALID


def test_fine_balance_and_sym2x2(files, capsys):
    assert run(["fine-balance", "--params", files["fb"]]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["fine_balance"] and doc["alpha_bar"] == [0, 1] and doc["beta_bar"] == [2, 3]
    assert np.allclose(doc["pattern"], [[0.12, 0.18], [0.28, 0.42]])
    assert run(["sym2x2", "--params", files["homog"], "--t-end", "2"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    schemas.validate(doc, "sym2x2")
    assert doc["case"] == "Generic" and doc["q12_inf"] < 0.25 < doc["pattern"][0][0]
    assert 0 < doc["q12_t"] < doc["q12_inf"]


def test_simulate_outputs(files, tmp_path):
    csv_out = tmp_path / "traj.csv"
    assert run(["simulate", "--params", files["counts"], "--out", str(csv_out), "--seed", "5"]) == EXIT_OK
    rows = list(csv.reader(csv_out.open()))
    assert rows[0] == ["t", "i", "j"] and len(rows) == 41
    assert (tmp_path / "traj.png").read_bytes().startswith(PNG_MAGIC)
    js = tmp_path / "events.json"
    assert run(["simulate", "--params", files["counts"], "--out", str(js), "--format", "json",
                "--seed", "5", "--no-figure"]) == EXIT_OK
    doc = _read_json(js)
    assert [float(r[0]) for r in rows[1:]] == [e[0] for e in doc["events"]]
    assert not (tmp_path / "events.png").exists()
    ens = tmp_path / "ens.json"
    assert run(["simulate", "--params", files["counts"], "--out", str(ens), "--replicates", "50"]) == EXIT_OK
    doc = _read_json(ens)
    assert doc["replicates"] == 50 and len(doc["patterns"]) == 50
    assert np.allclose(np.sum(doc["mean_pattern"], axis=1), [10, 30])


def test_simulate_from_fractions(files, capsys):
    assert run(["simulate", "--params", files["fb"], "--n", "25"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 26


def test_fluid_both_coordinates(files, tmp_path):
    q = tmp_path / "q.csv"
    r = tmp_path / "r.csv"
    assert run(["fluid", "--params", files["homog"], "--out", str(q), "--t-end", "2"]) == EXIT_OK
    assert run(["fluid", "--params", files["homog"], "--out", str(r), "--t-end", "2",
                "--coords", "replicator"]) == EXIT_OK
    last_q = np.array(list(csv.reader(q.open()))[-1], dtype=float)
    rows_r = list(csv.reader(r.open()))
    assert rows_r[0][-4:] == ["Q11", "Q12", "Q21", "Q22"]
    last_r = np.array(rows_r[-1], dtype=float)
    assert last_q[0] == last_r[0] == 2.0
    assert np.abs(last_q[1:] - last_r[-4:]).max() < 1e-7
    assert (tmp_path / "q.png").exists() and (tmp_path / "r.png").exists()


def test_converge(files, tmp_path):
    out = tmp_path / "conv.json"
    assert run(["converge", "--params", files["fb"], "--out", str(out), "--format", "json",
                "--n-list", "50,500", "--replicates", "3", "--seed", "2"]) == EXIT_OK
    doc = _read_json(out)
    assert doc["n_list"] == [50, 500] and np.array(doc["errors"]).shape == (3, 2)
    assert (tmp_path / "conv.png").exists()
    out_csv = tmp_path / "conv.csv"
    assert run(["converge", "--params", files["fb"], "--out", str(out_csv), "--n-list", "50,500",
                "--replicates", "3", "--seed", "2", "--no-figure"]) == EXIT_OK
    rows = list(csv.reader(out_csv.open()))
    assert rows[0] == ["replicate", "n", "sup_error"]
    assert [float(r[2]) for r in rows[1:]] == list(np.ravel(doc["errors"]))


def test_clt_command(tmp_path):
    params = tmp_path / "one.json"
    params.write_text(json.dumps({"pi": [[1.0]], "x_frac": [1.0], "y_frac": [1.0]}))
    out = tmp_path / "clt.json"
    assert run(["clt", "--params", str(params), "--out", str(out), "--n", "200",
                "--replicates", "1000", "--dt", "0.01"]) == EXIT_OK
    doc = _read_json(out)
    assert doc["n"] == 200 and doc["replicates"] == 1000
    assert (tmp_path / "clt.png").exists()


def test_levelcurves(tmp_path):
    out = tmp_path / "lc.csv"
    assert run(["levelcurves", "--out", str(out), "--grid", "0:2:9"]) == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["pi11", "pi22", "q12_inf"] and len(rows) == 82
    table = {(float(a), float(b)): float(v) for a, b, v in rows[1:]}
    for (a, b), v in table.items():
        if a > 0 and b > 0:
            assert v == pytest.approx(table[(b, a)], abs=1e-12)
        if a > 0 and b > 0 and abs(a + b - 1) < 1e-12:
            assert v == pytest.approx(0.25, abs=1e-12)
    assert (tmp_path / "lc.png").read_bytes().startswith(PNG_MAGIC)


def test_determinism(files, tmp_path):
    outs = []
    for tag in "ab":
        out = tmp_path / f"sim_{tag}.csv"
        assert run(["simulate", "--params", files["counts"], "--out", str(out), "--seed", "11"]) == EXIT_OK
        outs.append((out.read_bytes(), out.with_suffix(".png").read_bytes()))
    assert outs[0] == outs[1]
    a, b = tmp_path / "c1.json", tmp_path / "c2.json"
    for p in (a, b):
        assert run(["converge", "--params", files["fb"], "--out", str(p), "--format", "json",
                    "--n-list", "30,300", "--replicates", "2", "--no-figure"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_exit_codes(files, tmp_path, capsys, monkeypatch):
    assert run(["pattern", "--params", files["bad"]]) == EXIT_INVALID
    assert run(["pattern", "--params", str(tmp_path / "missing.json")]) == EXIT_INVALID
    assert run(["frobnicate"]) == EXIT_INVALID
    assert run(["pattern", "--params", files["fb"], "--eps", "0.5"]) == EXIT_INVALID
    assert run(["simulate", "--params", files["counts"], "--replicates", "0"]) == EXIT_INVALID
    assert run(["levelcurves", "--grid", "2:0:5"]) == EXIT_INVALID
    assert run(["sym2x2", "--params", files["hetero"], "--set", "pi=[[1,2],[3,1]]",
                "--set", "x_frac=[0.5,0.5]", "--set", "y_frac=[0.5,0.5]"]) == EXIT_INVALID
    def fail(*args, **kwargs):
        raise ToleranceNotMet("step budget exhausted")

    monkeypatch.setattr(fluid, "mating_pattern_limit", fail)
    assert run(["pattern", "--params", files["fb"]]) == EXIT_NUMERICAL
    capsys.readouterr()


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("PAIRSIM_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("PAIRSIM_THREADS", "many")
    with pytest.raises(Exception):
        worker_count()
