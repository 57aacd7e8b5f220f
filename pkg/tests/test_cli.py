import csv
import json

import pytest

from msk.cli import parse_range, run, UsageError


@pytest.fixture
def model(tmp_path):
    path = tmp_path / "bip.json"
    path.write_text(json.dumps({"m": 2, "lambda": [0.5, 0.5], "delta2": [[0, 1], [1, 0]]}))
    return str(path)


@pytest.fixture
def sk_model(tmp_path):
    path = tmp_path / "sk.json"
    path.write_text(json.dumps({"lambda": [1.0], "delta2": [[1.0]]}))
    return str(path)


def test_parse_range():
    assert parse_range("0:1:3").tolist() == [0.0, 0.5, 1.0]
    with pytest.raises(UsageError):
        parse_range("0:1")


def test_phase_csv(tmp_path, model):
    out = tmp_path / "phase.csv"
    args = ["phase", "--model", model, "--beta-range", "0:2:41", "--h-range", "0:1:21",
            "--output", str(out), "--threads", "1"]
    assert run(args) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["beta", "h", "beta_c", "beta_0", "beta_at", "region", "conjectural"]
    assert len(rows) == 1 + 41 * 21
    keys = [(float(r[0]), float(r[1])) for r in rows[1:]]
    assert keys == sorted(keys)
    first = out.read_bytes()
    assert run(args[:-2] + ["--threads", "2"]) == 0
    assert out.read_bytes() == first
    assert not list(tmp_path.glob(".*.tmp"))


def test_missing_model(tmp_path, capsys):
    rc = run(["solve", "--model", str(tmp_path / "nope.json"), "--beta", "1"])
    assert rc == 2
    assert "nope.json" in capsys.readouterr().err


def test_bad_model_exit_1(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"lambda": [0.5, 0.5], "delta2": [[1, 2], [1, 1]]}))
    assert run(["solve", "--model", str(p), "--beta", "1"]) == 1
    assert capsys.readouterr().err.startswith("AsymmetricMatrix")


def test_usage_error():
    assert run(["solve"]) == 2
    assert run(["frobnicate"]) == 2


def test_solve_json(tmp_path, sk_model):
    out = tmp_path / "s.json"
    assert run(["solve", "--model", sk_model, "--beta", "0.5", "--h", "0.3", "--output", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == 1 and doc["config"]["beta"] == 0.5
    assert doc["result"]["residual"] < 1e-12


def test_covariance_and_stability(sk_model, capsys):
    assert run(["covariance", "--model", sk_model, "--beta", "0.5", "--h", "0.3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["result"]["covariance"]["Sigma0"]) == 1
    assert run(["covariance", "--model", sk_model, "--beta", "1.5", "--h", "0.1"]) == 1
    assert "StabilityViolated" in capsys.readouterr().err


def test_parisi(sk_model, capsys):
    assert run(["parisi", "--model", sk_model, "--beta", "0.7", "--h", "0.3",
                "--k", "1", "--zeta", "0.5", "--q", "0.2", "--q", "0.4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["result"]["k"] == 1
    assert run(["parisi", "--model", sk_model, "--beta", "0.7", "--k", "2", "--q", "0.2"]) == 2


def test_simulate(model, capsys):
    assert run(["simulate", "--model", model, "--beta", "0.3", "--h", "0.2", "--N", "8",
                "--samples", "4", "--seed", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["result"]["overlap_moments"]["N"] == 8


def test_verify_subset(tmp_path):
    out = tmp_path / "v.csv"
    assert run(["verify", "--only", "1,2", "--output", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["id", "name", "passed", "detail"] and len(rows) == 3
    assert all(r[2] == "true" for r in rows[1:])
