import csv
import hashlib
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from powerpost import BACKEND
from powerpost.cli import run
from powerpost.deviance import CSV_HEADER as DEV_HEADER
from powerpost.spectral import CSV_HEADER as SPEC_HEADER

GOLDEN = json.loads((Path(__file__).parent / "golden" / "example1_seed0.json").read_text())
MANIFEST_KEYS = {"command", "seed", "n_samples", "n_alpha", "sub_quad", "forward_evals_ensemble",
                 "forward_evals_grid", "wall_ms", "outputs", "version"}


def digest(out: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(out.iterdir()):
        b = p.read_bytes()
        if p.name == "run.json":
            m = json.loads(b)
            m.pop("wall_ms")
            b = json.dumps(m, sort_keys=True).encode()
        h.update(p.name.encode())
        h.update(b)
    return h.hexdigest()


def header(path: Path):
    with open(path) as fh:
        return next(csv.reader(fh))


def test_example1_smoke(tmp_path):
    out = tmp_path / "d"
    assert run(["example1", "--seed", "0", "--n-samples", "1000", "--n-alpha", "10",
                "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"deviance.csv", "run.json"} <= names
    assert {f"density_{t}.csv" for t in ("0", "0.25", "0.5", "0.75", "1")} <= names
    man = json.loads((out / "run.json").read_text())
    assert set(man) == MANIFEST_KEYS
    assert man["forward_evals_ensemble"] == 1000
    assert sorted(names) == man["outputs"]
    assert tuple(header(out / "deviance.csv")) == DEV_HEADER
    assert header(out / "density_0.5.csv") == ["theta1", "log_density", "density"]
    rows = list(csv.reader(open(out / "deviance.csv")))
    assert len(rows) == 12


def test_golden_hash(tmp_path):
    assert run(["example1", "--seed", "0", "--out", str(tmp_path)]) == 0
    assert digest(tmp_path) == GOLDEN[BACKEND]


@pytest.mark.slow
def test_golden_hash_pure_backend(tmp_path):
    if BACKEND == "python":
        pytest.skip("already covered in-process")
    env = dict(os.environ, POWERPOST_PURE="1")
    subprocess.run([sys.executable, "-m", "powerpost.cli", "example1", "--seed", "0",
                    "--out", str(tmp_path)], env=env, check=True)
    assert digest(tmp_path) == GOLDEN["python"]


@pytest.mark.parametrize("argv", [
    ["deviance", "--n-samples", "300", "--n-alpha", "7"],
    ["sample", "--example", "3", "--n-samples", "200", "--n-out", "50"],
    ["mgf", "--n-samples", "200", "--betas", "0,0.5,1"],
])
def test_determinism(tmp_path, argv):
    assert run(argv + ["--seed", "5", "--out", str(tmp_path / "a")]) == 0
    assert run(argv + ["--seed", "5", "--out", str(tmp_path / "b")]) == 0
    assert digest(tmp_path / "a") == digest(tmp_path / "b")
    for p in (tmp_path / "a").iterdir():
        if p.name != "run.json":
            assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_invalid_input_exit_2(tmp_path, capsys):
    assert run(["deviance", "--n-alpha", "0", "--out", str(tmp_path)]) == 2
    assert not (tmp_path / "run.json").exists()
    assert run(["deviance", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert run(["frobnicate"]) == 2
    assert run(["deviance", "--sub-quad", "4", "--out", str(tmp_path)]) == 2
    assert run(["density", "--grid", "1,2,3:10", "--out", str(tmp_path)]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text('{"not_a_key": 1}')
    assert run(["deviance", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    cfg.write_text("[1, 2]")
    assert run(["deviance", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert run(["spectral", "--example", "2", "--out", str(tmp_path)]) == 2


def test_numeric_failure_exit_3(tmp_path, capsys):
    # two uniform intervals cannot track 1 + hbar for this dataset
    assert run(["deviance", "--seed", "0", "--n-alpha", "2", "--out", str(tmp_path)]) == 3
    assert "log_domain_fallback" in capsys.readouterr().err


def test_sample_and_spectral_outputs(tmp_path):
    assert run(["sample", "--method", "grid", "--n-out", "20", "--n-samples", "300",
                "--out", str(tmp_path / "s")]) == 0
    assert header(tmp_path / "s" / "samples.csv") == ["theta1"]
    man = json.loads((tmp_path / "s" / "run.json").read_text())
    assert man["forward_evals_ensemble"] == 300 and man["forward_evals_grid"] > 0
    assert run(["spectral", "--n-samples", "300", "--out", str(tmp_path / "k")]) == 0
    assert tuple(header(tmp_path / "k" / "spectral.csv")) == SPEC_HEADER
    assert run(["mgf", "--n-samples", "300", "--grid", "0,0.5,1", "--betas", "0,1",
                "--out", str(tmp_path / "m")]) == 0
    rows = list(csv.reader(open(tmp_path / "m" / "mgf.csv")))
    assert rows[0] == ["alpha", "beta", "m"] and len(rows) == 7
