import json
import subprocess
import sys

import numpy as np
import pytest

from qmstree.cli import main
from qmstree.io import read_amplitude, read_csv_body, write_amplitude
from qmstree.mixing import degenerate_amplitude

ISING = ["--model", "ising", "--beta", "0.1", "--J", "0.5", "--branch", "h_alpha"]


def run(tmp_path, *args):
    return main(list(args) + ["--out-dir", str(tmp_path)])


def test_entropy_ising(tmp_path):
    assert run(tmp_path, "entropy", *ISING, "--n-max", "2") == 0
    rows = read_csv_body(tmp_path / "entropy_ledger.csv")
    assert [int(r["n"]) for r in rows] == [0, 1, 2]
    assert all(float(r["identity_defect"]) < 1e-8 for r in rows[:2])
    doc = json.loads((tmp_path / "entropy_ledger.json").read_text())
    assert doc["meta"]["config"]["beta"] == 0.1
    assert doc["failures"] == []
    assert (tmp_path / "weights_n2.csv").exists()


def test_entropy_trace_state_bits(tmp_path):
    assert run(tmp_path, "entropy", "--model", "trace_state", "--k", "2", "--n-max", "3") == 0
    rows = read_csv_body(tmp_path / "entropy_ledger.csv")
    assert abs(float(rows[3]["direct_ratio"]) - np.log(2)) < 1e-12
    assert run(tmp_path, "entropy", "--model", "trace_state", "--n-max", "1", "--bits") == 0
    rows = read_csv_body(tmp_path / "entropy_ledger.csv")
    assert abs(float(rows[1]["S_n"]) - 3) < 1e-12


def test_missing_branch_is_config_error(tmp_path, capsys):
    assert run(tmp_path, "entropy", "--model", "ising", "--beta", "0.1", "--J", "0.5") == 2
    assert "usage" in capsys.readouterr().err


def test_beta_zero_rejected(tmp_path):
    assert run(tmp_path, "entropy", "--model", "ising", "--beta", "0", "--J", "0.5",
               "--branch", "h_alpha") == 2
    assert run(tmp_path, "sweep", "--beta-grid", "0,0.5", "--J-grid", "0.5") == 2


def test_unavailable_branch(tmp_path):
    assert run(tmp_path, "verify", "--model", "ising", "--beta", "0.1", "--J", "0.5",
               "--branch", "h1") == 2


def test_verify(tmp_path):
    assert run(tmp_path, "verify", *ISING) == 0
    assert run(tmp_path, "verify", "--model", "trace_state", "--tol", "1e-12") == 0
    assert run(tmp_path, "verify", "--model", "ising", "--beta", "0.5", "--J", "1",
               "--branch", "h_alpha", "--h", "I") == 1
    rows = read_csv_body(tmp_path / "verify.csv")
    assert float(rows[0]["functional_defect"]) > 1e-3


def test_entropy_negative_control_still_writes(tmp_path):
    assert run(tmp_path, "entropy", "--model", "ising", "--beta", "0.5", "--J", "1",
               "--branch", "h_alpha", "--h", "I") == 1
    assert (tmp_path / "entropy_ledger.csv").exists()


def test_mixing(tmp_path):
    assert run(tmp_path, "mixing", *ISING) == 0
    doc = json.loads((tmp_path / "mixing.json").read_text())
    assert doc["passed"] and doc["children"][0]["simple"]
    decay = read_csv_body(tmp_path / "decay.csv")
    c = [float(r["correlation"]) for r in decay]
    assert c[0] > c[1] > c[2]
    assert run(tmp_path, "mixing", "--model", "trace_state") == 0
    assert all(float(r["correlation"]) == 0 for r in read_csv_body(tmp_path / "decay.csv"))


def test_mixing_degenerate_file(tmp_path):
    f = write_amplitude(tmp_path / "copy.txt", degenerate_amplitude("copy"), 2, 2)
    A, k, d = read_amplitude(f)
    assert (k, d) == (2, 2) and np.abs(A - degenerate_amplitude("copy")).max() == 0
    assert run(tmp_path, "mixing", "--model", "custom_amplitude", "--amplitude", str(f)) == 1


def test_custom_amplitude_validation(tmp_path):
    f = write_amplitude(tmp_path / "bad.txt", 2 * np.eye(8), 2, 2)
    assert run(tmp_path, "verify", "--model", "custom_amplitude", "--amplitude", str(f)) == 2
    (tmp_path / "nohdr.txt").write_text("1 0\n0 1\n")
    assert run(tmp_path, "verify", "--model", "custom_amplitude",
               "--amplitude", str(tmp_path / "nohdr.txt")) == 2


def test_sweep(tmp_path):
    assert run(tmp_path, "sweep") == 0
    rows = read_csv_body(tmp_path / "sweep.csv")
    assert len(rows) == 100
    assert max(float(r["discrepancy"]) for r in rows) < 1e-3
    assert [(r["beta"], r["J"]) for r in rows] == sorted((r["beta"], r["J"]) for r in rows)


def test_sweep_single_point_matches_entropy(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["sweep", "--beta-grid", "0.1", "--J-grid", "0.5", "--n-max", "3", "--out-dir", str(a)])
    main(["entropy", *ISING, "--n-max", "3", "--out-dir", str(b)])
    s = read_csv_body(a / "sweep.csv")[0]
    e = read_csv_body(b / "entropy_ledger.csv")[3]
    assert float(s["direct_ratio"]) == float(e["direct_ratio"])


def test_byte_identical(tmp_path):
    run(tmp_path, "mixing", *ISING)
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    run(tmp_path, "mixing", *ISING)
    assert first == {p.name: p.read_bytes() for p in tmp_path.iterdir()}


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[qms]\nmodel = ising\nbeta = 0.1\nJ = 0.5\nbranch = h_alpha\nn_max = 1\n")
    assert run(tmp_path, "entropy", "--config", str(cfg)) == 0
    assert len(read_csv_body(tmp_path / "entropy_ledger.csv")) == 2
    assert run(tmp_path, "entropy", "--config", str(cfg), "--n-max", "2") == 0
    assert len(read_csv_body(tmp_path / "entropy_ledger.csv")) == 3
    bad = tmp_path / "bad.ini"
    bad.write_text("[qms]\nbogus = 1\n")
    assert run(tmp_path, "entropy", "--config", str(bad)) == 2


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("QMS_OUT_DIR", str(tmp_path / "env"))
    assert main(["entropy", "--model", "trace_state", "--n-max", "1"]) == 0
    head = (tmp_path / "env" / "entropy_ledger.csv").read_text().splitlines()
    assert head[0].startswith("# qmstree ")
    assert head[1].startswith("# config ")


def test_dense_path_cap_is_config_error(tmp_path):
    assert run(tmp_path, "entropy", *ISING, "--path", "dense", "--n-max", "3") == 2


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "qmstree", "entropy", "--model", "trace_state",
                          "--n-max", "1", "--out-dir", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "closed_form" in out.stdout
