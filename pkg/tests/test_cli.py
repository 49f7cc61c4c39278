import csv
import json
import subprocess
import sys

import pytest

from asep_shock import cli


def run(tmp_path, *args):
    return cli.main([*args, "--output-dir", str(tmp_path)])


def read(path):
    return list(csv.DictReader(open(path)))


def test_exact_two_sites(tmp_path):
    assert run(tmp_path, "exact", "--n", "2") == 0
    rows = {r["bitstring"]: float(r["probability"]) for r in read(tmp_path / "stationary.csv")}
    assert rows["10"] == pytest.approx(0.4, abs=1e-15)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["exit_code"] == 0 and man["config"]["n"] == 2
    assert "time" not in json.dumps(man)


def test_usage_errors(tmp_path, capsys):
    assert run(tmp_path, "exact", "--bogus", "1") == cli.EXIT_USAGE
    assert run(tmp_path, "exact", "--n", "two") == cli.EXIT_USAGE
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n=3\nflavour=vanilla\n")
    assert run(tmp_path, "exact", "--config", str(cfg)) == cli.EXIT_USAGE
    assert "flavour" in capsys.readouterr().err


def test_domain_error_exits_one(tmp_path):
    assert run(tmp_path, "exact", "--n", "20") == cli.EXIT_USAGE


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# two sites\nn = 3\nalpha=0.5\n")
    assert run(tmp_path, "exact", "--config", str(cfg), "--n", "2") == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config"]["n"] == 2 and man["config"]["alpha"] == 0.5


def test_manifest_round_trip(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert run(first, "simulate", "--n", "6", "--samples", "1600", "--seed", "3") == 0
    assert run(second, "simulate", "--config", str(first / "manifest.json")) == 0
    assert (first / "laplace.csv").read_bytes() == (second / "laplace.csv").read_bytes()


def test_duality_check_report(tmp_path):
    code = run(tmp_path, "duality-check", "--d", "2", "--a", "0.5", "--c", "-1",
               "--x", "0.5,1", "--coeffs", "0.7,0.9")
    assert code == 0
    rows = read(tmp_path / "duality.csv")
    assert len(rows) == 1 and float(rows[0]["rel_gap"]) < 1e-3


def test_zn_refuses_coexistence_line(tmp_path, capsys):
    assert run(tmp_path, "zn", "--mode", "direct", "--A", "1.5", "--C", "1.5", "--n-list", "20") == cli.EXIT_USAGE
    assert "coexistence" in capsys.readouterr().err


def test_limit_laplace(tmp_path):
    assert run(tmp_path, "limit-laplace", "--x", "0.5,1", "--coeffs", "0.5,0.5") == 0
    assert read(tmp_path / "limit_laplace.csv")


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "asep_shock", "exact", "--n", "1", "--output-dir", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0
