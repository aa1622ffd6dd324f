import json
import math
import subprocess
import sys

import pytest

from dcone.cli import main, parse_h

SMALL = ["--n-r", "64", "--n-theta", "64", "--h", "2^-5"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_h():
    assert parse_h("2^-6") == 2.0**-6
    assert parse_h("0.125") == 0.125


def test_cone_c1(capsys):
    code, out, _ = run(capsys, "cone", "c1", "--curve", "equator")
    assert code == 0 and json.loads(out)["c1"] == pytest.approx(0.0, abs=1e-12)
    code, out, _ = run(capsys, "cone", "c1")
    assert json.loads(out)["c1"] == pytest.approx(9.779319252292446, rel=1e-6)


def test_mesh_info(capsys):
    code, out, _ = run(capsys, "mesh", "info", *SMALL)
    doc = json.loads(out)
    assert code == 0 and doc["weights_sum"] == pytest.approx(math.pi)
    assert "config_hash" in doc["provenance"]


def test_solve_is_deterministic_and_round_trips(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "solve", *SMALL, "--out", str(a))[0] == 0
    assert run(capsys, "solve", *SMALL, "--out", str(b))[0] == 0
    assert (a / "solve.json").read_bytes() == (b / "solve.json").read_bytes()
    assert (a / "field.json").read_bytes() == (b / "field.json").read_bytes()
    energy = json.loads((a / "solve.json").read_text())["energy"]
    code, out, _ = run(capsys, "energy", "eval", "--field", str(a / "field.json"))
    assert code == 0
    assert json.loads(out)["breakdown"]["total"] == pytest.approx(energy, rel=1e-12)


def test_exit_codes(capsys, tmp_path):
    code, _, err = run(capsys, "solve", *SMALL, "--max-iter", "2", "--out", str(tmp_path))
    assert code == 4 and json.loads(err)["error"] == "ConvergenceError"
    code, _, err = run(capsys, "mesh", "info", "--h", "0.4")
    assert code == 2 and json.loads(err)["exit_code"] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "mesh", "info", "--config", str(bad))[0] == 2


def test_config_file_overridden_by_flags(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mesh": {"n_r": 64, "n_theta": 64}, "h": [0.03125]}))
    _, out, _ = run(capsys, "mesh", "info", "--config", str(cfg))
    assert json.loads(out)["n_theta"] == 64
    _, out, _ = run(capsys, "mesh", "info", "--config", str(cfg), "--n-theta", "128")
    assert json.loads(out)["n_theta"] == 128


def test_output_dir_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("DCONE_OUTPUT_DIR", str(tmp_path / "env"))
    assert run(capsys, "cone", "c1")[0] == 0
    assert (tmp_path / "env" / "c1.json").exists()


def test_fit_on_synthetic_table(capsys, tmp_path):
    table = tmp_path / "t.csv"
    lines = ["h,energy_over_h2,reason"]
    lines += [f"{2.0**-p!r},{5 * p * math.log(2) + 3!r},gtol" for p in range(4, 10)]
    table.write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "fit", "--table", str(table), "--c1", "5")
    doc = json.loads(out)
    assert code == 0 and doc["slope"] == pytest.approx(5.0) and doc["relative_slope_gap"] < 1e-10
    code, _, _ = run(capsys, "report", "--table", str(table), "--c1", "5", "--out", str(tmp_path / "r"))
    assert code == 0 and (tmp_path / "r" / "report.csv").exists()


def test_sweep_fit_report(capsys, tmp_path):
    out = tmp_path / "sw"
    code, _, _ = run(capsys, "sweep", "--n-r", "64", "--n-theta", "64", "--h-from", "2^-4", "--h-to", "2^-7",
                     "--out", str(out), "--snapshots")
    assert code == 0
    doc = json.loads((out / "sweep.json").read_text())
    assert [r["h"] for r in doc["rows"]] == [2.0**-p for p in range(4, 8)]
    assert doc["fit"]["n_points"] == 4
    assert len(list(out.glob("field_h*.json"))) == 4
    code, o, _ = run(capsys, "fit", "--table", str(out / "sweep.csv"))

    def strict(name):
        raise ValueError(f"non-standard JSON constant {name}")

    fit = json.loads(o, parse_constant=strict)
    assert code == 0 and fit["slope"] == pytest.approx(doc["fit"]["slope"], rel=1e-12)
    assert fit["upper_constant"] is None


def test_probes_and_checks(capsys):
    code, out, _ = run(capsys, "probe", "core-sup", "--family", "quadratic", "2^-4")
    assert code == 0 and json.loads(out)["rows"][0]["ratio"] == pytest.approx(1 / math.sqrt(8 * math.pi))
    code, out, _ = run(capsys, "energy", "check", *SMALL, "--directions", "4")
    assert code == 0 and json.loads(out)["gradient_check"]["max_rel_error"] < 1e-6
    code, out, _ = run(capsys, "curve", "validate")
    assert code == 0 and json.loads(out)["validation"]["ok"]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dcone.cli", "cone", "c1", "--curve", "equator"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["c1"] == pytest.approx(0.0, abs=1e-12)
