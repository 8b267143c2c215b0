import csv
import json
import re

import pytest

from collective_otto.cli import main, parse_axis
from collective_otto.config import ConfigError

TAG = re.compile(r"^error\[(config|usage|compute|io)\] \S+: .+$")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def assert_error(code, err, expected_code):
    assert code == expected_code
    lines = err.strip().splitlines()
    assert len(lines) == 1 and TAG.match(lines[0]), err


def report_block(out, column):
    rows = {}
    for line in out.splitlines():
        parts = line.split()
        if len(parts) >= 4 and parts[0] in ("var(W)", "efficiency"):
            rows[parts[0]] = parts[column]
    return rows


def test_cycle_reports_lambda_r(capsys):
    code, out, _ = run(capsys, "cycle", "--preset", "fig1", "--model", "linear")
    assert code == 0
    assert "lambda_r = 3.99990" in out and "independent" in out


def test_cycle_single_spin_reports_match(capsys):
    code, out, _ = run(capsys, "cycle", "--preset", "fig1", "--model", "linear", "--n", "1")
    assert code == 0
    table = [l.split() for l in out.splitlines() if l.startswith(("work extracted", "var(W)", "<Q_h>", "TUR"))]
    for parts in table:
        assert parts[-3] == parts[-2] or parts[-4] == parts[-3]
    assert "lambda_r = 1 (exact TPM)" in out


def test_cycle_writes_table(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("COLLECTIVE_OTTO_OUTPUT_DIR", str(tmp_path))
    code, _, _ = run(capsys, "cycle", "--preset", "fig1", "--output", "one.jsonl", "--format", "jsonl")
    assert code == 0
    rec = json.loads((tmp_path / "one.jsonl").read_text())
    assert rec["status"] == "ok" and rec["model"] == "lmg"


def test_cycle_rejects_reversed_frequencies(capsys):
    code, _, err = run(capsys, "cycle", "--preset", "fig1", "--omega-c", "0.9")
    assert_error(code, err, 2)
    assert "cycle.omega_c" in err


def test_sweep_n_axis(capsys, tmp_path):
    out_file = tmp_path / "lam.csv"
    code, _, _ = run(capsys, "sweep", "--preset", "fig1", "--model", "linear", "--axis", "n=2:100",
                     "--fix-delta", "0.005", "--output", str(out_file), "--threads", "2")
    assert code == 0
    rows = list(csv.DictReader(out_file.open()))
    assert len(rows) == 99 and all(r["status"] == "ok" for r in rows)
    assert float(rows[-1]["lambda_r"]) > float(rows[0]["lambda_r"])


def test_sweep_two_axes(capsys):
    code, out, _ = run(capsys, "sweep", "--preset", "fig1", "--axis", "n=2:5", "--axis2", "T_h=log:-1:3:4")
    assert code == 0
    assert len(out.strip().splitlines()) == 1 + 4 * 4


@pytest.mark.parametrize("axis", ["n=10:2", "n=lin:2:5:0", "T_h=,"])
def test_sweep_empty_grid(capsys, axis):
    code, _, err = run(capsys, "sweep", "--preset", "fig1", "--axis", axis)
    assert_error(code, err, 2)


def test_parse_axis_forms():
    assert parse_axis("n=2:6:2") == ("n", (2, 4, 6))
    assert parse_axis("delta=0.1,0.2") == ("delta", (0.1, 0.2))
    assert parse_axis("T_h=log:0:2:3") == ("T_h", (1.0, 10.0, 100.0))
    with pytest.raises(ConfigError):
        parse_axis("n=1.5:3")
    with pytest.raises(ConfigError):
        parse_axis("omega=1:2")


def test_dynamics_trace(capsys, tmp_path):
    path = tmp_path / "trace.csv"
    code, _, err = run(capsys, "dynamics", "--n", "2", "--omega", "1", "--beta", "1", "--steps", "2",
                       "--output", str(path))
    assert code == 0 and "thermalization time" in err
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,m,population" and len(lines) == 1 + 3 * 3
    assert lines[1].split(",")[:2] == ["0", "-1"]


def test_dynamics_rejects_lmg(capsys):
    code, _, err = run(capsys, "dynamics", "--preset", "fig1")
    assert_error(code, err, 2)


def test_validate_fast_passes(capsys):
    code, out, _ = run(capsys, "validate", "--level", "fast")
    assert code == 0 and "FAIL" not in out


def test_validate_catches_flipped_dissipator(capsys):
    code, out, _ = run(capsys, "validate", "--inject-fault", "dissipator-sign")
    assert code == 1
    assert "FAIL detailed_balance" in out


@pytest.mark.parametrize("argv", [
    ["cycle", "--config", "/nonexistent/run.ini"],
    ["cycle", "--preset", "fig1", "--set", "cycle.nope=1"],
    ["cycle", "--preset", "fig1", "--set", "novalue"],
    ["cycle", "--preset", "fig1", "--n", "many"],
    ["cycle"],
    ["sweep", "--preset", "fig1", "--axis", "n=2:4", "--fix-delta", "0.1", "--fix-betas"],
    ["frobnicate"],
    ["validate", "--level", "slow"],
])
def test_error_paths_have_single_line_tags(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert_error(code, err, 2)


def test_config_file_and_flag_layering(capsys, tmp_path):
    code, ini, _ = run(capsys, "cycle", "--preset", "fig1", "--print-config")
    assert code == 0
    path = tmp_path / "run.ini"
    path.write_text(ini.replace("n = 10", "n = 4"))
    code, out, _ = run(capsys, "cycle", "--config", str(path), "--beta-c", "0.2", "--print-config")
    assert code == 0
    assert "n = 4" in out and "beta_c = 0.2" in out and "delta" not in out
