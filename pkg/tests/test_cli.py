import csv
import io
import json
import subprocess
import sys

import pytest

from coulthresh.cli import (EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_SOLVER, grid_values, main,
                            parse_range, read_config, render_svg)


def run(argv, tmp_path, name="out"):
    out = tmp_path / name
    rc = main(argv + ["--out", str(out)])
    return rc, (out.read_bytes() if out.exists() else None)


SCAN = ["scan", "--q1", "0.3:0.9", "--q2", "0.3:0.9", "--grid", "0.3", "--basis", "8",
        "--trials", "6"]


def test_scan_csv_rows_and_determinism(tmp_path):
    rc1, a = run(SCAN, tmp_path, "a.csv")
    rc2, b = run(SCAN, tmp_path, "b.csv")
    assert rc1 == rc2 == EXIT_OK
    assert a == b
    rows = list(csv.reader(io.StringIO(a.decode())))
    assert rows[0] == ["q1", "q2", "state", "margin", "E0", "E_thr", "basis_size"]
    assert len(rows) == 1 + 9


def test_scan_default_grid_has_225_points():
    assert len(grid_values(parse_range("0.1:1.5"), 0.1)) == 15


def test_scan_parallel_matches_serial(tmp_path):
    _, a = run(SCAN, tmp_path, "a.csv")
    _, b = run(SCAN + ["--jobs", "2"], tmp_path, "b.csv")
    assert a == b


def test_scan_json_and_svg(tmp_path):
    rc, j = run(SCAN + ["--format", "json"], tmp_path, "a.json")
    assert rc == EXIT_OK
    doc = json.loads(j)
    assert len(doc["points"]) == 9 and doc["metadata"]["basis_size"] == 8
    rc, s = run(SCAN + ["--format", "svg"], tmp_path, "a.svg")
    assert rc == EXIT_OK and s.startswith(b"<svg") and s.count(b"<circle") == 9
    _, s2 = run(SCAN + ["--format", "svg"], tmp_path, "b.svg")
    assert s == s2


def test_scan_stdout_silent_in_file_mode(tmp_path, capsys):
    rc, _ = run(SCAN[:1] + ["--q1", "0.5", "--q2", "0.5", "--basis", "4", "--trials", "2"],
                tmp_path)
    assert rc == EXIT_OK
    assert capsys.readouterr().out == ""


@pytest.mark.parametrize("argv", [
    ["scan", "--grid", "0"],
    ["scan", "--masses", "1,1"],
    ["scan", "--q1", "1.0:0.5"],
    ["scan", "--basis", "0"],
    ["scan", "--jobs", "0"],
    ["critical-charge", "--tol", "0"],
    ["critical-charge", "--tol", "-1e-3"],
    ["critical-charge", "--nuclear-mass", "-1"],
    ["verify", "nonsense"],
    ["trace-border", "--rays", "-1"],
    ["frobnicate"],
])
def test_config_errors_exit_2(argv, tmp_path):
    rc, _ = run(argv, tmp_path)
    assert rc == EXIT_CONFIG


def test_solver_failure_exit_3(tmp_path, capsys):
    # two basis functions cannot bind the hydrogen anion: no sign change on the bracket
    rc, _ = run(["critical-charge", "--basis", "2", "--trials", "2"], tmp_path)
    assert rc == EXIT_SOLVER
    assert "no sign change" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# archived run\nq1 = 0.5\nq2 = 0.5:0.6\ngrid = 0.1\nbasis = 6\n"
                   "trials = 3\nformat = json\n")
    rc, j = run(["scan", "--config", str(cfg)], tmp_path, "a.json")
    assert rc == EXIT_OK
    doc = json.loads(j)
    assert len(doc["points"]) == 2 and doc["metadata"]["basis_size"] == 6
    rc, j = run(["scan", "--config", str(cfg), "--basis", "5"], tmp_path, "b.json")
    assert json.loads(j)["metadata"]["basis_size"] == 5


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    rc, _ = run(["scan", "--config", str(cfg)], tmp_path)
    assert rc == EXIT_CONFIG


def test_read_config_syntax(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("a = 1\nnuclear-mass = 2  # comment\n")
    assert read_config(cfg) == {"a": "1", "nuclear_mass": "2"}


def test_trace_border_outputs(tmp_path):
    argv = ["trace-border", "--rays", "1.0", "--basis", "16", "--trials", "20", "--tol", "0.05"]
    rc, a = run(argv, tmp_path, "a.json")
    _, b = run(argv, tmp_path, "b.json")
    assert rc == EXIT_OK and a == b
    doc = json.loads(a)
    up, lo = doc["borders"]["upper"][0], doc["borders"]["lower"][0]
    assert up["kind"] == lo["kind"] == "border"
    assert up["hi"] == pytest.approx(lo["hi"], abs=0.1)
    rc, c = run(argv + ["--format", "csv"], tmp_path, "c.csv")
    assert c.decode().splitlines()[0] == "sector,fixed,lo,hi,margin_lo,margin_hi"


@pytest.mark.parametrize("suite", ["inequalities", "clr"])
def test_verify_suites_pass(suite, tmp_path):
    argv = ["verify", suite]
    rc, a = run(argv, tmp_path, "a.json")
    _, b = run(argv, tmp_path, "b.json")
    assert rc == EXIT_OK and a == b
    doc = json.loads(a)
    assert doc["passed"] and all(r["passed"] for r in doc["reports"])


def test_verify_greens(tmp_path):
    rc, a = run(["verify", "greens", "--samples", "100"], tmp_path)
    assert rc == EXIT_OK
    assert json.loads(a)["passed"]


def test_verify_fail_exit_code(tmp_path, monkeypatch):
    from coulthresh import cli

    monkeypatch.setitem(cli.SUITE_FUNCS, "clr", lambda args: [{"name": "x", "passed": False}])
    rc, _ = run(["verify", "clr"], tmp_path)
    assert rc == EXIT_FAIL


def test_json_stable_key_order(tmp_path):
    _, a = run(["verify", "inequalities", "--samples", "1000"], tmp_path)
    text = a.decode()
    assert text == json.dumps(json.loads(text), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def test_render_svg_deterministic():
    pts = [(0.5, 0.5, "CertifiedStable"), (0.01, 1.0, "CriterionUnstable")]
    assert render_svg(pts) == render_svg(pts)


def test_module_entry_point(tmp_path):
    out = tmp_path / "v.json"
    r = subprocess.run([sys.executable, "-m", "coulthresh", "verify", "inequalities",
                        "--samples", "1000", "--out", str(out)], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout == ""
    assert "PASS two_point" in r.stderr
