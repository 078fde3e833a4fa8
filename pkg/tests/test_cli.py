"""Command-line interface: exit codes, report files, dump options."""

import json
import os
import subprocess
import sys

import pytest

from conftest import bench, needs_solver, solver_available

pytestmark = needs_solver

ENV = dict(os.environ, PYTHONPATH=os.path.join(os.path.dirname(__file__), "..", "src"))


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "tileproof.cli"] + list(args),
        capture_output=True, text=True, env=ENV)


def test_verified_exit_code_and_json(tmp_path):
    out = tmp_path / "report.json"
    r = run_cli("verify", bench("init"), "--json", str(out))
    assert r.returncode == 0, r.stderr
    assert "Verified" in r.stdout
    doc = json.loads(out.read_text())
    assert doc["status"] == "Verified"
    assert doc["benchmark"] == "init"


def test_violated_exit_code(tmp_path):
    r = run_cli("verify", bench("init_u"))
    assert r.returncode == 1
    assert "Violated" in r.stdout


def test_inconclusive_exit_code():
    r = run_cli("verify", bench("init"), "--task-timeout", "0.001")
    assert r.returncode == 2


def test_usage_error_exit_code(tmp_path):
    bad = tmp_path / "bad.tla"
    bad.write_text("var x;\nx = y;\n")
    r = run_cli("verify", str(bad))
    assert r.returncode == 3
    assert "bad.tla:2:" in r.stderr  # file:line:col diagnostic


def test_dump_options(tmp_path):
    smtdir = tmp_path / "smt"
    r = run_cli("verify", bench("period4"), "--dump-cfg", "--dump-tiles",
                "--dump-candidates", "--dump-smt", str(smtdir),
                "--strict-tiles")
    assert r.returncode == 0
    assert "digraph cfg {" in r.stdout
    assert "tile head(i_l)->head(i_l) volArray: 4 * i_l <= j < 4 * i_l + 4" in r.stdout
    files = sorted(os.listdir(smtdir))
    assert files and all(f.endswith(".smt2") for f in files)
    assert any("period4" in f for f in files)


def test_trace_out(tmp_path):
    out = tmp_path / "traces.jsonl"
    r = run_cli("verify", bench("copy"), "--trace-out", str(out), "--seed", "103")
    assert r.returncode == 0
    lines = [json.loads(ln) for ln in out.read_text().splitlines()]
    assert lines
    assert set(lines[0]) == {"cutpoint", "run", "values"}


def test_missing_solver_is_config_error(tmp_path):
    r = run_cli("verify", bench("init"), "--solver", "/does/not/exist")
    assert r.returncode == 3
    assert "solver" in r.stderr
