import json
import logging
import subprocess
import sys

import numpy as np
import pytest

from zkblowup import cli
from zkblowup.cli import run

GRID = "128,128,16,16"


def _report(out, name):
    return json.loads((out / f"{name}.json").read_text())


def test_theta_report(tmp_path):
    assert run(["--out", str(tmp_path), "--grid", GRID, "theta"]) == 0
    rep = _report(tmp_path, "theta")
    assert {"theta", "grid", "B", "tolerances", "version"} <= set(rep)
    assert rep["grid"] == {"n1": 128, "n2": 128, "half_width1": 16.0, "half_width2": 16.0}
    assert 1.5 < rep["theta"] < 1.8


def test_rerun_is_byte_identical(tmp_path):
    args = ["--out", str(tmp_path), "--grid", GRID, "theta"]
    assert run(args) == 0
    first = (tmp_path / "theta.json").read_bytes()
    assert run(args) == 0
    assert (tmp_path / "theta.json").read_bytes() == first


def test_cache_hit_and_invalidation(tmp_path, caplog):
    caplog.set_level(logging.INFO, logger="zkblowup")
    assert run(["--out", str(tmp_path), "--grid", GRID, "theta"]) == 0
    cached = sorted((tmp_path / "cache").glob("Q-*.zkf"))
    assert len(cached) == 1
    stamp = cached[0].stat().st_mtime_ns
    caplog.clear()
    assert run(["--out", str(tmp_path), "--grid", GRID, "theta"]) == 0
    assert any("cache hit" in r.message for r in caplog.records)
    assert cached[0].stat().st_mtime_ns == stamp
    assert run(["--out", str(tmp_path), "--grid", "128,128,16,17", "theta"]) == 0
    assert len(list((tmp_path / "cache").glob("Q-*.zkf"))) == 2


def test_corrupted_cache_is_recomputed(tmp_path, caplog):
    assert run(["--out", str(tmp_path), "--grid", GRID, "theta"]) == 0
    th = _report(tmp_path, "theta")["theta"]
    dump = next((tmp_path / "cache").glob("Q-*.zkf"))
    raw = bytearray(dump.read_bytes())
    raw[-8:] = b"\x00" * 8
    dump.write_bytes(bytes(raw))
    caplog.set_level(logging.WARNING, logger="zkblowup")
    assert run(["--out", str(tmp_path), "--grid", GRID, "theta"]) == 0
    assert any("checksum mismatch" in r.message for r in caplog.records)
    assert _report(tmp_path, "theta")["theta"] == th
    assert cli.ArtifactCache(tmp_path).lookup(dump)


def test_no_cache_flag(tmp_path):
    assert run(["--out", str(tmp_path), "--no-cache", "--grid", GRID, "theta"]) == 0
    assert not list((tmp_path / "cache").glob("*"))


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# settings\ngrid = {GRID}   # small\nout = {tmp_path / 'o'}\nunused-key = 3\n")
    assert cli.read_config(cfg) == {"grid": GRID, "out": str(tmp_path / "o"), "unused_key": "3"}
    assert run(["--config", str(cfg), "theta"]) == 0
    rep = _report(tmp_path / "o", "theta")
    assert rep["grid"]["n1"] == 128
    assert rep["config"] == {"grid": GRID, "unused_key": "3"}


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("grid = 64,64,12,12\n")
    assert run(["--config", str(cfg), "--out", str(tmp_path), "--grid", GRID, "theta"]) == 0
    assert _report(tmp_path, "theta")["grid"]["n1"] == 128


def test_environment_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("ZKBLOWUP_GRID", GRID)
    assert run(["--out", str(tmp_path), "theta"]) == 0
    assert _report(tmp_path, "theta")["grid"]["n1"] == 128


@pytest.mark.parametrize("argv", [
    ["--bogus"],
    ["--grid", "12,12", "theta"],
    ["--grid", "a,b,c,d", "theta"],
    ["--config", "/nonexistent/run.cfg", "theta"],
    ["ode", "--theta", "1.66"],
    ["ode", "--truncate-gamma", "--theta", "1.0"],
    ["ode", "--n", "10", "--s-end", "-20"],
    ["--threads", "zero", "theta"],
])
def test_usage_errors(tmp_path, argv):
    assert run(["--out", str(tmp_path)] + argv) == cli.EXIT_USAGE


def test_bad_config_line(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("grid 128\n")
    assert run(["--config", str(cfg), "--out", str(tmp_path), "theta"]) == cli.EXIT_USAGE


def test_failed_check_exit_code(tmp_path):
    assert run(["--out", str(tmp_path), "verify", "weights", "--B-list", "16"]) == cli.EXIT_CHECK
    rep = _report(tmp_path, "verify-weights")
    assert [k for k, v in rep["checks"].items() if not v] == ["B16:left_exponential_sandwich"]


def test_numerical_failure_exit_code(tmp_path):
    argv = ["--out", str(tmp_path), "--no-cache", "--grid", "64,64,12,12", "ground-state", "--tol", "1e-30"]
    assert run(argv) == cli.EXIT_NUMERIC


def test_truncated_ode(tmp_path):
    assert run(["--out", str(tmp_path), "ode", "--truncate-gamma", "--theta", "1.6614843541530675"]) == 0
    rep = _report(tmp_path, "ode")
    assert rep["results"]["special_solution_error"] <= 1e-8
    lines = (tmp_path / "ode.csv").read_text().splitlines()
    assert len(lines) == 401


def test_decompose_round_trip(tmp_path):
    assert run(["--out", str(tmp_path), "--grid", GRID, "decompose"]) == 0
    rep = _report(tmp_path, "decompose")
    assert rep["results"]["parameter_error"] <= 1e-8
    assert (tmp_path / "eps.zkf").exists()


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "zkblowup.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("ground-state", "spectrum", "theta", "profile", "ode", "simulate", "decompose", "verify"):
        assert cmd in out.stdout
