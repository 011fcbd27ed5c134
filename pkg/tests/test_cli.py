"""CLI front end: config handling, exit codes, deterministic outputs."""

import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "evtlab.cli", *args],
                          capture_output=True, text=True, cwd=cwd or ROOT)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


PATTERN_CFG = os.path.join(CONFIGS, "pattern_3x.toml")
NONPER_CFG = os.path.join(CONFIGS, "nonperiodic_sqrt2.toml")


def test_analytic_output(tmp_path):
    r = run_cli("analytic", NONPER_CFG, "--out", str(tmp_path))
    assert r.returncode == 0, r.stderr
    payload = json.loads((tmp_path / "analytic.json").read_text())
    assert payload["theta"] == "7/8"
    assert payload["pi"][:3] == ["6/7", "1/7", "0"]
    assert payload["mean_cluster_size"] == "8/7"
    assert len(payload["config_sha256"]) == 64


def test_simulate_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    r1 = run_cli("simulate", PATTERN_CFG, "--out", str(a))
    r2 = run_cli("simulate", PATTERN_CFG, "--out", str(b))
    assert r1.returncode == 0 and r2.returncode == 0
    for name in ("series.csv", "clusters.csv", "stats.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_override_changes_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli("simulate", PATTERN_CFG, "--out", str(a))
    run_cli("simulate", PATTERN_CFG, "--out", str(b), "--seed", "1")
    assert (a / "series.csv").read_bytes() != (b / "series.csv").read_bytes()
    assert json.loads((b / "stats.json").read_text())["seed"] == 1


def test_stats_reproducible_from_series(tmp_path):
    """Single-orbit run: recompute the estimators from series.csv alone."""
    r = run_cli("simulate", PATTERN_CFG, "--out", str(tmp_path))
    assert r.returncode == 0
    stats = json.loads((tmp_path / "stats.json").read_text())
    rows = [ln.split(",") for ln in
            (tmp_path / "series.csv").read_text().splitlines()[1:]]
    exceed = np.array([int(r[3]) for r in rows])
    times = np.nonzero(exceed)[0]
    n, q = stats["n"], stats["q"]
    assert times.size == stats["n_exceedances"]
    is_end = np.concatenate([np.diff(times) > q, [True]])
    observable = times <= n - 1 - q
    theta = (is_end & observable).sum() / observable.sum()
    assert math.isclose(theta, stats["theta_hat"], rel_tol=1e-12)
    breaks = np.nonzero(np.diff(times) > q)[0]
    assert breaks.size + 1 == stats["n_clusters"]


def test_bad_config_exit_1(tmp_path):
    cfg = write(tmp_path, "bad.toml", "[map]\nkind = 'affine'\nslope = 2\n")
    assert run_cli("analytic", cfg).returncode == 1          # missing observable
    cfg = write(tmp_path, "bad2.toml", "[map]\nkind = 'affine'\nslope = 2\n"
                "[observable]\nzeta = '1/31'\nperiodic = 5\nbogus = 1\n"
                "[[observable.points]]\nm = 0\nshape = { kind = 'neglog' }\n")
    r = run_cli("analytic", cfg)
    assert r.returncode == 1 and "bogus" in r.stderr          # unknown key
    cfg = write(tmp_path, "bad3.toml", "[map]\nkind = 'affine'\nslope = 2\n"
                "[observable]\nzeta = 0.25\n"
                "[[observable.points]]\nm = 0\nshape = { kind = 'neglog' }\n")
    assert run_cli("analytic", cfg).returncode == 1           # float position


def test_indeterminate_exit_2(tmp_path):
    # multi-point correlated spec on the intermittent map: pullback slopes
    # are irrational, so no exact limit exists
    cfg = write(tmp_path, "ind.toml", """
[map]
kind = "lsv"
alpha = 0.4
[observable]
zeta = "5/8"
correlated = true
eps_bar = "1/64"
[[observable.points]]
m = 0
shape = { kind = "neglog" }
[[observable.points]]
m = 1
shape = { kind = "neglog" }
""")
    assert run_cli("analytic", cfg).returncode == 2


def test_regime_exit_4(tmp_path):
    # tau/n larger than the measure of the valid level range
    cfg = write(tmp_path, "reg.toml", """
[map]
kind = "affine"
slope = 2
[observable]
zeta = "1/31"
correlated = true
periodic = 5
[[observable.points]]
m = 0
shape = { kind = "neglog" }
[run]
n = 10
tau = 100
orbits = 1
seed = 1
""")
    assert run_cli("simulate", cfg).returncode == 4


def test_qselect_output(tmp_path):
    r = run_cli("qselect", NONPER_CFG, "--out", str(tmp_path),
                "--levels", "10,100,1000")
    assert r.returncode == 0
    payload = json.loads((tmp_path / "qselect.json").read_text())
    assert payload["q"] == 3
    rs = [r for _, r in payload["return_times"]]
    assert rs == sorted(rs) and rs[0] < rs[-1]


def test_tails_output(tmp_path):
    r = run_cli("tails", NONPER_CFG, "--out", str(tmp_path))
    assert r.returncode == 0
    payload = json.loads((tmp_path / "tails.json").read_text())
    assert payload["winner"]["family"] == "frechet"
    assert payload["winner"]["index"] == "2"


def test_oracle_output(tmp_path):
    r = run_cli("oracle", NONPER_CFG, "--out", str(tmp_path),
                "--levels", "15,20,25")
    assert r.returncode == 0
    payload = json.loads((tmp_path / "oracle.json").read_text())
    assert abs(payload["theta_n"][-1] - 7 / 8) < 1e-3
