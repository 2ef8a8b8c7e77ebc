"""Scenario parsing, validation, dispatch artifacts, CLI determinism."""

import filecmp
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from driftwell.cli import main as cli_main
from driftwell.io import read_csv
from driftwell.scenario import ScenarioError, dispatch, parse_scenario, render_effective

SMALL_FP = """
[scenario]
model = fp
name = tiny

[potential]
name = quartic

[constraint]
kind = linear
c0 = -1.2
c1 = 0.5
t0 = 0.0
t_end = 0.1

[params]
nu = 0.1
tau = 0.1

[grid]
x_lo = -3.5
x_hi = 3.5
n_cells = 384

[output]
n_obs = 21
snapshot_times = 0.05
"""


class TestParsing:
    def test_preset_fig2_parses(self):
        from driftwell.cli import _preset_text

        sc = parse_scenario(_preset_text("fig2"))
        assert sc.model == "fp"
        assert sc.potential_name == "arctan"
        assert sc.c0 == -4.0 and sc.c1 == 1.0
        assert sc.t_end == 8.0

    def test_missing_nu_rejected(self):
        text = SMALL_FP.replace("nu = 0.1\n", "")
        with pytest.raises(ScenarioError, match="params.nu"):
            parse_scenario(text)

    def test_unknown_model_rejected(self):
        with pytest.raises(ScenarioError, match="scenario.model"):
            parse_scenario(SMALL_FP.replace("model = fp", "model = magic"))

    def test_defaults_echo_applies_grid_rule(self):
        text = SMALL_FP.replace("[grid]\nx_lo = -3.5\nx_hi = 3.5\nn_cells = 384\n", "")
        sc = parse_scenario(text)
        assert "[grid]" in sc.effective
        # resolved resolution obeys dx <= nu/4
        echoed = parse_scenario(sc.effective)
        span = echoed.grid["x_hi"] - echoed.grid["x_lo"]
        assert span / echoed.grid["n_cells"] <= 0.1 / 4.0 + 1e-15

    def test_round_trip_fixed_point(self):
        sc = parse_scenario(SMALL_FP)
        again = parse_scenario(sc.effective)
        assert render_effective(again) == sc.effective
        assert again.model == sc.model
        assert again.params == sc.params


class TestDispatch:
    def test_fp_artifacts(self, tmp_path):
        sc = parse_scenario(SMALL_FP)
        summary = dispatch(sc, tmp_path)
        assert (tmp_path / "series.csv").exists()
        assert (tmp_path / "meta.json").exists()
        assert (tmp_path / "hprime.csv").exists()
        assert (tmp_path / "effective.cfg").exists()
        snaps = list((tmp_path / "snapshots").glob("snap_*.csv"))
        assert len(snaps) == 1
        data = read_csv(tmp_path / "series.csv")
        assert list(data) == ["t", "ell", "sigma", "y", "m_minus", "m_plus",
                              "E", "S", "D", "width"]
        assert np.max(np.abs(data["m_minus"] + data["m_plus"] - 1.0)) < 1e-10
        assert summary["steps"] > 0

    def test_determinism_byte_identical(self, tmp_path):
        sc = parse_scenario(SMALL_FP)
        dispatch(sc, tmp_path / "a")
        dispatch(sc, tmp_path / "b")
        for rel in ("series.csv", "meta.json", "hprime.csv", "effective.cfg"):
            assert filecmp.cmp(tmp_path / "a" / rel, tmp_path / "b" / rel,
                               shallow=False), rel

    def test_limit_dispatch(self, tmp_path):
        text = """
[scenario]
model = limit
[potential]
name = quartic
[constraint]
kind = linear
c0 = -1.5
c1 = 1.0
t_end = 3.0
[params]
a = 5.0
[output]
n_obs = 101
"""
        summary = dispatch(parse_scenario(text), tmp_path)
        assert (tmp_path / "trajectory.csv").exists()
        assert (tmp_path / "events.json").exists()
        assert summary["events"] == ["switching", "merging-continuous"]

    def test_qs_dispatch(self, tmp_path):
        text = "[scenario]\nmodel = qs\n[params]\nn_points = 51\n"
        dispatch(parse_scenario(text), tmp_path)
        data = read_csv(tmp_path / "qs.csv")
        assert len(data["ell"]) == 51
        mid = len(data["ell"]) // 2
        assert abs(data["psi"][mid]) < 1e-12


class TestCli:
    def test_classify_command(self, capsys):
        rc = cli_main(["classify", "--tau", "1e-22", "--nu", "0.1"])
        assert rc == 0
        assert "fast-III-Kramers" in capsys.readouterr().out

    def test_classify_open_refusal(self, capsys):
        rc = cli_main(["classify", "--tau", "1e-4", "--nu", "1e-12"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "OPEN" in out and "open problem" in out

    def test_verify_command(self, capsys):
        rc = cli_main(["verify-potential", "--potential", "quartic"])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.count("pass") == 3

    def test_tabulate_command(self, tmp_path, capsys):
        rc = cli_main(["tabulate-M", "--m1", "0.4:0.8:2", "--sigma",
                       "0.0:0.5:2", "--N", "200", "--out", str(tmp_path)])
        assert rc == 0
        data = read_csv(tmp_path / "mtable.csv")
        assert len(data["m1"]) == 4
        assert np.all(data["converged"] == 1.0)
        assert np.all(data["m12"] >= 0.0)
        assert np.all(data["m12"] <= data["m1"] + 1e-12)

    def test_run_requires_one_source(self, capsys):
        rc = cli_main(["run", "--out", "/tmp/driftwell-nowhere"])
        assert rc == 1

    def test_run_scenario_file(self, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(SMALL_FP)
        rc = cli_main(["run", "--scenario", str(cfg), "--out",
                       str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "series.csv").exists()

    def test_console_script_entry(self):
        proc = subprocess.run(
            [sys.executable, "-m", "driftwell.cli", "classify", "--tau",
             "1e-60", "--nu", "0.1"],
            capture_output=True, text=True, timeout=300)
        assert proc.returncode == 0
        assert "fast-IV" in proc.stdout


class TestFig2Preset:
    def test_full_transition_sweep(self, tmp_path):
        # arctan force law driven from ell = -4 to 4: all mass crosses over
        from driftwell.cli import _preset_text

        sc = parse_scenario(_preset_text("fig2"))
        summary = dispatch(sc, tmp_path)
        data = read_csv(tmp_path / "series.csv")
        assert data["m_minus"][0] > 0.98
        assert data["m_minus"][-1] < 0.02
        assert summary["m_minus_final"] < 0.02
        # state and phase curves are emitted through the documented columns
        assert {"t", "ell", "sigma", "y", "m_minus", "m_plus"} <= set(data)
        snaps = list((tmp_path / "snapshots").glob("snap_*.csv"))
        assert len(snaps) == 5


class TestBackendEquivalence:
    def test_numpy_fallback_matches_numba(self, tmp_path):
        # same tiny scenario on both backends; values agree to solver noise
        import os

        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(SMALL_FP)
        outs = {}
        for flag in ("0", "1"):
            out = tmp_path / f"out{flag}"
            env = dict(os.environ, DRIFTWELL_DISABLE_NUMBA=flag)
            proc = subprocess.run(
                [sys.executable, "-m", "driftwell.cli", "run", "--scenario",
                 str(cfg), "--out", str(out)],
                capture_output=True, text=True, timeout=560, env=env)
            assert proc.returncode == 0, proc.stderr
            outs[flag] = read_csv(out / "series.csv")
        for col in ("sigma", "m_minus", "E", "width"):
            assert np.max(np.abs(outs["0"][col] - outs["1"][col])) < 1e-11, col
