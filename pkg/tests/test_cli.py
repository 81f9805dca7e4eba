import math

import numpy as np
import pytest

from doublewell.cli import (
    _COMMAND_KEYS,
    RunConfig,
    main,
    parse_config_text,
)
from doublewell.model import PotentialParams, deterministic_flow


def run_cli(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


class TestConfigRoundTrip:
    @pytest.mark.parametrize("command", sorted(_COMMAND_KEYS))
    def test_defaults_round_trip(self, command):
        values = {k.name: k.default for k in _COMMAND_KEYS[command]}
        cfg = RunConfig(command, values)
        assert parse_config_text(command, cfg.to_text()) == values

    def test_awkward_floats_round_trip(self):
        values = {k.name: k.default for k in _COMMAND_KEYS["simulate"]}
        values["dt"] = 0.1 + 0.2  # 0.30000000000000004
        values["x0"] = math.sqrt(2.0)
        values["t_max"] = 1e-7
        cfg = RunConfig("simulate", values)
        back = parse_config_text("simulate", cfg.to_text())
        assert back["dt"] == values["dt"]
        assert back["x0"] == values["x0"]
        assert back["t_max"] == values["t_max"]

    def test_float_lists_round_trip(self):
        values = {k.name: k.default for k in _COMMAND_KEYS["classify"]}
        values["sigma_coeffs"] = (0.1, -2.0, 1.0 / 3.0)
        back = parse_config_text("classify", RunConfig("classify", values).to_text())
        assert back["sigma_coeffs"] == values["sigma_coeffs"]

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            parse_config_text("simulate", "no_such_key = 1\n")

    def test_comments_and_blanks(self):
        parsed = parse_config_text("simulate", "# comment\n\nx0 = 2.0\n")
        assert parsed == {"x0": 2.0}


class TestHelp:
    @pytest.mark.parametrize("command", sorted(_COMMAND_KEYS))
    def test_lists_every_key(self, command, capsys):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for key in _COMMAND_KEYS[command]:
            assert f"--{key.name}" in out
        for flag in ("--config", "--out", "--seed", "--parallelism"):
            assert flag in out


class TestExitCodes:
    def test_config_error_is_one(self, capsys, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("definitely_not_a_key = 1\n")
        rc, _, err = run_cli(capsys, "simulate", "--config", str(bad))
        assert rc == 1
        assert "config error" in err

    def test_bad_value_is_one(self, capsys):
        rc, _, err = run_cli(capsys, "simulate", "--dt", "zero")
        assert rc == 1

    def test_invalid_precondition_is_one(self, capsys):
        # cubic-growth sigma violates the admissibility margin
        rc, _, err = run_cli(
            capsys, "simulate", "--sigma", "polynomial", "--sigma_coeffs", "0,0,0,1"
        )
        assert rc == 1

    def test_inconclusive_is_two(self, capsys):
        rc, out, _ = run_cli(
            capsys, "classify", "--sigma", "oscillatory",
            "--sigma_lo", "1", "--sigma_hi", "2", "--x_e", "0",
        )
        assert rc == 2
        assert "case=Inconclusive" in out

    def test_definitive_is_zero(self, capsys):
        rc, out, _ = run_cli(
            capsys, "classify", "--sigma", "linear",
            "--sigma_root", "0", "--sigma_slope", "2", "--x_e", "0",
        )
        assert rc == 0
        assert "case=AsymptoticallyStableInProb" in out


class TestSimulateCommand:
    def test_noise_free_matches_flow(self, capsys, tmp_path):
        rc, out, _ = run_cli(
            capsys, "simulate", "--sigma", "constant", "--sigma_value", "0",
            "--x0", "0.5", "--t_max", "5", "--out", str(tmp_path),
        )
        assert rc == 0
        terminal = float([ln for ln in out.splitlines() if ln.startswith("terminal=")][0]
                         .split("=")[1])
        exact = deterministic_flow(PotentialParams(), 0.5, 5.0)
        assert abs(terminal - exact) <= 5e-3
        assert (tmp_path / "trajectory.csv").exists()

    def test_constant_path_at_degenerate_root(self, capsys, tmp_path):
        rc, out, _ = run_cli(
            capsys, "simulate", "--sigma", "linear", "--sigma_root", "1",
            "--sigma_slope", "0.5", "--x0", "1", "--t_max", "1",
            "--out", str(tmp_path),
        )
        assert rc == 0
        assert "terminal=1\n" in out

    def test_seeded_reproducibility(self, capsys, tmp_path):
        args = ("simulate", "--x0", "0.5", "--t_max", "1", "--seed", "7")
        rc1, out1, _ = run_cli(capsys, *args, "--out", str(tmp_path / "a"))
        rc2, out2, _ = run_cli(capsys, *args, "--out", str(tmp_path / "b"))
        assert rc1 == rc2 == 0
        b1 = (tmp_path / "a" / "trajectory.csv").read_bytes()
        b2 = (tmp_path / "b" / "trajectory.csv").read_bytes()
        assert b1 == b2
        rc3, _, _ = run_cli(capsys, *args[:-1], "11", "--out", str(tmp_path / "c"))
        b3 = (tmp_path / "c" / "trajectory.csv").read_bytes()
        assert b3 != b1

    def test_stop_metadata(self, capsys, tmp_path):
        rc, out, _ = run_cli(
            capsys, "simulate", "--sigma", "constant", "--sigma_value", "0",
            "--x0", "0.3", "--t_max", "10", "--rule", "exit-annulus",
            "--rule_center", "0", "--rule_r1", "0.1", "--rule_r2", "0.5",
            "--out", str(tmp_path),
        )
        assert rc == 0
        assert "stopped=yes" in out
        assert "rule_triggered=exit-annulus" in out


class TestByteIdenticalReruns:
    def test_exit_time_parallelism_invariance(self, capsys, tmp_path):
        base = (
            "exit-time", "--mode", "annulus", "--x0", "0.3", "--n_paths", "40",
            "--t_max", "50", "--seed", "3",
        )
        rc1, out1, _ = run_cli(capsys, *base, "--parallelism", "1",
                               "--out", str(tmp_path / "p1"))
        rc2, out2, _ = run_cli(capsys, *base, "--parallelism", "3",
                               "--out", str(tmp_path / "p3"))
        assert rc1 == rc2 == 0
        a = (tmp_path / "p1" / "exit_times.csv").read_bytes()
        b = (tmp_path / "p3" / "exit_times.csv").read_bytes()
        assert a == b
        assert out1.replace("p1", "X") == out2.replace("p3", "X")

    def test_invariant_rerun(self, capsys, tmp_path):
        base = ("invariant", "--t_max", "50", "--seed", "5", "--bins_n", "40")
        rc1, out1, _ = run_cli(capsys, *base, "--out", str(tmp_path / "a"))
        rc2, out2, _ = run_cli(capsys, *base, "--out", str(tmp_path / "b"))
        assert rc1 == rc2 == 0
        assert (tmp_path / "a" / "histogram.csv").read_bytes() == \
            (tmp_path / "b" / "histogram.csv").read_bytes()


class TestEnvelopeCommand:
    def test_linear_rate(self, capsys, tmp_path):
        rc, out, _ = run_cli(
            capsys, "envelope", "--rate", "linear", "--rate_r", "1",
            "--c", "2", "--v0", "0.5", "--t_lo", "0.5", "--t_hi", "20",
            "--t_n", "40", "--out", str(tmp_path),
        )
        assert rc == 0
        fitted = float([ln for ln in out.splitlines()
                        if ln.startswith("fitted_rate=")][0].split("=")[1])
        assert fitted == pytest.approx(2.0, rel=0.01)
        assert "diverges_at_zero=yes" in out

    def test_power_rate_has_no_global_envelope(self, capsys, tmp_path):
        rc, _, err = run_cli(
            capsys, "envelope", "--rate", "power", "--rate_gamma", "0.5",
            "--out", str(tmp_path),
        )
        assert rc == 1
        assert "onto" in err.lower() or "diverg" in err.lower()


class TestDecayRateCommand:
    def test_report(self, capsys):
        rc, out, _ = run_cli(
            capsys, "decay-rate", "--sigma", "linear", "--sigma_root", "1",
            "--sigma_slope", "1", "--x_e", "1", "--alpha", "2",
        )
        assert rc == 0
        assert "c=3\n" in out
        assert "certificate=yes" in out

    def test_config_file_with_overrides(self, capsys, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text(
            "sigma = linear\nsigma_root = 1.0\nsigma_slope = 0.5\nx_e = 1.0\n"
            "alpha = 1.0\n"
        )
        rc, out, _ = run_cli(capsys, "decay-rate", "--config", str(cfgfile))
        assert rc == 0 and "c=2\n" in out
        rc2, out2, _ = run_cli(
            capsys, "decay-rate", "--config", str(cfgfile), "--alpha", "2"
        )
        assert rc2 == 0 and "c=3.75" in out2
