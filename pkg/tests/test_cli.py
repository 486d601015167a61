# -*- coding: utf-8 -*-
# tests/test_cli.py
"""
Tests for chuk_metastable.cli: argument handling, artifacts and exit codes.
"""

import json

import pytest

from chuk_metastable.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, build_parser, config_from_args, main
from chuk_metastable.exceptions import ChainValidationError, NonConvergenceError
from chuk_metastable.types import Subcommand

# θ_n = n²/(n+2): far from a monomial for n near 1
BENT_FAMILY = {
    "states": ["x", "t", "y"],
    "edges": [
        {"from": "x", "to": "t", "coeff": 1.0, "exponent": 1},
        {"from": "t", "to": "x", "coeff": 1.0, "exponent": 0},
        {"from": "t", "to": "y", "coeff": 1.0, "exponent": 0},
        {"from": "y", "to": "t", "coeff": 1.0, "exponent": 1},
        {"from": "x", "to": "y", "coeff": 1.0, "exponent": 2},
        {"from": "y", "to": "x", "coeff": 1.0, "exponent": 2},
    ],
}


def run_json(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    assert code == EXIT_OK, captured.err
    return json.loads(captured.out)


class TestParsing:
    """Test argument parsing and RunConfig construction."""

    def test_defaults_from_environment(self, clean_env, monkeypatch):
        monkeypatch.setenv("METASTABLE_N_GRID", "4:10")
        config = config_from_args(build_parser().parse_args(["analyze", "rm5"]))
        assert config.subcommand == Subcommand.ANALYZE
        assert (config.grid_start, config.grid_end) == (4, 10)

    def test_flag_beats_environment(self, clean_env, monkeypatch):
        monkeypatch.setenv("METASTABLE_N_GRID", "4:10")
        config = config_from_args(build_parser().parse_args(["analyze", "rm5", "--n-grid", "6:12"]))
        assert config.grid_end == 12

    def test_measure_and_tolerance(self):
        args = build_parser().parse_args(
            ["rate", "c3", "--mu", "0.5,0.25,0.25", "--tol", "mixture=1e-6"]
        )
        config = config_from_args(args)
        assert config.measure == [0.5, 0.25, 0.25]
        assert config.tolerances == {"mixture": 1e-6}

    def test_unknown_tolerance(self):
        args = build_parser().parse_args(["rate", "c3", "--mu", "1,0,0", "--tol", "speed=1"])
        with pytest.raises(ChainValidationError) as exc_info:
            config_from_args(args)
        assert "speed" in str(exc_info.value)

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_mu_and_measure_are_exclusive(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["rate", "c3", "--mu", "1,0,0", "--measure", "m.json"])


class TestRate:
    """Test the rate subcommand."""

    def test_cycle_value(self, capsys):
        document = run_json(capsys, ["rate", "c3", "--mu", "0.5,0.25,0.25"])
        assert document["dv"] == pytest.approx(0.055060, abs=1e-6)
        assert document["bfg"] is None
        assert set(document["tilt"]) == {"a", "b", "c"}
        assert len(document["optimal_current"]) == 3

    def test_boundary_measure_has_no_tilt(self, capsys):
        document = run_json(capsys, ["rate", "c3", "--mu", "1,0,0"])
        assert document["dv"] == pytest.approx(1.0)
        assert document["tilt"] is None

    def test_reducible_chain_has_no_tilt(self, capsys):
        document = run_json(capsys, ["rate", "ex02_ab", "--n", "1", "--mu", "0.2,0.4,0.4"])
        assert document["tilt"] is None
        assert document["optimal_current"] is None

    def test_tilt_failure_is_numerical(self, capsys, monkeypatch):
        import chuk_metastable.cli as cli

        def stalled(chain, mu):
            raise NonConvergenceError("tilt Newton did not converge")

        monkeypatch.setattr(cli, "tilt_solver", stalled)
        assert main(["rate", "c3", "--mu", "0.5,0.25,0.25"]) == EXIT_NUMERICAL
        assert "NonConvergenceError" in capsys.readouterr().err

    def test_flow_file(self, capsys, tmp_path):
        flow = tmp_path / "J.json"
        flow.write_text(json.dumps([{"from": "a", "to": "b", "value": 1.0}]))
        document = run_json(capsys, ["rate", "c3", "--mu", "0.5,0.25,0.25", "--flow", str(flow)])
        assert document["bfg"] == "inf"

    def test_family_needs_n(self, capsys):
        assert main(["rate", "rm5", "--mu", "1,0,0,0,0,0,0"]) == EXIT_INVALID
        assert "depend on n" in capsys.readouterr().err

    def test_malformed_chain_file(self, capsys, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{ nope")
        assert main(["rate", str(path), "--mu", "1"]) == EXIT_INVALID
        assert "ChainValidationError" in capsys.readouterr().err

    def test_unknown_example(self, capsys):
        assert main(["rate", "no_such_chain", "--mu", "1"]) == EXIT_INVALID

    def test_output_file(self, tmp_path):
        out = tmp_path / "rate.json"
        assert main(["rate", "c3", "--mu", "0.5,0.25,0.25", "--output", str(out)]) == EXIT_OK
        assert json.loads(out.read_text())["dv"] == pytest.approx(0.055060, abs=1e-6)


class TestAnalyzeAndGamma:
    """Test the hierarchy and probe subcommands."""

    def test_analyze_rm5(self, capsys):
        document = run_json(capsys, ["analyze", "rm5", "--n-grid", "6:12"])
        assert document["depth"] == 1
        assert document["exponents"][0] == pytest.approx(2.0, abs=0.02)

    def test_analyze_diagnostics(self, capsys):
        document = run_json(capsys, ["analyze", "rm5", "--n-grid", "6:12", "--diagnostics"])
        assert document["diagnostics"]["transient_mass_vanishes"] is True
        assert document["lumpability"][0]["within_tolerance"] is True

    def test_analyze_numerical_failure(self, capsys, tmp_path):
        path = tmp_path / "bent.json"
        path.write_text(json.dumps(BENT_FAMILY))
        assert main(["analyze", str(path), "--n-grid", "0:6"]) == EXIT_NUMERICAL
        assert "DegenerateFitError" in capsys.readouterr().err

    def test_gamma_csv(self, capsys):
        code = main(["gamma", "rm5", "--level", "1", "--omega", "0.25,0.75", "--n-grid", "6:12"])
        lines = capsys.readouterr().out.splitlines()
        assert code == EXIT_OK
        assert lines[0] == "n,theta,value,target"
        assert len(lines) == 8

    def test_gamma_json(self, capsys):
        document = run_json(
            capsys, ["gamma", "rm5", "--omega", "0.5,0.5", "--n-grid", "6:12", "--json"]
        )
        assert document["level"] == 1
        assert document["candidate"] == "harmonic"

    def test_gamma_level_zero(self, capsys):
        code = main(["gamma", "rm5", "--level", "0", "--mu", "0,0,1,0,0,0,0", "--n-grid", "6:12"])
        lines = capsys.readouterr().out.splitlines()
        assert code == EXIT_OK
        assert lines[0] == "n,value,target"

    def test_gamma_needs_omega(self, capsys):
        assert main(["gamma", "rm5", "--n-grid", "6:12"]) == EXIT_INVALID


class TestOtherSubcommands:
    """Test deriv, recover, simulate and examples."""

    def test_deriv(self, capsys):
        document = run_json(capsys, ["deriv", "two_state", "--mu", "0.5,0.5", "--nu", "1,-1"])
        assert document["second_derivative"] == pytest.approx(4.0, abs=1e-8)
        assert document["first_derivative"] == pytest.approx(0.0, abs=1e-10)

    def test_deriv_needs_direction(self, capsys):
        assert main(["deriv", "two_state", "--mu", "0.5,0.5"]) == EXIT_INVALID

    def test_recover_dv_with_recording(self, capsys, tmp_path):
        document = run_json(
            capsys,
            ["recover", "two_state", "--mode", "dv", "--samples", "5", "--record", str(tmp_path / "t")],
        )
        assert document["report"]["consistent"] is True
        assert (tmp_path / "t" / "oracle.json").is_file()

        replay = run_json(
            capsys,
            ["recover", "--oracle-dir", str(tmp_path / "t"), "--mode", "dv", "--samples", "1"],
        )
        assert replay["recovered"]["states"] == ["x", "y"]

    def test_recover_needs_chain_or_table(self, capsys):
        assert main(["recover", "--mode", "bfg"]) == EXIT_INVALID

    def test_simulate_csv(self, capsys, tmp_path):
        csv_path = tmp_path / "sim.csv"
        document = run_json(
            capsys,
            ["simulate", "c3", "--t", "10", "--replicas", "3", "--seed", "1", "--csv", str(csv_path)],
        )
        assert len(document["replicas"]) == 3
        assert csv_path.read_text().splitlines()[0] == "replica,start,jumps,L_a,L_b,L_c"

    def test_simulate_variance(self, capsys):
        document = run_json(
            capsys,
            ["simulate", "two_state", "--t", "5", "--replicas", "4", "--seed", "2", "--observable", "0.5,-0.5"],
        )
        assert document["variance"]["replicas"] == 4

    def test_examples(self, capsys, clean_env, monkeypatch):
        monkeypatch.delenv("METASTABLE_EXAMPLES_DIR", raising=False)
        assert main(["examples"]) == EXIT_OK
        assert "rm5" in capsys.readouterr().out.splitlines()
