"""End-to-end tests for the ``qsp`` command through ``harness.cli.main``."""

from __future__ import annotations

import json

import pytest

from harness.cli import build_parser, main
from qsp.defaults import (
    ENV_DEFAULT_TOL,
    EXIT_CHECK_FAILED,
    EXIT_CONFIG_ERROR,
    EXIT_INTERNAL_ERROR,
    EXIT_OK,
)

M1 = {"family": "m1", "params": {"g": "0.5", "u11": "0.25", "u21": "0.25"}}


@pytest.fixture(autouse=True)
def _no_env_tol(monkeypatch):
    monkeypatch.delenv(ENV_DEFAULT_TOL, raising=False)


@pytest.fixture
def write_config(tmp_path):
    def _write(data: dict, name: str = "cfg.json") -> str:
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return _write


class TestParser:
    def test_no_command_prints_help(self, capsys):
        assert main([]) == EXIT_OK
        assert "Exit codes" in capsys.readouterr().out

    def test_subcommands(self):
        parser = build_parser()
        args = parser.parse_args(["eval", "--config", "c.json", "--s", "0", "--t", "1"])
        assert (args.command, args.s, args.t, args.out) == ("eval", 0.0, 1.0, None)

    def test_verify_requires_config(self):
        with pytest.raises(SystemExit):
            main(["verify"])


def test_list(capsys):
    assert main(["list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("family")
    assert "twin_c(alpha0, beta0, cutoff:number)" in out


class TestVerify:
    def test_passes(self, write_config, tmp_path, capsys):
        report = tmp_path / "report.json"
        path = write_config({**M1, "output": {"report": str(report)}})
        assert main(["verify", "--config", path, "--no-color"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "Verdict: PASS" in out
        assert "kce:m1" in out
        assert json.loads(report.read_text(encoding="utf-8"))["passed"] is True

    def test_quiet_prints_only_verdict(self, write_config, capsys):
        assert main(["verify", "--config", write_config(M1), "--quiet"]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "Verdict: PASS"

    def test_tolerance_precedence(self, write_config, tmp_path, monkeypatch):
        report = tmp_path / "report.json"
        path = write_config({**M1, "output": {"report": str(report)}})
        monkeypatch.setenv(ENV_DEFAULT_TOL, "1e-6")
        assert main(["verify", "--config", path, "--quiet"]) == EXIT_OK
        assert json.loads(report.read_text(encoding="utf-8"))["tolerances"]["kce_tol"] == 1e-6
        assert main(["verify", "--config", path, "--quiet", "--tol", "1e-3"]) == EXIT_OK
        assert json.loads(report.read_text(encoding="utf-8"))["tolerances"]["kce_tol"] == 1e-3

    def test_bad_env_tolerance(self, write_config, monkeypatch):
        monkeypatch.setenv(ENV_DEFAULT_TOL, "tiny")
        assert main(["verify", "--config", write_config(M1), "--quiet"]) == EXIT_CONFIG_ERROR

    def test_strict_twin(self, write_config, tmp_path, capsys):
        report = tmp_path / "report.json"
        path = write_config({
            "family": "twin_b",
            "params": {"phi": "1/(1+t)", "alpha": "0.3", "beta": "0.3", "b": "0.01"},
            "output": {"report": str(report)},
        })
        assert main(["verify", "--config", path, "--quiet"]) == EXIT_OK
        assert "W401" in capsys.readouterr().err
        assert main(["verify", "--config", path, "--quiet", "--strict"]) == EXIT_CHECK_FAILED
        assert json.loads(report.read_text(encoding="utf-8"))["error"]["code"] == "E401"

    def test_events_file(self, write_config, tmp_path):
        events = tmp_path / "logs" / "events.jsonl"
        assert main(["verify", "--config", write_config(M1), "--quiet", "--events", str(events)]) == EXIT_OK
        types = [json.loads(line)["type"] for line in events.read_text(encoding="utf-8").splitlines()]
        assert types[0] == "run_start"
        assert types[-1] == "run_end"


class TestConfigErrors:
    def test_missing_config(self, tmp_path, capsys):
        assert main(["verify", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG_ERROR
        assert "not found" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("not json", encoding="utf-8")
        assert main(["verify", "--config", str(path)]) == EXIT_CONFIG_ERROR

    def test_unknown_family(self, write_config, capsys):
        assert main(["verify", "--config", write_config({"family": "m9"})]) == EXIT_CONFIG_ERROR
        assert "unknown family 'm9'" in capsys.readouterr().err

    def test_expression_error_reports_position(self, write_config, capsys):
        path = write_config({"family": "m1", "params": {"g": "0.5*(", "u11": "0", "u21": "0"}})
        assert main(["verify", "--config", path]) == EXIT_CONFIG_ERROR
        assert "at position 5" in capsys.readouterr().err

    def test_square_family_has_no_matrix(self, write_config, tmp_path):
        path = write_config({"family": "q2", "params": {"psi": "exp(-t)"}})
        args = ["eval", "--config", path, "--s", "0", "--t", "1", "--out", str(tmp_path / "m.json")]
        assert main(args) == EXIT_CONFIG_ERROR

    def test_reversed_times(self, write_config, tmp_path):
        args = ["eval", "--config", write_config(M1), "--s", "2", "--t", "1", "--out", str(tmp_path / "m.json")]
        assert main(args) == EXIT_CONFIG_ERROR


class TestConstructionFailure:
    def test_claim_violation_in_simulate(self, write_config, tmp_path, capsys):
        path = write_config({
            "family": "m1",
            "params": {"g": "1.5", "u11": "0", "u21": "0"},
            "simulation": {"x0": [0.5, 0.5], "times": [1.0]},
        })
        assert main(["simulate", "--config", path, "--out", str(tmp_path / "x.csv")]) == EXIT_CHECK_FAILED
        assert "E101" in capsys.readouterr().err


class TestSimulateAndEval:
    def test_simulate(self, write_config, tmp_path):
        out = tmp_path / "traj.csv"
        path = write_config({
            "family": "twin_a",
            "simulation": {"x0": [0.2, 0.5, 0.3], "times": [1.0, 2.0]},
            "output": {"trajectory": str(out)},
        })
        assert main(["simulate", "--config", path, "--quiet"]) == EXIT_OK
        assert out.read_text(encoding="utf-8").splitlines()[1:] == ["1,1,0,0", "2,1,0,0"]

    def test_simulate_without_block(self, write_config, tmp_path):
        path = write_config(M1)
        assert main(["simulate", "--config", path, "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG_ERROR

    def test_eval_text(self, write_config, tmp_path):
        out = tmp_path / "m.txt"
        path = write_config({**M1, "output": {"matrix": str(out), "matrix_format": "text"}})
        assert main(["eval", "--config", path, "--s", "0", "--t", "1", "--quiet"]) == EXIT_OK
        assert out.read_text(encoding="utf-8") == "2\n0.25 0.25\n0.25 0.25\n0.25 0.25\n0.25 0.25\n"

    def test_evaluation_error(self, write_config, tmp_path, capsys):
        path = write_config({"family": "m1", "params": {"g": "0.5", "u11": "0.25 + 0*exp(t)", "u21": "0.25"}})
        args = ["eval", "--config", path, "--s", "800", "--t", "900", "--out", str(tmp_path / "m.json")]
        assert main(args) == EXIT_INTERNAL_ERROR
        assert "evaluation failed" in capsys.readouterr().err
