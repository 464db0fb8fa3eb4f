#!/usr/bin/env python3
"""
CLI tests for horizon-pmp commands
"""

import json
import tempfile
from pathlib import Path
from unittest.mock import patch

import pytest
from typer.testing import CliRunner

from horizon_pmp.bench import BenchRow
from horizon_pmp.cli import app
from horizon_pmp.export import read_csv

ZERO_PAYOFF = {"problem": {"base": "lqr1d", "payoff": "zero"}, "solver": {"grid_steps_per_unit_time": 10}}


@pytest.fixture
def runner():
    """Create CLI runner for testing"""
    return CliRunner()


@pytest.fixture
def workdir():
    with tempfile.TemporaryDirectory() as temp_dir:
        yield Path(temp_dir)


def write_config(directory: Path, **document) -> Path:
    path = directory / "run.json"
    path.write_text(json.dumps(document))
    return path


def invoke(runner, command, config, out):
    return runner.invoke(app, [command, "--config", str(config), "--out", str(out)])


class TestCLIBasics:
    """Help and version"""

    def test_help(self, runner):
        """Test that --help works"""
        result = runner.invoke(app, ["--help"])
        assert result.exit_code == 0
        for command in ("solve", "sweep", "diagnose", "bench", "version"):
            assert command in result.stdout

    def test_version(self, runner):
        result = runner.invoke(app, ["version"])
        assert result.exit_code == 0
        assert "0.1.0" in result.stdout

    def test_missing_config_file(self, runner, workdir):
        result = runner.invoke(app, ["solve", "--config", str(workdir / "nope.json"), "--out", str(workdir / "out")])
        assert result.exit_code == 1

    def test_unknown_problem(self, runner, workdir):
        config = write_config(workdir, problem="pendulum", horizons=[2])
        result = invoke(runner, "solve", config, workdir / "out")
        assert result.exit_code == 1
        assert "pendulum" in result.stdout


class TestSolveCommand:
    """solve writes extremal.csv"""

    def test_converged_solve(self, runner, workdir):
        config = write_config(workdir, horizons=[2], **ZERO_PAYOFF)
        out = workdir / "out"
        result = invoke(runner, "solve", config, out)

        assert result.exit_code == 0
        frame = read_csv(out / "extremal.csv")
        assert len(frame) == 21
        assert list(frame.columns) == ["t", "x1", "u1", "psi1", "H", "gap"]
        assert (frame["psi1"] == 0.0).all()
        assert (out / "logs" / "run.log").exists()

    def test_first_log_record_comes_from_the_solver(self, runner, workdir):
        config = write_config(workdir, horizons=[2], **ZERO_PAYOFF)
        out = workdir / "out"
        assert invoke(runner, "solve", config, out).exit_code == 0
        lines = (out / "logs" / "logs.jsonl").read_text().splitlines()
        assert json.loads(lines[0])["source"] == "sweep"

    def test_iteration_cap_exits_flagged(self, runner, workdir):
        config = write_config(
            workdir, problem="lqr1d", horizons=[2], solver={"grid_steps_per_unit_time": 10, "max_iters": 1}
        )
        result = invoke(runner, "solve", config, workdir / "out")
        assert result.exit_code == 2
        assert (workdir / "out" / "extremal.csv").exists()

    def test_relaxed_solve(self, runner, workdir):
        config = write_config(
            workdir, problem="absvalue", horizons=[1], relaxed=True,
            solver={"grid_steps_per_unit_time": 10, "max_iters": 5},
        )
        result = invoke(runner, "solve", config, workdir / "out")
        assert result.exit_code in (0, 2)
        frame = read_csv(workdir / "out" / "relaxed_extremal.csv")
        assert "n_atoms" in frame.columns

    def test_reruns_are_byte_identical(self, runner, workdir):
        config = write_config(workdir, problem="lqr1d", horizons=[2], solver={"grid_steps_per_unit_time": 10})
        first = invoke(runner, "solve", config, workdir / "a")
        second = invoke(runner, "solve", config, workdir / "b")
        assert first.exit_code == second.exit_code
        assert (workdir / "a" / "extremal.csv").read_bytes() == (workdir / "b" / "extremal.csv").read_bytes()

    def test_invalid_solver_option(self, runner, workdir):
        config = write_config(workdir, horizons=[2], problem="lqr1d", solver={"damping": 0.0})
        assert invoke(runner, "solve", config, workdir / "out").exit_code == 1


class TestSweepCommand:
    """sweep certifies a limit and writes sweep.csv"""

    def test_single_horizon_is_an_error(self, runner, workdir):
        config = write_config(workdir, horizons=[2], **ZERO_PAYOFF)
        assert invoke(runner, "sweep", config, workdir / "out").exit_code == 1

    def test_zero_payoff_sweep_certifies(self, runner, workdir):
        config = write_config(workdir, horizons=[1, 2, 4], **ZERO_PAYOFF)
        out = workdir / "out"
        result = invoke(runner, "sweep", config, out)

        assert result.exit_code == 0
        sweep = read_csv(out / "sweep.csv")
        assert sweep["tau"].tolist() == [1.0, 2.0, 4.0]
        assert (sweep["tail_psi_norm"] == 0.0).all()
        limit = read_csv(out / "limit_extremal.csv")
        assert (limit["psi1"] == 0.0).all()

    def test_uncertified_sweep_exits_flagged(self, runner, workdir):
        document = dict(ZERO_PAYOFF, solver={"grid_steps_per_unit_time": 10, "cauchy_tol": 0.0})
        config = write_config(workdir, horizons=[1, 2], **document)
        out = workdir / "out"
        result = invoke(runner, "sweep", config, out)
        assert result.exit_code == 2
        assert (out / "sweep.csv").exists()
        assert not (out / "limit_extremal.csv").exists()

    def test_penalized_and_fixed_endpoint(self, runner, workdir):
        config = write_config(workdir, horizons=[1, 2], penalty_n=[1, 10], **ZERO_PAYOFF)
        out = workdir / "out"
        result = runner.invoke(
            app, ["sweep", "-c", str(config), "-o", str(out), "--penalized", "--fixed-endpoint"]
        )
        assert result.exit_code == 0
        penalized = read_csv(out / "penalized.csv")
        assert penalized["n"].tolist() == [1, 10]
        assert (penalized["control_distance"] == 0.0).all()
        fixed = read_csv(out / "fixed_sweep.csv")
        assert fixed["tau"].tolist() == [1.0, 2.0]

    @pytest.mark.slow
    def test_lqr1d_config_certifies(self, runner, workdir):
        """The shipped lqr1d document sweeps 5, 10, 20, 40 and certifies"""
        config = Path(__file__).resolve().parents[1] / "configs" / "lqr1d.json"
        out = workdir / "out"
        result = invoke(runner, "sweep", config, out)
        assert result.exit_code == 0
        sweep = read_csv(out / "sweep.csv")
        assert sweep["tau"].tolist() == [5.0, 10.0, 20.0, 40.0]
        assert (out / "limit_extremal.csv").exists()


class TestDiagnoseCommand:
    """diagnose writes transversality.csv and stability.csv"""

    def test_sample_time_beyond_horizon(self, runner, workdir):
        config = write_config(workdir, horizons=[1, 2], sample_times=[5.0], **ZERO_PAYOFF)
        assert invoke(runner, "diagnose", config, workdir / "out").exit_code == 1

    def test_probe_time_at_horizon(self, runner, workdir):
        config = write_config(workdir, horizons=[1, 2], probe={"time": 2.0}, **ZERO_PAYOFF)
        assert invoke(runner, "diagnose", config, workdir / "out").exit_code == 1

    def test_zero_delta_probe(self, runner, workdir):
        config = write_config(
            workdir, horizons=[1, 4], probe={"time": 2.0, "delta": 0.0, "n_directions": 3}, **ZERO_PAYOFF
        )
        out = workdir / "out"
        result = invoke(runner, "diagnose", config, out)

        assert result.exit_code == 0
        stability = read_csv(out / "stability.csv")
        assert stability["direction"].tolist() == [0, 1, 2]
        assert (stability["deviation"] == 0.0).all()
        transversality = read_csv(out / "transversality.csv")
        assert transversality["t"].tolist() == [1.0]
        assert list(transversality.columns) == ["t", "psi_norm", "product_residual"]


class TestBenchCommand:
    """bench compares against oracles"""

    def test_inline_problem_is_an_error(self, runner, workdir):
        config = write_config(workdir, horizons=[2], **ZERO_PAYOFF)
        assert invoke(runner, "bench", config, workdir / "out").exit_code == 1

    @patch("horizon_pmp.cli.run_bench")
    def test_passing_bench(self, mock_run_bench, runner, workdir):
        mock_run_bench.return_value = [BenchRow("lqr1d", "J", -0.6181, -0.618034, 6.6e-5, 1e-3, True)]
        config = write_config(workdir, problem="lqr1d", horizons=[2])
        out = workdir / "out"
        result = invoke(runner, "bench", config, out)

        assert result.exit_code == 0
        mock_run_bench.assert_called_once()
        assert mock_run_bench.call_args.args[0] == "lqr1d"
        assert read_csv(out / "bench.csv")["passed"].tolist() == [True]

    @patch("horizon_pmp.cli.run_bench")
    def test_failing_bench(self, mock_run_bench, runner, workdir):
        mock_run_bench.return_value = [BenchRow("ramsey", "x_mid", 20.0, 25.0, 5.0, 1.25, True)]
        config = write_config(workdir, problem="ramsey", horizons=[2])
        assert invoke(runner, "bench", config, workdir / "out").exit_code == 2

    @patch("horizon_pmp.cli.run_bench")
    def test_all_problems(self, mock_run_bench, runner, workdir):
        mock_run_bench.return_value = []
        result = runner.invoke(app, ["bench", "--all", "--out", str(workdir / "out")])
        assert result.exit_code == 0
        assert [c.args[0] for c in mock_run_bench.call_args_list] == ["lqr1d", "ramsey", "absvalue"]
