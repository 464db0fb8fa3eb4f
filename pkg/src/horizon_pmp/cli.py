#!/usr/bin/env python3
"""
horizon-pmp command line: solve, sweep, diagnose, bench, version.

Every command reads one JSON run document (``--config``) and writes CSVs plus
its logs into ``--out``. Exit codes: 0 success or certified limit, 2 flagged
non-convergence or uncertified limit, 1 error.
"""

import importlib.metadata
import math
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd
import typer
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from . import __version__
from .bench import BenchRow, bench_frame, run_bench
from .config import Config, RunConfig, load_run_config
from .constants import APP_NAME, BUILTIN_PROBLEMS, DEFAULT_OUTPUT_DIR, EXIT_ERROR, EXIT_FLAGGED, EXIT_OK
from .errors import ConfigError, HorizonPMPError, RangeError, SweepAbortedError
from .export import (
    relaxed_trace_frame,
    stability_frame,
    sweep_frame,
    trace_frame,
    transversality_frame,
    write_csv,
)
from .horizon_limits import (
    HorizonSchedule,
    TruncationReport,
    probe_adjoint_stability,
    run_fixed_endpoint_sweep,
    run_penalized_sweep,
    run_truncation_sweep,
    transversality_diagnostics,
)
from .logger import StructuredLogger
from .pmp_finite import Extremal, solve_free_endpoint
from .problem_model import ControlProblem, check_vectogram_convexity, validate_problem
from .relaxed import solve_relaxed_free_endpoint

console = Console()
app = typer.Typer(
    name=APP_NAME,
    help="Finite-horizon maximum principle solver with infinite-horizon limit diagnostics",
    add_completion=False,
    rich_markup_mode="rich",
    no_args_is_help=True,
)

CONFIG_HELP = "JSON run document (defaults to the lqr1d document)"
OUT_HELP = "Output directory for CSVs and logs"
VERBOSE_HELP = "Echo log records to the terminal (-v), include DEBUG (-vv)"


@dataclass
class Session:
    """Loaded run document, process settings, output directory and logger"""

    run: RunConfig
    settings: Config
    out_dir: Path
    logger: StructuredLogger

    def write(self, frame: pd.DataFrame, name: str) -> Path:
        path = write_csv(frame, self.out_dir / name)
        self.logger.info("export", f"wrote {path}", {"rows": int(len(frame))})
        return path


def _load(config_path: Optional[Path]) -> RunConfig:
    return RunConfig() if config_path is None else load_run_config(config_path)


@contextmanager
def session(command: str, config_path: Optional[Path], out: Optional[Path], verbose: int) -> Iterator[Session]:
    """
    Open a command session and map failures onto exit code 1.

    ``typer.Exit`` raised inside the block passes through untouched.
    """
    logger: Optional[StructuredLogger] = None
    try:
        run = _load(config_path)
        settings = Config().with_verbosity(verbose)
        out_dir = Path(out or run.output_dir or DEFAULT_OUTPUT_DIR)
        out_dir.mkdir(parents=True, exist_ok=True)
        logger = StructuredLogger(
            out_dir / "logs",
            enable_colors=settings.enable_colors,
            enable_sqlite=settings.enable_sqlite,
            enable_json=settings.enable_json,
            min_level=settings.log_level,
            echo=verbose > 0,
        )
        yield Session(run, settings, out_dir, logger)
    except typer.Exit:
        raise
    except SweepAbortedError as e:
        if logger is not None:
            logger.error(command, str(e))
        console.print(f"[red]❌ Sweep aborted: {e}[/red]")
        raise typer.Exit(EXIT_ERROR) from None
    except (HorizonPMPError, OSError, ValueError, KeyError) as e:
        if logger is not None:
            logger.error(command, str(e))
        console.print(f"[red]❌ Error: {e}[/red]")
        raise typer.Exit(EXIT_ERROR) from None
    except KeyboardInterrupt:
        console.print("\n[yellow]⚠️ Operation cancelled by user[/yellow]")
        raise typer.Exit(EXIT_ERROR) from None
    finally:
        if logger is not None:
            logger.close()


@contextmanager
def spinner(description: str) -> Iterator[None]:
    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"), console=console, transient=True) as progress:
        progress.add_task(description, total=None)
        yield


def _fmt(value: float) -> str:
    return f"{value:.6g}" if math.isfinite(value) else str(value)


def _finish(ok: bool, title: str, detail: str) -> None:
    if ok:
        console.print(Panel.fit(f"[green]✅ {detail}[/green]", title=title, border_style="green"))
        raise typer.Exit(EXIT_OK)
    console.print(Panel.fit(f"[yellow]⚠️ {detail}[/yellow]", title=title, border_style="yellow"))
    raise typer.Exit(EXIT_FLAGGED)


def display_extremal_table(extremal: Extremal, title: str) -> None:
    table = Table(title=title)
    table.add_column("Quantity", style="cyan", no_wrap=True)
    table.add_column("Value", style="green")
    res = extremal.residual
    table.add_row("horizon", _fmt(extremal.horizon))
    table.add_row("payoff J", _fmt(extremal.payoff))
    table.add_row("lambda", _fmt(extremal.lam))
    table.add_row("|psi(0)|", _fmt(float(np.linalg.norm(extremal.psi.values[0]))))
    table.add_row("max gap", _fmt(res.max_gap))
    table.add_row("state defect", _fmt(res.state_defect))
    table.add_row("adjoint defect", _fmt(res.adjoint_defect))
    table.add_row("iterations", str(extremal.iterations))
    table.add_row("converged", "✅" if extremal.converged else "⚠️ no")
    if extremal.lattice_limited:
        table.add_row("stopped by", "lattice resolution")
    console.print(table)


def display_sweep_table(report: TruncationReport) -> None:
    table = Table(title="Truncation sweep")
    table.add_column("tau", style="cyan", no_wrap=True)
    table.add_column("J_tau", style="green")
    table.add_column("|psi(tau)|", style="green")
    table.add_column("cauchy to last", style="magenta")
    table.add_column("converged")
    for r, d in zip(report.per_horizon, report.cauchy_to_last()):
        table.add_row(
            _fmt(r.horizon),
            _fmt(r.extremal.payoff),
            _fmt(r.residuals.terminal_psi_norm),
            _fmt(d),
            "✅" if r.extremal.converged else "⚠️",
        )
    console.print(table)


def display_bench_table(rows: List[BenchRow]) -> None:
    table = Table(title="Oracle benchmarks")
    table.add_column("Problem", style="cyan", no_wrap=True)
    table.add_column("Quantity")
    table.add_column("Value", style="green")
    table.add_column("Reference", style="green")
    table.add_column("Error", style="magenta")
    table.add_column("Tolerance")
    table.add_column("Status")
    for r in rows:
        table.add_row(
            r.problem, r.quantity, _fmt(r.value), _fmt(r.reference), _fmt(r.abs_error), f"{r.tolerance:g}",
            "✅ pass" if r.passed else "❌ fail",
        )
    console.print(table)


def _schedule(run: RunConfig) -> HorizonSchedule:
    return HorizonSchedule(tuple(run.horizons))


def _sweep(s: Session, problem: ControlProblem, sample_times: Optional[List[float]] = None) -> TruncationReport:
    schedule = _schedule(s.run)
    try:
        return run_truncation_sweep(
            problem,
            schedule,
            s.run.solve_options(),
            independent=s.run.independent,
            workers=s.settings.workers,
            sample_times=sample_times,
            logger=s.logger,
        )
    except SweepAbortedError as e:
        if e.report is not None and e.report.per_horizon:
            s.write(sweep_frame(e.report), "sweep.csv")
        raise


@app.command()
def solve(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_HELP),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help=OUT_HELP),
    verbose: int = typer.Option(0, "-v", "--verbose", count=True, help=VERBOSE_HELP),
) -> None:
    """Solve the free-endpoint problem on the largest horizon and write its trace"""
    with session("solve", config, out, verbose) as s:
        problem = s.run.build_problem()
        T = s.run.horizons[-1]
        opts = s.run.solve_options()

        if s.run.relaxed:
            with spinner(f"Relaxed sweep on [0, {T:g}]..."):
                rext = solve_relaxed_free_endpoint(problem, T, opts, logger=s.logger)
            path = s.write(relaxed_trace_frame(problem, rext), "relaxed_extremal.csv")
            console.print(f"J = {_fmt(rext.payoff)}, max gap = {_fmt(rext.max_gap)}, iterations = {rext.iterations}")
            _finish(rext.converged, "Relaxed solve", f"Trace written to {path}")

        with spinner(f"Forward-backward sweep on [0, {T:g}]..."):
            ext = solve_free_endpoint(problem, T, opts, logger=s.logger)
        path = s.write(trace_frame(problem, ext), "extremal.csv")
        display_extremal_table(ext, f"Extremal of {problem.label} on [0, {T:g}]")
        _finish(ext.converged, "Solve", f"Trace written to {path}")


def _limit_control_distance(a: Extremal, b: Extremal) -> float:
    grid = a.grid
    return max(float(np.linalg.norm(a.u.values[k] - b.u.at(grid.node(k)))) for k in range(grid.n_steps))


@app.command()
def sweep(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_HELP),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help=OUT_HELP),
    penalized: bool = typer.Option(False, "--penalized", help="Also run the penalized sweeps for every penalty_n"),
    fixed_endpoint: bool = typer.Option(False, "--fixed-endpoint", help="Also run fixed-endpoint truncations pinned to the largest extremal"),
    verbose: int = typer.Option(0, "-v", "--verbose", count=True, help=VERBOSE_HELP),
) -> None:
    """Run the truncation sweep and certify a limit extremal"""
    with session("sweep", config, out, verbose) as s:
        problem = s.run.build_problem()
        with spinner(f"Sweeping horizons {s.run.horizons}..."):
            report = _sweep(s, problem, s.run.sample_times)
        s.write(sweep_frame(report), "sweep.csv")
        display_sweep_table(report)
        certified = report.certified
        if report.limit is not None:
            s.write(trace_frame(problem, report.limit), "limit_extremal.csv")

        if penalized:
            with spinner(f"Penalized sweeps for n in {s.run.penalty_n}..."):
                reports = run_penalized_sweep(
                    problem, report.largest.u, s.run.penalty_n, _schedule(s.run), s.run.solve_options(), logger=s.logger
                )
            rows = [
                (n, r.certified, r.largest.payoff, _limit_control_distance(r.largest, report.largest))
                for n, r in zip(s.run.penalty_n, reports)
            ]
            s.write(pd.DataFrame(rows, columns=["n", "certified", "J_tau", "control_distance"]), "penalized.csv")
            certified = certified and all(r.certified for r in reports)

        if fixed_endpoint:
            with spinner("Fixed-endpoint truncations..."):
                fixed = run_fixed_endpoint_sweep(
                    problem, report.largest, _schedule(s.run), s.run.solve_options(), logger=s.logger
                )
            s.write(sweep_frame(fixed), "fixed_sweep.csv")

        _finish(
            certified,
            "Sweep",
            "Limit extremal certified" if certified else "No limit certified; see sweep.csv",
        )


@app.command()
def diagnose(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_HELP),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help=OUT_HELP),
    verbose: int = typer.Option(0, "-v", "--verbose", count=True, help=VERBOSE_HELP),
) -> None:
    """Transversality and adjoint-stability diagnostics of the limit extremal"""
    with session("diagnose", config, out, verbose) as s:
        run = s.run
        problem = s.run.build_problem()
        last = run.horizons[-1]
        times = run.sample_times if run.sample_times is not None else run.horizons[:-1]
        bad = [t for t in times if not 0.0 <= t <= last]
        if bad:
            raise RangeError(f"sample times {bad} outside [0, {last:g}]")
        if not 0.0 <= run.probe.time < last:
            raise RangeError(f"probe time {run.probe.time:g} outside [0, {last:g})")

        checks = validate_problem(problem, seed=run.seed)
        for d in checks:
            s.logger.warn("validate", f"{d.check} at {d.location}: {d.message}", {"magnitude": d.magnitude})
        convex = check_vectogram_convexity(problem, 0.0, problem.x0, n_samples=50, tol=1e-9, seed=run.seed)
        s.logger.info("validate", f"vectogram sampler {'passed' if convex else 'found a witness'} at (0, x0)")

        with spinner("Sweeping horizons for the limit extremal..."):
            report = _sweep(s, problem)
        limit = report.limit if report.limit is not None else report.largest

        psi_norms, products = transversality_diagnostics(limit, times)
        s.write(transversality_frame(times, psi_norms, products), "transversality.csv")
        probe = probe_adjoint_stability(problem, limit, run.probe.time, run.probe.delta, run.probe.n_directions, run.seed)
        s.write(stability_frame(probe), "stability.csv")

        table = Table(title=f"Diagnostics of {problem.label}")
        table.add_column("Check", style="cyan", no_wrap=True)
        table.add_column("Status", style="magenta")
        table.add_column("Details", style="green")
        table.add_row("problem checks", "✅ OK" if not checks else "⚠️ Issues", f"{len(checks)} failed")
        table.add_row("vectogram convexity", "✅ OK" if convex else "⚠️ Witness", f"{convex.n_checked} samples")
        table.add_row("limit certified", "✅ OK" if report.certified else "⚠️ No", f"cauchy row {report.cauchy_to_last()}")
        if psi_norms:
            table.add_row("|psi| at last sample", "", _fmt(psi_norms[-1]))
            table.add_row("|psi . x| at last sample", "", _fmt(products[-1]))
        table.add_row("stability modulus", "", f"{_fmt(probe.modulus)} (delta {probe.delta:g}, t {probe.probe_time:g})")
        console.print(table)

        _finish(report.certified, "Diagnose", f"Diagnostics written to {s.out_dir}")


@app.command()
def bench(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_HELP),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help=OUT_HELP),
    all_problems: bool = typer.Option(False, "--all", help="Benchmark every builtin problem"),
    verbose: int = typer.Option(0, "-v", "--verbose", count=True, help=VERBOSE_HELP),
) -> None:
    """Compare solver output against the closed-form oracles"""
    with session("bench", config, out, verbose) as s:
        if all_problems:
            names: Tuple[str, ...] = BUILTIN_PROBLEMS
        elif s.run.is_builtin:
            names = (s.run.problem_name,)
        else:
            raise ConfigError("bench needs a builtin problem name (or --all)")

        rows: List[BenchRow] = []
        for name in names:
            with spinner(f"Benchmarking {name}..."):
                rows.extend(run_bench(name, s.run.solver, logger=s.logger))
        s.write(bench_frame(rows), "bench.csv")
        display_bench_table(rows)
        passed = all(r.passed for r in rows)
        _finish(passed, "Bench", "All oracle checks passed" if passed else "Oracle checks failed; see bench.csv")


@app.command()
def version() -> None:
    """Print the installed package version"""
    try:
        typer.echo(importlib.metadata.version(APP_NAME))
    except importlib.metadata.PackageNotFoundError:
        typer.echo(__version__)


def main() -> None:
    app()


if __name__ == "__main__":
    main()
