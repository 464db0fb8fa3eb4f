"""
Oracle comparisons for the builtin problems.

Each case fixes its horizon, lattice and grid density; solver fields given in
the run document override the case defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Mapping, NamedTuple, Optional

import numpy as np
import pandas as pd

from .benchmarks import (
    LQR_RHO,
    builtin_problem,
    oracle_absvalue,
    oracle_lqr,
    oracle_ramsey_steady_state,
    ramsey_bench_problem,
)
from .constants import BUILTIN_PROBLEMS
from .errors import UnknownProblemError
from .odeint import sample
from .pmp_finite import SolveOptions, solve_free_endpoint
from .relaxed import solve_relaxed_free_endpoint

if TYPE_CHECKING:
    from .logger import StructuredLogger


class BenchRow(NamedTuple):
    problem: str
    quantity: str
    value: float
    reference: float
    abs_error: float
    tolerance: float
    converged: bool

    @property
    def passed(self) -> bool:
        return math.isfinite(self.abs_error) and self.abs_error <= self.tolerance


def _row(problem: str, quantity: str, value: float, reference: float, tolerance: float, converged: bool) -> BenchRow:
    return BenchRow(problem, quantity, float(value), float(reference), abs(float(value) - float(reference)), tolerance, converged)


@dataclass(frozen=True)
class BenchCase:
    name: str
    horizon: float
    solver: Dict[str, Any] = field(default_factory=dict)
    grid_per_axis: Optional[int] = None

    def options(self, overrides: Optional[Mapping[str, Any]] = None) -> SolveOptions:
        return SolveOptions(**{**self.solver, **dict(overrides or {})})


BENCH_CASES: Dict[str, BenchCase] = {
    "lqr1d": BenchCase("lqr1d", 20.0, {"grid_steps_per_unit_time": 100}, grid_per_axis=2001),
    "absvalue": BenchCase("absvalue", 10.0, {"grid_steps_per_unit_time": 20}),
    "ramsey": BenchCase("ramsey", 60.0, {"grid_steps_per_unit_time": 10}),
}

LQR_PSI_WINDOW = 10.0


def _bench_lqr1d(case: BenchCase, opts: SolveOptions, logger: Optional["StructuredLogger"]) -> List[BenchRow]:
    problem = builtin_problem("lqr1d", case.grid_per_axis)
    x0 = float(problem.x0[0])
    oracle = oracle_lqr(LQR_RHO, x0)
    ext = solve_free_endpoint(problem, case.horizon, opts, logger=logger)

    times = [t for t in ext.grid.nodes if t <= LQR_PSI_WINDOW + 1e-12]
    psi_err = max(abs(float(sample(ext.psi, float(t))[0]) - oracle.psi_closed_form(float(t))) for t in times)
    return [
        _row("lqr1d", "J", ext.payoff, oracle.J_star, 1e-3, ext.converged),
        _row("lqr1d", "lambda", ext.lam, oracle.lam, 5e-3, ext.converged),
        BenchRow("lqr1d", "psi_sup_error", psi_err, 0.0, psi_err, 5e-3, ext.converged),
    ]


def _bench_absvalue(case: BenchCase, opts: SolveOptions, logger: Optional["StructuredLogger"]) -> List[BenchRow]:
    problem = builtin_problem("absvalue")
    ext = solve_relaxed_free_endpoint(problem, case.horizon, opts, logger=logger)
    return [_row("absvalue", "J_relaxed", ext.payoff, oracle_absvalue(), 1e-2, ext.converged)]


def _bench_ramsey(case: BenchCase, opts: SolveOptions, logger: Optional["StructuredLogger"]) -> List[BenchRow]:
    problem = ramsey_bench_problem(case.grid_per_axis)
    x_star = oracle_ramsey_steady_state()
    ext = solve_free_endpoint(problem, case.horizon, opts, logger=logger)
    mid = float(sample(ext.x, case.horizon / 2.0)[0])
    return [_row("ramsey", "x_mid", mid, x_star, 0.05 * x_star, ext.converged)]


_RUNNERS: Dict[str, Callable[[BenchCase, SolveOptions, Optional["StructuredLogger"]], List[BenchRow]]] = {
    "lqr1d": _bench_lqr1d,
    "absvalue": _bench_absvalue,
    "ramsey": _bench_ramsey,
}


def run_bench(
    name: str,
    solver_overrides: Optional[Mapping[str, Any]] = None,
    logger: Optional["StructuredLogger"] = None,
) -> List[BenchRow]:
    """Solve one builtin at its bench settings and compare against its oracle."""
    if name not in _RUNNERS:
        raise UnknownProblemError(name, list(BUILTIN_PROBLEMS))
    case = BENCH_CASES[name]
    rows = _RUNNERS[name](case, case.options(solver_overrides), logger)
    if logger is not None:
        for row in rows:
            level = "SUCCESS" if row.passed else "WARN"
            logger.log(level, "bench", f"{row.problem} {row.quantity}: {row.value:.9g} vs {row.reference:.9g} "
                       f"(err {row.abs_error:.3e}, tol {row.tolerance:g})")
    return rows


def bench_frame(rows: List[BenchRow]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "problem": [r.problem for r in rows],
            "quantity": [r.quantity for r in rows],
            "value": [r.value for r in rows],
            "reference": [r.reference for r in rows],
            "abs_error": [r.abs_error for r in rows],
            "tolerance": [r.tolerance for r in rows],
            "converged": [r.converged for r in rows],
            "passed": np.array([r.passed for r in rows], dtype=bool),
        }
    )


__all__ = ["BENCH_CASES", "BenchCase", "BenchRow", "bench_frame", "run_bench"]
